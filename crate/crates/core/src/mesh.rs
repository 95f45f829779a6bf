//! Domains, uniform tensor grids, grid functions and quadrature.
//!
//! Nodes are numbered row-major (`i + n * j`, `i` along x). Every node is
//! either interior, where a discrete equation is posed, or boundary, where
//! the homogeneous Dirichlet value lives. On the disk the box
//! `[cx - R, cx + R] x [cy - R, cy + R]` is gridded and a node is interior
//! iff its distance to the center is below `R - h/2`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// A point in the plane; 1D grids leave the second coordinate at zero.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
    Disk { radius: f64, center: Point },
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_disk() -> Self {
        Domain::Disk {
            radius: 1.0,
            center: [0.0, 0.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            Domain::Interval { a, b } => {
                if !finite(&[a, b]) || a >= b {
                    return Err(Error::InvalidDomain(format!("interval needs a < b, got ({a}, {b})")));
                }
            }
            Domain::Rectangle { ax, bx, ay, by } => {
                if !finite(&[ax, bx, ay, by]) || ax >= bx || ay >= by {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle needs ax < bx and ay < by, got ({ax}, {bx}) x ({ay}, {by})"
                    )));
                }
            }
            Domain::Disk { radius, center } => {
                if !finite(&[radius, center[0], center[1]]) || radius <= 0.0 {
                    return Err(Error::InvalidDomain(format!("disk needs R > 0, got {radius}")));
                }
            }
        }
        Ok(())
    }

    /// Lebesgue measure of the continuous domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { ax, bx, ay, by } => (bx - ax) * (by - ay),
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    fn bounding_box(&self) -> [(f64, f64); 2] {
        match *self {
            Domain::Interval { a, b } => [(a, b), (0.0, 0.0)],
            Domain::Rectangle { ax, bx, ay, by } => [(ax, bx), (ay, by)],
            Domain::Disk { radius, center } => [
                (center[0] - radius, center[0] + radius),
                (center[1] - radius, center[1] + radius),
            ],
        }
    }
}

/// Uniform tensor-product grid over a [`Domain`].
#[derive(Debug, Clone)]
pub struct Grid {
    id: u64,
    domain: Domain,
    n: usize,
    dim: usize,
    spacing: [f64; 2],
    coords: Vec<Point>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// Position of each node in `interior`, if interior.
    unknown: Vec<Option<usize>>,
    quad_weights: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        domain.validate()?;
        if n < 4 {
            return Err(Error::TooFewNodes(n));
        }
        let dim = domain.dim();
        let bbox = domain.bounding_box();
        let spacing = [
            (bbox[0].1 - bbox[0].0) / (n - 1) as f64,
            if dim == 2 {
                (bbox[1].1 - bbox[1].0) / (n - 1) as f64
            } else {
                0.0
            },
        ];
        let node_count = if dim == 1 { n } else { n * n };
        let mut coords = Vec::with_capacity(node_count);
        for j in 0..(if dim == 1 { 1 } else { n }) {
            for i in 0..n {
                let x = bbox[0].0 + i as f64 * spacing[0];
                let y = if dim == 2 { bbox[1].0 + j as f64 * spacing[1] } else { 0.0 };
                coords.push([x, y]);
            }
        }

        let mut is_interior = vec![false; node_count];
        let mut quad_weights = vec![0.0; node_count];
        match domain {
            Domain::Interval { .. } => {
                let h = spacing[0];
                for i in 0..n {
                    is_interior[i] = i != 0 && i != n - 1;
                    quad_weights[i] = if is_interior[i] { h } else { 0.5 * h };
                }
            }
            Domain::Rectangle { .. } => {
                let trap = |k: usize, h: f64| if k == 0 || k == n - 1 { 0.5 * h } else { h };
                for j in 0..n {
                    for i in 0..n {
                        let node = i + n * j;
                        is_interior[node] = i != 0 && i != n - 1 && j != 0 && j != n - 1;
                        quad_weights[node] = trap(i, spacing[0]) * trap(j, spacing[1]);
                    }
                }
            }
            Domain::Disk { radius, center } => {
                let h = spacing[0];
                let cutoff = radius - 0.5 * h;
                for (node, p) in coords.iter().enumerate() {
                    let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                    is_interior[node] = r < cutoff;
                    quad_weights[node] = if is_interior[node] { h * h } else { 0.0 };
                }
            }
        }

        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut unknown = vec![None; node_count];
        for (node, &inside) in is_interior.iter().enumerate() {
            if inside {
                unknown[node] = Some(interior.len());
                interior.push(node);
            } else {
                boundary.push(node);
            }
        }
        if interior.is_empty() {
            return Err(Error::InvalidDomain("grid has no interior nodes".into()));
        }

        Ok(Grid {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            domain,
            n,
            dim,
            spacing,
            coords,
            interior,
            boundary,
            unknown,
            quad_weights,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Largest spacing over the active axes.
    pub fn h(&self) -> f64 {
        self.spacing[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn point(&self, node: usize) -> Point {
        self.coords[node]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.unknown[node].is_some()
    }

    /// Index of `node` among the interior unknowns.
    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        self.unknown[node]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Neighbour of `node` one step along `axis` in direction `step` (+1 or -1).
    ///
    /// Only meaningful for interior nodes, which always have all neighbours.
    pub(crate) fn neighbor(&self, node: usize, axis: usize, step: isize) -> usize {
        let stride = if axis == 0 { 1 } else { self.n } as isize;
        (node as isize + step * stride) as usize
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid_id: self.id,
            values: vec![0.0; self.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, mut f: impl FnMut(Point) -> f64) -> GridFunction {
        GridFunction {
            grid_id: self.id,
            values: self.coords.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Samples `f` at interior nodes and sets boundary nodes to zero.
    pub fn sample_interior(&self, mut f: impl FnMut(Point) -> f64) -> GridFunction {
        let mut g = self.zeros();
        for &node in &self.interior {
            g.values[node] = f(self.coords[node]);
        }
        g
    }

    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridFunction {
            grid_id: self.id,
            values,
        })
    }

    /// Expands a vector over interior unknowns to a grid function with zero
    /// boundary values.
    pub fn from_interior(&self, unknowns: &[f64]) -> GridFunction {
        debug_assert_eq!(unknowns.len(), self.interior.len());
        let mut g = self.zeros();
        for (k, &node) in self.interior.iter().enumerate() {
            g.values[node] = unknowns[k];
        }
        g
    }

    pub fn to_interior(&self, f: &GridFunction) -> Vec<f64> {
        self.interior.iter().map(|&node| f.values[node]).collect()
    }

    pub fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid_id != self.id {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn integrate(&self, f: &GridFunction) -> Result<f64> {
        self.check(f)?;
        Ok(self
            .quad_weights
            .iter()
            .zip(&f.values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Quadrature L^p norm `(sum w_i |f_i|^p)^(1/p)`.
    pub fn lp_norm(&self, f: &GridFunction, p: f64) -> Result<f64> {
        self.check(f)?;
        let s: f64 = self
            .quad_weights
            .iter()
            .zip(&f.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }
}

/// Real values on every node of a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid_id: u64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid_id: self.grid_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid_id, other.grid_id, "grid functions on different grids");
        GridFunction {
            grid_id: self.grid_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.grid_id, other.grid_id, "grid functions on different grids");
        GridFunction {
            grid_id: self.grid_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

pub fn build_grid(domain: Domain, n: usize) -> Result<Grid> {
    Grid::new(domain, n)
}

pub fn integrate(grid: &Grid, f: &GridFunction) -> Result<f64> {
    grid.integrate(f)
}

pub fn sup_norm(f: &GridFunction) -> f64 {
    f.sup_norm()
}
