//! Bellman-form operators `F(u) = inf_k L^k u` and their monotone
//! finite-difference evaluation.
//!
//! Each member is `L u = -sum_d a_d d_dd u + b . Du + c u` with axis-aligned
//! diffusion. Second derivatives use central differences, first derivatives
//! are upwinded per drift component so every off-diagonal stencil weight is
//! nonpositive.

mod builtin;
mod hypotheses;

pub use builtin::{tangential_drift, min_laplacians, laplacian, pucci_minus, pucci_plus};
pub use hypotheses::{check_hypotheses, CheckOutcome, HypothesisReport, HYPOTHESIS_TOL};
pub(crate) use hypotheses::random_function;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::{Grid, GridFunction};
use crate::sparse::CsrMatrix;

/// Relative tolerance under which two member values count as tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Slack allowed when checking sampled coefficients against declared bounds.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityParams {
    pub gamma: f64,
    pub big_gamma: f64,
    /// Bound on the drift magnitude.
    pub delta1: f64,
    /// Bound on the zeroth-order coefficient.
    pub delta0: f64,
}

impl EllipticityParams {
    pub fn new(gamma: f64, big_gamma: f64, delta1: f64, delta0: f64) -> Result<Self> {
        let p = EllipticityParams {
            gamma,
            big_gamma,
            delta1,
            delta0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.big_gamma, self.delta1, self.delta0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= self.big_gamma) {
            return Err(Error::InvalidParams(format!(
                "need 0 < gamma <= Gamma, got gamma = {}, Gamma = {}",
                self.gamma, self.big_gamma
            )));
        }
        if self.delta1 < 0.0 || self.delta0 < 0.0 {
            return Err(Error::InvalidParams("delta1 and delta0 must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One linear member `-sum_d a_d d_dd + b . D + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperatorSpec {
    pub diffusion: Vec<Expr>,
    pub drift: Vec<Expr>,
    pub zeroth: Expr,
}

impl LinearOperatorSpec {
    pub fn new(diffusion: Vec<Expr>, drift: Vec<Expr>, zeroth: Expr) -> Self {
        LinearOperatorSpec {
            diffusion,
            drift,
            zeroth,
        }
    }

    /// `-a * Laplacian` in `dim` dimensions.
    pub fn scaled_laplacian(dim: usize, a: f64) -> Self {
        LinearOperatorSpec {
            diffusion: vec![Expr::constant(a); dim],
            drift: vec![Expr::constant(0.0); dim],
            zeroth: Expr::constant(0.0),
        }
    }

    pub fn with_drift(mut self, drift: Vec<Expr>) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_zeroth(mut self, zeroth: Expr) -> Self {
        self.zeroth = zeroth;
        self
    }

    pub fn dim(&self) -> usize {
        self.diffusion.len()
    }

    /// True when drift and zeroth-order terms are identically zero constants.
    pub fn is_pure_second_order(&self) -> bool {
        self.drift.iter().all(Expr::is_zero_constant) && self.zeroth.is_zero_constant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pointwise infimum over the family (concave).
    Inf,
    /// Pointwise supremum (convex); produced by [`BellmanOperator::dual`].
    Sup,
}

impl Mode {
    fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Mode::Inf => candidate < incumbent,
            Mode::Sup => candidate > incumbent,
        }
    }

    pub fn flipped(self) -> Mode {
        match self {
            Mode::Inf => Mode::Sup,
            Mode::Sup => Mode::Inf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellmanOperator {
    pub family: Vec<LinearOperatorSpec>,
    pub params: EllipticityParams,
    pub mode: Mode,
}

impl BellmanOperator {
    pub fn new(family: Vec<LinearOperatorSpec>, params: EllipticityParams) -> Result<Self> {
        Self::with_mode(family, params, Mode::Inf)
    }

    pub fn with_mode(
        family: Vec<LinearOperatorSpec>,
        params: EllipticityParams,
        mode: Mode,
    ) -> Result<Self> {
        params.validate()?;
        if family.is_empty() {
            return Err(Error::InvalidOperator {
                member: 0,
                message: "family must be nonempty".into(),
            });
        }
        let dim = family[0].dim();
        for (k, m) in family.iter().enumerate() {
            if m.dim() != dim || m.drift.len() != dim || !(1..=2).contains(&dim) {
                return Err(Error::InvalidOperator {
                    member: k,
                    message: format!(
                        "member has {} diffusion and {} drift terms, expected {dim}",
                        m.diffusion.len(),
                        m.drift.len()
                    ),
                });
            }
        }
        Ok(BellmanOperator {
            family,
            params,
            mode,
        })
    }

    pub fn linear(spec: LinearOperatorSpec, params: EllipticityParams) -> Result<Self> {
        Self::new(vec![spec], params)
    }

    pub fn dim(&self) -> usize {
        self.family[0].dim()
    }

    /// The reflection `u -> -F(-u)`: same family, extremum flipped.
    pub fn dual(&self) -> BellmanOperator {
        BellmanOperator {
            family: self.family.clone(),
            params: self.params,
            mode: self.mode.flipped(),
        }
    }

    pub fn is_pure_second_order(&self) -> bool {
        self.family.iter().all(LinearOperatorSpec::is_pure_second_order)
    }

    /// Samples coefficients on `grid`, verifying declared bounds, expression
    /// totality and the monotonicity condition `h * delta1 <= 2 * gamma`.
    pub fn bind<'g>(&self, grid: &'g Grid) -> Result<BoundOperator<'g>> {
        let bound = self.bind_unchecked(grid)?;
        bound.verify_bounds()?;
        let h = grid.h();
        if h * self.params.delta1 > 2.0 * self.params.gamma {
            return Err(Error::Cfl {
                value: h * self.params.delta1,
                limit: 2.0 * self.params.gamma,
            });
        }
        Ok(bound)
    }

    /// Samples coefficients without checking them against `params`.
    pub fn bind_unchecked<'g>(&self, grid: &'g Grid) -> Result<BoundOperator<'g>> {
        if self.dim() != grid.dim() {
            return Err(Error::InvalidOperator {
                member: 0,
                message: format!("operator is {}-dimensional, grid is {}-dimensional", self.dim(), grid.dim()),
            });
        }
        let dim = grid.dim();
        let interior = grid.interior();
        let mut members = Vec::with_capacity(self.family.len());
        for spec in &self.family {
            let mut diffusion = vec![[0.0; 2]; interior.len()];
            let mut drift = vec![[0.0; 2]; interior.len()];
            for d in 0..dim {
                let a = spec.diffusion[d].sample_checked(grid)?;
                let b = spec.drift[d].sample_checked(grid)?;
                for (k, &node) in interior.iter().enumerate() {
                    diffusion[k][d] = a[node];
                    drift[k][d] = b[node];
                }
            }
            let c = spec.zeroth.sample_checked(grid)?;
            let zeroth = interior.iter().map(|&node| c[node]).collect();
            members.push(BoundMember {
                diffusion,
                drift,
                zeroth,
            });
        }
        Ok(BoundOperator {
            grid,
            params: self.params,
            mode: self.mode,
            members,
        })
    }
}

#[derive(Debug, Clone)]
struct BoundMember {
    diffusion: Vec<[f64; 2]>,
    drift: Vec<[f64; 2]>,
    zeroth: Vec<f64>,
}

/// Per-interior-node member selection (argmin in inf mode, argmax in sup mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlField {
    grid_id: u64,
    pub selection: Vec<usize>,
    pub tie_mask: Vec<bool>,
}

impl ControlField {
    /// A field selecting `member` at every interior node, with no ties.
    pub fn constant(grid: &Grid, member: usize) -> Self {
        ControlField {
            grid_id: grid.id(),
            selection: vec![member; grid.interior().len()],
            tie_mask: vec![false; grid.interior().len()],
        }
    }

    pub fn from_selection(grid: &Grid, selection: Vec<usize>) -> Result<Self> {
        if selection.len() != grid.interior().len() {
            return Err(Error::LengthMismatch {
                expected: grid.interior().len(),
                got: selection.len(),
            });
        }
        let n = selection.len();
        Ok(ControlField {
            grid_id: grid.id(),
            selection,
            tie_mask: vec![false; n],
        })
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn tied_count(&self) -> usize {
        self.tie_mask.iter().filter(|&&t| t).count()
    }

    /// Quadrature mass of the tied nodes.
    pub fn tie_measure(&self, grid: &Grid) -> f64 {
        grid.interior()
            .iter()
            .zip(&self.tie_mask)
            .filter(|(_, &t)| t)
            .map(|(&node, _)| grid.quad_weights()[node])
            .sum()
    }

    /// Number of interior nodes where the two fields select different members.
    pub fn switches_from(&self, other: &ControlField) -> usize {
        self.selection
            .iter()
            .zip(&other.selection)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A Bellman operator with coefficients sampled on a grid.
#[derive(Debug, Clone)]
pub struct BoundOperator<'g> {
    grid: &'g Grid,
    params: EllipticityParams,
    mode: Mode,
    members: Vec<BoundMember>,
}

impl<'g> BoundOperator<'g> {
    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn params(&self) -> EllipticityParams {
        self.params
    }

    pub fn family_len(&self) -> usize {
        self.members.len()
    }

    pub fn dual(&self) -> BoundOperator<'g> {
        BoundOperator {
            grid: self.grid,
            params: self.params,
            mode: self.mode.flipped(),
            members: self.members.clone(),
        }
    }

    fn verify_bounds(&self) -> Result<()> {
        let p = self.params;
        let dim = self.grid.dim();
        let slack = |v: f64| BOUND_SLACK * (1.0 + v.abs());
        for (m, member) in self.members.iter().enumerate() {
            for (k, &node) in self.grid.interior().iter().enumerate() {
                for d in 0..dim {
                    let a = member.diffusion[k][d];
                    if a < p.gamma - slack(p.gamma) || a > p.big_gamma + slack(p.big_gamma) {
                        return Err(Error::CoefficientBound {
                            member: m,
                            node,
                            message: format!(
                                "diffusion a_{d} = {a} outside [{}, {}]",
                                p.gamma, p.big_gamma
                            ),
                        });
                    }
                }
                let b = member.drift[k];
                let bnorm = b[0].hypot(b[1]);
                if bnorm > p.delta1 + slack(p.delta1) {
                    return Err(Error::CoefficientBound {
                        member: m,
                        node,
                        message: format!("|b| = {bnorm} exceeds delta1 = {}", p.delta1),
                    });
                }
                let c = member.zeroth[k];
                if c.abs() > p.delta0 + slack(p.delta0) {
                    return Err(Error::CoefficientBound {
                        member: m,
                        node,
                        message: format!("|c| = {} exceeds delta0 = {}", c.abs(), p.delta0),
                    });
                }
            }
        }
        Ok(())
    }

    /// Stencil of member `m` at interior unknown `k`, as `(node, weight)`
    /// pairs including boundary neighbours. The centre node comes first.
    pub fn stencil(&self, m: usize, k: usize) -> Vec<(usize, f64)> {
        let grid = self.grid;
        let member = &self.members[m];
        let node = grid.interior()[k];
        let mut diag = member.zeroth[k];
        let mut out = Vec::with_capacity(1 + 2 * grid.dim());
        out.push((node, 0.0));
        for d in 0..grid.dim() {
            let h = grid.spacing(d);
            let a = member.diffusion[k][d];
            let b = member.drift[k][d];
            let left = grid.neighbor(node, d, -1);
            let right = grid.neighbor(node, d, 1);
            diag += 2.0 * a / (h * h);
            let mut wl = -a / (h * h);
            let mut wr = -a / (h * h);
            if b > 0.0 {
                diag += b / h;
                wl -= b / h;
            } else if b < 0.0 {
                diag -= b / h;
                wr += b / h;
            }
            out.push((left, wl));
            out.push((right, wr));
        }
        out[0].1 = diag;
        out
    }

    fn apply_member_at(&self, m: usize, k: usize, u: &[f64]) -> f64 {
        let grid = self.grid;
        let member = &self.members[m];
        let node = grid.interior()[k];
        let uc = u[node];
        let mut v = member.zeroth[k] * uc;
        for d in 0..grid.dim() {
            let h = grid.spacing(d);
            let ul = u[grid.neighbor(node, d, -1)];
            let ur = u[grid.neighbor(node, d, 1)];
            v -= member.diffusion[k][d] * (ul - 2.0 * uc + ur) / (h * h);
            let b = member.drift[k][d];
            if b > 0.0 {
                v += b * (uc - ul) / h;
            } else if b < 0.0 {
                v += b * (ur - uc) / h;
            }
        }
        v
    }

    /// `L^m u` at interior nodes; boundary nodes carry zero.
    pub fn eval_member(&self, m: usize, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check(u)?;
        let vals = u.values();
        let out: Vec<f64> = (0..self.grid.interior().len())
            .map(|k| self.apply_member_at(m, k, vals))
            .collect();
        Ok(self.grid.from_interior(&out))
    }

    /// Evaluates `F(u)` and the selecting control field.
    ///
    /// The selected member is the lowest index whose value lies within
    /// `tie_tol * (1 + max_m ||L^m u||_inf)` of the extremum; a node is tied
    /// when at least two members lie within that band.
    pub fn eval(&self, u: &GridFunction, tie_tol: f64) -> Result<(GridFunction, ControlField)> {
        self.eval_with_prior(u, tie_tol, None)
    }

    /// Like [`eval`](Self::eval), but a node keeps its `prior` member whenever
    /// that member is still within the tie band. Policy iteration uses this so
    /// roundoff-level ties never flip the policy.
    pub fn eval_with_prior(
        &self,
        u: &GridFunction,
        tie_tol: f64,
        prior: Option<&ControlField>,
    ) -> Result<(GridFunction, ControlField)> {
        self.grid.check(u)?;
        let vals = u.values();
        let nk = self.grid.interior().len();
        let per_member: Vec<Vec<f64>> = (0..self.members.len())
            .map(|m| (0..nk).map(|k| self.apply_member_at(m, k, vals)).collect())
            .collect();
        let scale = per_member
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        let band = tie_tol * (1.0 + scale);
        let mut value = vec![0.0; nk];
        let mut selection = vec![0; nk];
        let mut tie_mask = vec![false; nk];
        for k in 0..nk {
            let mut best = per_member[0][k];
            for vm in per_member.iter().skip(1) {
                if self.mode.better(vm[k], best) {
                    best = vm[k];
                }
            }
            value[k] = best;
            let mut within = per_member
                .iter()
                .enumerate()
                .filter(|(_, vm)| (vm[k] - best).abs() <= band)
                .map(|(m, _)| m);
            let in_band: Vec<usize> = within.by_ref().collect();
            selection[k] = match prior {
                Some(p) if in_band.contains(&p.selection[k]) => p.selection[k],
                _ => in_band.first().copied().unwrap_or(0),
            };
            tie_mask[k] = in_band.len() > 1;
        }
        Ok((
            self.grid.from_interior(&value),
            ControlField {
                grid_id: self.grid.id(),
                selection,
                tie_mask,
            },
        ))
    }

    /// `F(u)` without the control field.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check(u)?;
        let vals = u.values();
        let out: Vec<f64> = (0..self.grid.interior().len())
            .map(|k| {
                let mut best = self.apply_member_at(0, k, vals);
                for m in 1..self.members.len() {
                    let v = self.apply_member_at(m, k, vals);
                    if self.mode.better(v, best) {
                        best = v;
                    }
                }
                best
            })
            .collect();
        Ok(self.grid.from_interior(&out))
    }

    /// Matrix over interior unknowns of the member chosen node-by-node by
    /// `selection`. Boundary columns are dropped (homogeneous Dirichlet data).
    pub fn frozen_matrix(&self, selection: &[usize]) -> CsrMatrix {
        let grid = self.grid;
        let rows = (0..grid.interior().len())
            .map(|k| {
                self.stencil(selection[k], k)
                    .into_iter()
                    .filter_map(|(node, w)| grid.unknown_index(node).map(|j| (j, w)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    pub fn member_matrix(&self, m: usize) -> CsrMatrix {
        self.frozen_matrix(&vec![m; self.grid.interior().len()])
    }

    /// `sup_k |c^k|` over members and interior nodes.
    pub fn max_abs_zeroth(&self) -> f64 {
        self.members
            .iter()
            .flat_map(|m| m.zeroth.iter())
            .fold(0.0, |a, &c| a.max(c.abs()))
    }

    /// Discrete Pucci extremal values of `w` on this stencil:
    /// `(P^-(w), P^+(w))` with `P^-(w) = sum_d min(-gamma w_dd, -Gamma w_dd)`.
    pub fn pucci_pair(&self, w: &GridFunction) -> Result<(Vec<f64>, Vec<f64>)> {
        self.grid.check(w)?;
        let grid = self.grid;
        let vals = w.values();
        let (g, bg) = (self.params.gamma, self.params.big_gamma);
        let mut lo = Vec::with_capacity(grid.interior().len());
        let mut hi = Vec::with_capacity(grid.interior().len());
        for &node in grid.interior() {
            let (mut a, mut b) = (0.0, 0.0);
            for d in 0..grid.dim() {
                let h = grid.spacing(d);
                let dd = (vals[grid.neighbor(node, d, -1)] - 2.0 * vals[node]
                    + vals[grid.neighbor(node, d, 1)])
                    / (h * h);
                a += (-g * dd).min(-bg * dd);
                b += (-g * dd).max(-bg * dd);
            }
            lo.push(a);
            hi.push(b);
        }
        Ok((lo, hi))
    }

    /// `sqrt(sum_d max(|D+_d w|, |D-_d w|)^2)` at interior nodes; bounds every
    /// upwind drift term `|b . Dw|` by `|b|` times this value.
    pub fn upwind_gradient_magnitude(&self, w: &GridFunction) -> Result<Vec<f64>> {
        self.grid.check(w)?;
        let grid = self.grid;
        let vals = w.values();
        Ok(grid
            .interior()
            .iter()
            .map(|&node| {
                (0..grid.dim())
                    .map(|d| {
                        let h = grid.spacing(d);
                        let fwd = (vals[grid.neighbor(node, d, 1)] - vals[node]) / h;
                        let bwd = (vals[node] - vals[grid.neighbor(node, d, -1)]) / h;
                        let m = fwd.abs().max(bwd.abs());
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }
}

/// `L u` for a single linear member; boundary nodes carry zero.
pub fn eval_linear(spec: &LinearOperatorSpec, grid: &Grid, u: &GridFunction) -> Result<GridFunction> {
    let params = EllipticityParams {
        gamma: 1.0,
        big_gamma: 1.0,
        delta1: 0.0,
        delta0: 0.0,
    };
    BellmanOperator::linear(spec.clone(), params)?
        .bind_unchecked(grid)?
        .eval_member(0, u)
}

pub fn eval_bellman(
    op: &BellmanOperator,
    grid: &Grid,
    u: &GridFunction,
    tie_tol: f64,
) -> Result<(GridFunction, ControlField)> {
    op.bind(grid)?.eval(u, tie_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::mesh::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(Domain::unit_interval(), n).unwrap()
    }

    #[test]
    fn second_difference_of_sine() {
        let g = unit(401);
        let u = g.sample(|p| (PI * p[0]).sin());
        let lu = eval_linear(&LinearOperatorSpec::scaled_laplacian(1, 1.0), &g, &u).unwrap();
        for &node in g.interior() {
            let exact = PI * PI * (PI * g.point(node)[0]).sin();
            assert!((lu[node] - exact).abs() < 1e-3);
        }
        for &node in g.boundary() {
            assert_eq!(lu[node], 0.0);
        }
    }

    #[test]
    fn affine_and_zeroth_order_exact() {
        let g = unit(21);
        let spec = LinearOperatorSpec::scaled_laplacian(1, 1.0).with_drift(vec![Expr::constant(1.0)]);
        let u = g.sample(|p| p[0]);
        let lu = eval_linear(&spec, &g, &u).unwrap();
        for &node in g.interior() {
            assert!((lu[node] - 1.0).abs() < 1e-12);
        }
        let spec = LinearOperatorSpec::scaled_laplacian(1, 1.0).with_zeroth(Expr::constant(5.0));
        let lu = eval_linear(&spec, &g, &g.sample(|_| 1.0)).unwrap();
        for &node in g.interior() {
            assert!((lu[node] - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn min_laplacians_selects_laplacian_on_concave_input() {
        let g = unit(401);
        let op = min_laplacians(1);
        let u = g.sample(|p| (PI * p[0]).sin());
        let (v, ctrl) = eval_bellman(&op, &g, &u, DEFAULT_TIE_TOL).unwrap();
        for &node in g.interior() {
            assert!((v[node] - PI * PI * (PI * g.point(node)[0]).sin()).abs() < 1e-3);
        }
        assert!(ctrl.selection.iter().all(|&s| s == 0));
        assert_eq!(ctrl.tied_count(), 0);

        let (z, ctrl) = eval_bellman(&op, &g, &g.zeros(), DEFAULT_TIE_TOL).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        assert_eq!(ctrl.tied_count(), g.interior().len());
    }

    #[test]
    fn dual_semantics() {
        let g = unit(401);
        let op = min_laplacians(1);
        let dual = op.dual();
        let u = g.sample(|p| (PI * p[0]).sin());
        let v = dual.bind(&g).unwrap().apply(&u).unwrap();
        for &node in g.interior() {
            assert!((v[node] - 2.0 * PI * PI * (PI * g.point(node)[0]).sin()).abs() < 1e-3);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = unit(41);
        let b = op.bind(&g).unwrap();
        let bd = b.dual();
        let bdd = op.dual().dual().bind(&g).unwrap();
        for _ in 0..100 {
            let u = g.sample(|_| rng.gen_range(-1.0..1.0));
            let direct = b.apply(&u).unwrap();
            assert_eq!(bdd.apply(&u).unwrap(), direct);
            // dual(u) = -F(-u)
            let reflected = b.apply(&u.scaled(-1.0)).unwrap().scaled(-1.0);
            assert_eq!(bd.apply(&u).unwrap(), reflected);
        }

        let single = laplacian(1);
        let bs = single.bind(&g).unwrap();
        let bsd = single.dual().bind(&g).unwrap();
        let u = g.sample(|p| p[0] * p[0] - p[0].sin());
        assert_eq!(bs.apply(&u).unwrap(), bsd.apply(&u).unwrap());
    }

    #[test]
    fn pucci_minus_branches() {
        let g = unit(401);
        let params = EllipticityParams::new(1.0, 2.0, 0.0, 0.0).unwrap();
        let op = pucci_minus(params, 1);
        let b = op.bind(&g).unwrap();
        let s = g.sample(|p| (PI * p[0]).sin());
        let v = b.apply(&s).unwrap();
        let w = b.apply(&s.scaled(-1.0)).unwrap();
        for &node in g.interior() {
            let sx = (PI * g.point(node)[0]).sin();
            assert!((v[node] - PI * PI * sx).abs() < 1e-3);
            assert!((w[node] + 2.0 * PI * PI * sx).abs() < 2e-3);
        }

        let rect = Grid::new(
            Domain::Rectangle {
                ax: 0.0,
                bx: 1.0,
                ay: 0.0,
                by: 1.0,
            },
            21,
        )
        .unwrap();
        let op2 = pucci_minus(params, 2);
        let u = rect.sample(|p| p[0] * (1.0 - p[0]) + p[1] * (1.0 - p[1]));
        let v = op2.bind(&rect).unwrap().apply(&u).unwrap();
        for &node in rect.interior() {
            assert!((v[node] - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tangential_drift_radial_input_ties_drift_members() {
        let grid = Grid::new(Domain::unit_disk(), 101).unwrap();
        let op = tangential_drift();
        let b = op.bind(&grid).unwrap();
        // Radial test function: J0-like profile cos(pi r / 2) (smooth at r = 0).
        let u = grid.sample_interior(|p| (0.5 * PI * p[0].hypot(p[1])).cos());
        let plain = b.eval_member(0, &u).unwrap();
        let drift = b.eval_member(2, &u).unwrap();
        // Upwinding leaves an O(h) residue of b . Du on a radial function.
        let gap = plain.axpy(-1.0, &drift).sup_norm();
        let scale = plain.sup_norm();
        assert!(gap <= 2.0 * grid.h() * scale, "gap {gap} scale {scale}");
        let (_, ctrl) = b.eval(&u, 2.0 * grid.h()).unwrap();
        assert_eq!(ctrl.tied_count(), grid.interior().len());
    }

    #[test]
    fn inf_is_below_every_member() {
        let g = unit(51);
        let op = BellmanOperator::new(
            vec![
                LinearOperatorSpec::scaled_laplacian(1, 1.0),
                LinearOperatorSpec::scaled_laplacian(1, 3.0).with_drift(vec![parse_expr("0.5*x").unwrap()]),
                LinearOperatorSpec::scaled_laplacian(1, 2.0).with_zeroth(parse_expr("-1").unwrap()),
            ],
            EllipticityParams::new(1.0, 3.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let b = op.bind(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = g.sample(|_| rng.gen_range(-1.0..1.0));
            let f = b.apply(&u).unwrap();
            for m in 0..3 {
                let lm = b.eval_member(m, &u).unwrap();
                for &node in g.interior() {
                    assert!(f[node] <= lm[node]);
                }
            }
        }
    }

    #[test]
    fn member_matrices_are_z_matrices_with_row_sum_c() {
        let grid = Grid::new(Domain::unit_disk(), 41).unwrap();
        let b = tangential_drift().bind(&grid).unwrap();
        for m in 0..b.family_len() {
            for k in 0..grid.interior().len() {
                let st = b.stencil(m, k);
                assert!(st[1..].iter().all(|&(_, w)| w <= 0.0));
                let sum: f64 = st.iter().map(|&(_, w)| w).sum();
                let c = if m % 2 == 0 { -1.0 } else { 1.0 };
                assert!((sum - c).abs() < 1e-9 * (1.0 + st[0].1.abs()));
            }
            assert!(b.member_matrix(m).max_offdiag() <= 0.0);
        }
    }

    #[test]
    fn bind_rejects_bad_operators() {
        let g = unit(11);
        let p = EllipticityParams::new(1.0, 2.0, 0.5, 0.0).unwrap();
        let too_fast = BellmanOperator::linear(
            LinearOperatorSpec::scaled_laplacian(1, 1.0).with_drift(vec![Expr::constant(2.0)]),
            p,
        )
        .unwrap();
        assert!(matches!(too_fast.bind(&g), Err(Error::CoefficientBound { .. })));
        assert!(too_fast.bind_unchecked(&g).is_ok());

        let weak = BellmanOperator::linear(LinearOperatorSpec::scaled_laplacian(1, 0.5), p).unwrap();
        assert!(matches!(weak.bind(&g), Err(Error::CoefficientBound { .. })));

        // h * delta1 = 0.1 * 30 > 2 * gamma
        let p = EllipticityParams::new(1.0, 2.0, 30.0, 0.0).unwrap();
        let cfl = BellmanOperator::linear(LinearOperatorSpec::scaled_laplacian(1, 1.0), p).unwrap();
        assert!(matches!(cfl.bind(&g), Err(Error::Cfl { .. })));

        assert!(EllipticityParams::new(2.0, 1.0, 0.0, 0.0).is_err());
        assert!(BellmanOperator::new(vec![], p).is_err());
        let wrong_dim = laplacian(2);
        assert!(wrong_dim.bind(&g).is_err());
        let singular = BellmanOperator::linear(
            LinearOperatorSpec::scaled_laplacian(1, 1.0).with_zeroth(parse_expr("1/(x-0.5)").unwrap()),
            EllipticityParams::new(1.0, 1.0, 0.0, 1e9).unwrap(),
        )
        .unwrap();
        assert!(singular.bind(&g).is_err());
    }
}
