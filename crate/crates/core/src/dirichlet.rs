//! The discrete Dirichlet problem `F(u) = lambda u + f` in the interior,
//! `u = 0` on the boundary, solved by Howard policy iteration.
//!
//! Blow-up and singular frozen systems are reported through
//! [`SolveStatus`]; they signal `lambda` at or beyond the principal
//! half-eigenvalue and are meaningful output, not failures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{principal_half_eigen_plus, EigenOptions};
use crate::error::{Error, Result};
use crate::mesh::{Grid, GridFunction};
use crate::operator::{
    BellmanOperator, BoundOperator, ControlField, EllipticityParams, LinearOperatorSpec, DEFAULT_TIE_TOL,
};
use crate::sparse::{BandedLu, FactorError};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_policy_iters: usize,
    /// Relative residual target, scaled by `1 + ||f||_inf`.
    pub residual_tol: f64,
    pub blowup_threshold: f64,
    pub tie_tol: f64,
    /// Keep every policy-iteration iterate in [`SolveResult::iterates`].
    pub keep_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_policy_iters: 200,
            residual_tol: 1e-10,
            blowup_threshold: 1e8,
            tie_tol: DEFAULT_TIE_TOL,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Blowup,
    Singular,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Last iterate; a solution only when `status == Converged`.
    pub u: GridFunction,
    /// `||F(u) - lambda u - f||_inf` over interior nodes.
    pub residual: f64,
    /// Number of nodes whose member changed, per policy-iteration step.
    pub policy_switches: Vec<usize>,
    pub control: Option<ControlField>,
    pub iterates: Vec<GridFunction>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn iterations(&self) -> usize {
        self.policy_switches.len()
    }

    fn failed(grid: &Grid, status: SolveStatus, switches: Vec<usize>, iterates: Vec<GridFunction>) -> Self {
        SolveResult {
            status,
            u: grid.zeros(),
            residual: f64::INFINITY,
            policy_switches: switches,
            control: None,
            iterates,
        }
    }
}

/// `||F(u) - lambda u - f||_inf` over interior nodes.
pub fn residual_norm(op: &BoundOperator<'_>, lambda: f64, u: &GridFunction, f: &GridFunction) -> Result<f64> {
    let fu = op.apply(u)?;
    Ok(op
        .grid()
        .interior()
        .iter()
        .map(|&node| (fu[node] - lambda * u[node] - f[node]).abs())
        .fold(0.0, f64::max))
}

/// Accuracy limit of evaluating `A u` in floating point. Near resonance
/// `||u||` is large and this dominates `residual_tol * (1 + ||f||)`.
pub fn roundoff_floor(a_norm: f64, u_norm: f64) -> f64 {
    32.0 * f64::EPSILON * a_norm * u_norm
}

/// Howard iteration on a bound operator, optionally starting from `initial`.
///
/// Without `initial`, the starting policy is the selection at `u = 0`, where
/// every member ties and the lowest index wins.
pub fn solve_bound(
    op: &BoundOperator<'_>,
    lambda: f64,
    f: &GridFunction,
    opts: &SolveOptions,
    initial: Option<&ControlField>,
) -> Result<SolveResult> {
    let grid = op.grid();
    grid.check(f)?;
    if let Some(c) = initial {
        if c.grid_id() != grid.id() {
            return Err(Error::GridMismatch);
        }
    }
    let rhs = grid.to_interior(f);
    let f_norm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let target = opts.residual_tol * (1.0 + f_norm);

    let mut control = match initial {
        Some(c) => c.clone(),
        None => op.eval(&grid.zeros(), opts.tie_tol)?.1,
    };
    let mut switches = Vec::new();
    let mut iterates = Vec::new();
    for _ in 0..opts.max_policy_iters {
        let a = op.frozen_matrix(&control.selection).shifted(lambda);
        let a_norm = a.inf_norm();
        let lu = match BandedLu::factor(&a) {
            Ok(lu) => lu,
            Err(FactorError::NotMMatrix { .. }) => {
                return Ok(SolveResult::failed(grid, SolveStatus::Singular, switches, iterates));
            }
        };
        let u = grid.from_interior(&lu.solve(&rhs));
        if opts.keep_iterates {
            iterates.push(u.clone());
        }
        let norm = u.sup_norm();
        if !norm.is_finite() || norm > opts.blowup_threshold {
            return Ok(SolveResult {
                status: SolveStatus::Blowup,
                u,
                residual: f64::INFINITY,
                policy_switches: switches,
                control: Some(control),
                iterates,
            });
        }
        let (fu, next) = op.eval_with_prior(&u, opts.tie_tol, Some(&control))?;
        let residual = grid
            .interior()
            .iter()
            .map(|&node| (fu[node] - lambda * u[node] - f[node]).abs())
            .fold(0.0, f64::max);
        let changed = next.switches_from(&control);
        switches.push(changed);
        control = next;
        if changed == 0 {
            let status = if residual <= target + roundoff_floor(a_norm, norm) {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIters
            };
            return Ok(SolveResult {
                status,
                u,
                residual,
                policy_switches: switches,
                control: Some(control),
                iterates,
            });
        }
    }
    let u = iterates.last().cloned().unwrap_or_else(|| grid.zeros());
    Ok(SolveResult {
        status: SolveStatus::MaxIters,
        u,
        residual: f64::INFINITY,
        policy_switches: switches,
        control: Some(control),
        iterates,
    })
}

pub fn solve_bellman_dirichlet(
    op: &BellmanOperator,
    grid: &Grid,
    lambda: f64,
    f: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    solve_bound(&op.bind(grid)?, lambda, f, opts, None)
}

/// Direct solve of `(L - lambda) u = f` with zero boundary values.
pub fn solve_linear_dirichlet(
    spec: &LinearOperatorSpec,
    grid: &Grid,
    lambda: f64,
    f: &GridFunction,
) -> Result<SolveResult> {
    let params = EllipticityParams {
        gamma: 1.0,
        big_gamma: 1.0,
        delta1: 0.0,
        delta0: 0.0,
    };
    let op = BellmanOperator::linear(spec.clone(), params)?;
    let bound = op.bind_unchecked(grid)?;
    let opts = SolveOptions {
        max_policy_iters: 1,
        residual_tol: f64::INFINITY,
        blowup_threshold: f64::INFINITY,
        ..SolveOptions::default()
    };
    let mut r = solve_bound(&bound, lambda, f, &opts, None)?;
    if r.status == SolveStatus::Converged {
        r.residual = residual_norm(&bound, lambda, &r.u, f)?;
    }
    Ok(r)
}

/// The unique nonpositive solution, through the dual operator: `v = -u`
/// solves `dual(F)(v) = lambda v - f`.
pub fn solve_nonpositive_branch(
    op: &BoundOperator<'_>,
    lambda: f64,
    f: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let mut r = solve_bound(&op.dual(), lambda, &f.scaled(-1.0), opts, None)?;
    r.u = r.u.scaled(-1.0);
    for it in &mut r.iterates {
        *it = it.scaled(-1.0);
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct ComparisonWitness {
    /// Positive eigenfunction: a subsolution of `F - lambda = 0` with zero
    /// boundary values that is not `<= 0`.
    pub eigenfunction: GridFunction,
    /// `max_interior (F(phi) - lambda phi)`; nonpositive for a valid witness.
    pub max_defect: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub lambda: f64,
    pub lambda1_plus: f64,
    pub holds: bool,
    pub trials_run: usize,
    /// Largest `u_2 - u_1` over trials with `f_1 >= f_2` (positive = violation).
    pub worst_violation: f64,
    pub witness: Option<ComparisonWitness>,
}

/// Checks the discrete comparison principle at shift `lambda`: whenever
/// `f_1 >= f_2`, the solutions satisfy `u_1 >= u_2`. At or above the principal
/// half-eigenvalue the principal eigenfunction is returned as a witness of
/// failure instead.
pub fn verify_comparison(
    op: &BellmanOperator,
    grid: &Grid,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let bound = op.bind(grid)?;
    let eig = principal_half_eigen_plus(op, grid, &EigenOptions::default())?;
    if lambda >= eig.lambda {
        let fphi = bound.apply(&eig.phi)?;
        let max_defect = grid
            .interior()
            .iter()
            .map(|&node| fphi[node] - lambda * eig.phi[node])
            .fold(f64::NEG_INFINITY, f64::max);
        let witness_valid = max_defect <= 1e-8 * (1.0 + lambda.abs()) && eig.phi.max() > 0.0;
        return Ok(ComparisonReport {
            lambda,
            lambda1_plus: eig.lambda,
            holds: !witness_valid,
            trials_run: 0,
            worst_violation: eig.phi.max(),
            witness: Some(ComparisonWitness {
                eigenfunction: eig.phi,
                max_defect,
            }),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolveOptions::default();
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let f2 = crate::operator::random_function(grid, &mut rng, trial % 2 == 0);
        let f1 = f2.zip_with(&grid.sample(|_| rng.gen_range(0.0..1.0)), |a, g| a + g);
        let u1 = solve_bound(&bound, lambda, &f1, &opts, None)?;
        let u2 = solve_bound(&bound, lambda, &f2, &opts, None)?;
        if !u1.converged() || !u2.converged() {
            return Err(Error::Solver {
                context: "verify_comparison",
                message: format!("trial {trial}: solve ended with {:?}/{:?}", u1.status, u2.status),
            });
        }
        let scale = 1.0 + u1.u.sup_norm().max(u2.u.sup_norm());
        for node in 0..grid.len() {
            worst = worst.max((u2.u[node] - u1.u[node]) / scale);
        }
    }
    Ok(ComparisonReport {
        lambda,
        lambda1_plus: eig.lambda,
        holds: worst <= 1e-10,
        trials_run: trials,
        worst_violation: worst,
        witness: None,
    })
}

/// `sup u^+ / ((1 + 1/(lambda1_plus - lambda)) ||f^+||_{L^d})` with `d` the
/// spatial dimension and `u` the solution at shift `lambda`.
pub fn abp_ratio(
    op: &BellmanOperator,
    grid: &Grid,
    lambda: f64,
    f: &GridFunction,
    lambda1_plus: f64,
) -> Result<f64> {
    if lambda >= lambda1_plus {
        return Err(Error::InvalidArgument(format!(
            "abp_ratio needs lambda < lambda1_plus, got {lambda} >= {lambda1_plus}"
        )));
    }
    let r = solve_bellman_dirichlet(op, grid, lambda, f, &SolveOptions::default())?;
    if !r.converged() {
        return Err(Error::Solver {
            context: "abp_ratio",
            message: format!("Dirichlet solve ended with {:?}", r.status),
        });
    }
    let sup_pos = r.u.max().max(0.0);
    if sup_pos == 0.0 {
        return Ok(0.0);
    }
    let f_pos = f.map(|v| v.max(0.0));
    let norm = grid.lp_norm(&f_pos, grid.dim() as f64)?;
    if norm == 0.0 {
        return Err(Error::Solver {
            context: "abp_ratio",
            message: "positive solution with nonpositive forcing".into(),
        });
    }
    Ok(sup_pos / ((1.0 + 1.0 / (lambda1_plus - lambda)) * norm))
}
