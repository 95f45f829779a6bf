//! Principal half-eigenpairs by nonlinear inverse power iteration, and the
//! blow-up extrapolation that cross-checks them.

use rayon::prelude::*;

use crate::dirichlet::{solve_bound, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::mesh::{Grid, GridFunction};
use crate::operator::{BellmanOperator, BoundOperator, ControlField};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    pub max_iters: usize,
    /// Stop once successive eigenvalue estimates differ by at most
    /// `lambda_tol * (1 + |lambda|)` ...
    pub lambda_tol: f64,
    /// ... and successive normalized iterates by at most `phi_tol` (or have
    /// stopped improving).
    pub phi_tol: f64,
    /// Residual bound `||F(phi) - lambda phi||_inf <= residual_tol * (1 + |lambda|)`.
    pub residual_tol: f64,
    pub max_retries: usize,
    pub solve: SolveOptions,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            max_iters: 200,
            lambda_tol: 1e-9,
            phi_tol: 1e-12,
            residual_tol: 1e-8,
            max_retries: 5,
            solve: SolveOptions {
                residual_tol: 1e-9,
                ..SolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    InverseIteration,
    BlowupExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    /// Sup-normalized eigenfunction: positive in the interior for the plus
    /// branch, negative for the minus branch, zero on the boundary.
    pub phi: GridFunction,
    pub residual: f64,
    pub method: EigenMethod,
    pub branch: Branch,
    pub iters: usize,
    /// `(shift, estimate)` per outer iteration.
    pub log: Vec<(f64, f64)>,
}

impl EigenResult {
    /// `lambda_tol`-independent check of the eigenpair invariants.
    pub fn satisfies_invariants(&self, grid: &Grid, residual_tol: f64) -> bool {
        let sign = match self.branch {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        };
        grid.interior().iter().all(|&n| sign * self.phi[n] > 0.0)
            && grid.boundary().iter().all(|&n| self.phi[n] == 0.0)
            && self.residual <= residual_tol * (1.0 + self.lambda.abs())
    }
}

fn safety_margin(lambda: f64) -> f64 {
    0.1f64.max(0.05 * lambda.abs())
}

/// Inverse power iteration for the positive eigenpair of a bound operator.
pub fn half_eigen_plus_bound(op: &BoundOperator<'_>, opts: &EigenOptions) -> Result<EigenResult> {
    let grid = op.grid();
    let mut u = grid.sample_interior(|_| 1.0);
    let mut shift = -(op.params().delta0 + op.max_abs_zeroth()) - 1.0;
    let mut control: Option<ControlField> = None;
    let mut estimate = f64::NAN;
    let mut last_change = f64::INFINITY;
    let mut log = Vec::new();
    let mut retries = 0;

    for iter in 1..=opts.max_iters {
        let rhs = u.scaled(1.0 / u.sup_norm());
        let r = solve_bound(op, shift, &rhs, &opts.solve, control.as_ref())?;
        match r.status {
            SolveStatus::Converged => {}
            SolveStatus::Blowup | SolveStatus::Singular if retries < opts.max_retries => {
                retries += 1;
                let back = safety_margin(shift) * f64::from(1u32 << retries);
                shift -= back;
                control = None;
                continue;
            }
            status => {
                return Err(Error::Solver {
                    context: "principal_half_eigen",
                    message: format!(
                        "inner Dirichlet solve ended with {status:?} at shift {shift} (iteration {iter})"
                    ),
                })
            }
        }
        let norm = r.u.sup_norm();
        let next_estimate = shift + 1.0 / norm;
        let next = r.u.scaled(1.0 / norm);
        let phi_change = next.axpy(-1.0, &rhs).sup_norm();
        let lambda_change = (next_estimate - estimate).abs();
        log.push((shift, next_estimate));
        control = r.control;
        u = next;
        estimate = next_estimate;

        let lambda_done = lambda_change <= opts.lambda_tol * (1.0 + estimate.abs());
        let phi_done = phi_change <= opts.phi_tol || phi_change >= 0.5 * last_change;
        last_change = phi_change;
        if lambda_done && phi_done {
            let residual = eigen_residual(op, estimate, &u)?;
            if residual <= opts.residual_tol * (1.0 + estimate.abs()) {
                return Ok(EigenResult {
                    lambda: estimate,
                    phi: u,
                    residual,
                    method: EigenMethod::InverseIteration,
                    branch: Branch::Plus,
                    iters: iter,
                    log,
                });
            }
        }
        shift = estimate - safety_margin(estimate);
    }
    Err(Error::Solver {
        context: "principal_half_eigen",
        message: format!(
            "no convergence after {} iterations (last estimate {estimate})",
            opts.max_iters
        ),
    })
}

fn eigen_residual(op: &BoundOperator<'_>, lambda: f64, phi: &GridFunction) -> Result<f64> {
    crate::dirichlet::residual_norm(op, lambda, phi, &op.grid().zeros())
}

/// Negative eigenpair: the positive eigenpair of the dual, with `phi` negated.
pub fn half_eigen_minus_bound(op: &BoundOperator<'_>, opts: &EigenOptions) -> Result<EigenResult> {
    let mut r = half_eigen_plus_bound(&op.dual(), opts)?;
    r.phi = r.phi.scaled(-1.0);
    r.branch = Branch::Minus;
    Ok(r)
}

pub fn principal_half_eigen_plus(op: &BellmanOperator, grid: &Grid, opts: &EigenOptions) -> Result<EigenResult> {
    half_eigen_plus_bound(&op.bind(grid)?, opts)
}

pub fn principal_half_eigen_minus(op: &BellmanOperator, grid: &Grid, opts: &EigenOptions) -> Result<EigenResult> {
    half_eigen_minus_bound(&op.bind(grid)?, opts)
}

/// Both half-eigenpairs `(plus, minus)`.
pub fn principal_half_eigenpairs(
    op: &BellmanOperator,
    grid: &Grid,
    opts: &EigenOptions,
) -> Result<(EigenResult, EigenResult)> {
    let bound = op.bind(grid)?;
    Ok((half_eigen_plus_bound(&bound, opts)?, half_eigen_minus_bound(&bound, opts)?))
}

/// Least-squares line through `(lambda, 1/||u_lambda||_inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupFit {
    pub lambdas: Vec<f64>,
    pub inv_norms: Vec<f64>,
    /// Root of the fitted line.
    pub lambda1_est: f64,
    /// `-1 / slope`, the limit of `(lambda_1 - lambda) ||u_lambda||_inf`.
    pub k_est: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Control of the solution at a shift below every eigenvalue. Policy
/// iteration started from it stays on M-matrices further up, which the
/// lowest-index start does not guarantee in sup mode.
pub(crate) fn safe_control(op: &BoundOperator<'_>, f: &GridFunction) -> Result<Option<ControlField>> {
    let shift = -(op.params().delta0 + op.max_abs_zeroth()) - 1.0;
    Ok(solve_bound(op, shift, f, &SolveOptions::default(), None)?.control)
}

/// Points used by the extrapolation.
pub const BLOWUP_FIT_POINTS: usize = 4;

/// Solves along `schedule` (strictly increasing, below the eigenvalue) and
/// extrapolates `1/||u||` to zero with a line through the last four
/// converged points. A failed solve truncates the schedule.
pub fn blowup_estimate_bound(op: &BoundOperator<'_>, f: &GridFunction, schedule: &[f64]) -> Result<BlowupFit> {
    let grid = op.grid();
    grid.check(f)?;
    if f.min() < 0.0 || f.max() <= 0.0 {
        return Err(Error::InvalidArgument("blow-up extrapolation needs f >= 0, f != 0".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("schedule must be strictly increasing".into()));
    }
    let opts = SolveOptions::default();
    let seed = safe_control(op, f)?;
    let solves: Vec<_> = schedule
        .par_iter()
        .map(|&lambda| solve_bound(op, lambda, f, &opts, seed.as_ref()))
        .collect::<Result<_>>()?;
    let mut lambdas = Vec::new();
    let mut inv_norms = Vec::new();
    for (&lambda, r) in schedule.iter().zip(&solves) {
        if !r.converged() {
            break;
        }
        lambdas.push(lambda);
        inv_norms.push(1.0 / r.u.sup_norm());
    }
    if lambdas.len() < BLOWUP_FIT_POINTS {
        return Err(Error::Solver {
            context: "blowup_estimate",
            message: format!(
                "only {} converged schedule points, need {BLOWUP_FIT_POINTS}",
                lambdas.len()
            ),
        });
    }
    let tail = lambdas.len() - BLOWUP_FIT_POINTS;
    let (slope, intercept) = fit_line(&lambdas[tail..], &inv_norms[tail..]);
    Ok(BlowupFit {
        lambda1_est: -intercept / slope,
        k_est: -1.0 / slope,
        slope,
        intercept,
        lambdas,
        inv_norms,
    })
}

pub fn blowup_estimate(
    op: &BellmanOperator,
    grid: &Grid,
    f: &GridFunction,
    schedule: &[f64],
) -> Result<BlowupFit> {
    blowup_estimate_bound(&op.bind(grid)?, f, schedule)
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Eigenpair from blow-up extrapolation along `schedule` with forcing `f`:
/// the eigenvalue is the root of the fitted line and the eigenfunction the
/// normalized solution at the last schedule point. The minus branch
/// extrapolates the dual operator.
pub fn half_eigen_by_blowup(
    op: &BoundOperator<'_>,
    branch: Branch,
    f: &GridFunction,
    schedule: &[f64],
) -> Result<(EigenResult, BlowupFit)> {
    let target = match branch {
        Branch::Plus => op.clone(),
        Branch::Minus => op.dual(),
    };
    let fit = blowup_estimate_bound(&target, f, schedule)?;
    let last = *fit.lambdas.last().expect("fit has points");
    let seed = safe_control(&target, f)?;
    let r = solve_bound(&target, last, f, &SolveOptions::default(), seed.as_ref())?;
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let phi = r.u.scaled(sign / r.u.sup_norm());
    let residual = eigen_residual(op, fit.lambda1_est, &phi)?;
    Ok((
        EigenResult {
            lambda: fit.lambda1_est,
            phi,
            residual,
            method: EigenMethod::BlowupExtrapolation,
            branch,
            iters: fit.lambdas.len(),
            log: fit.lambdas.iter().zip(&fit.inv_norms).map(|(&l, &i)| (l, i)).collect(),
        },
        fit,
    ))
}

/// Dyadic schedule `center - offset * 2^-j`, `j = 0..count`, increasing.
pub fn dyadic_schedule(center: f64, offset: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| center - offset * 0.5f64.powi(j as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use crate::operator::{laplacian, min_laplacians, pucci_minus, EllipticityParams};
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(Domain::unit_interval(), n).unwrap()
    }

    #[test]
    fn laplacian_eigenpair() {
        let g = unit(401);
        let r = principal_half_eigen_plus(&laplacian(1), &g, &EigenOptions::default()).unwrap();
        assert!((r.lambda - PI * PI).abs() < 1e-3, "{}", r.lambda);
        assert!(r.satisfies_invariants(&g, 1e-8), "residual {}", r.residual);
        for node in 0..g.len() {
            assert!((r.phi[node] - (PI * g.point(node)[0]).sin()).abs() < 1e-3);
        }
        let m = principal_half_eigen_minus(&laplacian(1), &g, &EigenOptions::default()).unwrap();
        assert!((m.lambda - PI * PI).abs() < 1e-3);
        assert!(m.satisfies_invariants(&g, 1e-8));
    }

    #[test]
    fn min_laplacians_eigenpairs() {
        let g = unit(401);
        let (p, m) = principal_half_eigenpairs(&min_laplacians(1), &g, &EigenOptions::default()).unwrap();
        assert!((p.lambda - PI * PI).abs() < 1e-3);
        assert!((m.lambda - 2.0 * PI * PI).abs() < 2e-3);
        assert!(p.satisfies_invariants(&g, 1e-8));
        assert!(m.satisfies_invariants(&g, 1e-8));
    }

    #[test]
    fn pucci_minus_eigenpairs() {
        let g = unit(401);
        let op = pucci_minus(EllipticityParams::new(1.0, 2.0, 0.0, 0.0).unwrap(), 1);
        let (p, m) = principal_half_eigenpairs(&op, &g, &EigenOptions::default()).unwrap();
        assert!((p.lambda - PI * PI).abs() < 1e-3);
        assert!((m.lambda - 2.0 * PI * PI).abs() < 2e-3);
        for node in 0..g.len() {
            assert!((p.phi[node] - (PI * g.point(node)[0]).sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn blowup_fit_matches_inverse_iteration() {
        let g = unit(401);
        let op = min_laplacians(1);
        let f = g.sample(|p| (PI * p[0]).sin());
        let schedule: Vec<f64> = [1.0, 0.5, 0.25, 0.125, 0.0625].iter().map(|d| PI * PI - d).collect();
        let fit = blowup_estimate(&op, &g, &f, &schedule).unwrap();
        assert!((fit.lambda1_est - PI * PI).abs() < 5e-3);
        assert!((fit.k_est - 1.0).abs() < 0.02);
        assert!(fit.inv_norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn blowup_is_exactly_linear_for_eigenfunction_forcing() {
        let g = unit(201);
        let op = laplacian(1);
        let eig = principal_half_eigen_plus(&op, &g, &EigenOptions::default()).unwrap();
        let schedule = dyadic_schedule(eig.lambda, 1.0, 6);
        let fit = blowup_estimate(&op, &g, &eig.phi, &schedule).unwrap();
        for (l, inv) in fit.lambdas.iter().zip(&fit.inv_norms) {
            assert!((inv - (eig.lambda - l)).abs() < 1e-6);
        }
    }

    #[test]
    fn blowup_eigenpairs_for_both_branches() {
        let g = unit(401);
        let b = min_laplacians(1).bind(&g).unwrap();
        let f = g.sample(|p| (PI * p[0]).sin());
        let (p, _) = half_eigen_by_blowup(&b, Branch::Plus, &f, &dyadic_schedule(PI * PI, 1.0, 6)).unwrap();
        let (m, _) = half_eigen_by_blowup(&b, Branch::Minus, &f, &dyadic_schedule(2.0 * PI * PI, 1.0, 6)).unwrap();
        assert!((p.lambda - PI * PI).abs() < 1e-3);
        assert!((m.lambda - 2.0 * PI * PI).abs() < 2e-3);
        assert_eq!(p.method, EigenMethod::BlowupExtrapolation);
        assert!(p.phi.min() >= 0.0 && m.phi.max() <= 0.0);
        assert!(p.residual < 1e-6 && m.residual < 1e-6);
    }

    #[test]
    fn blowup_rejects_bad_input() {
        let g = unit(51);
        let op = laplacian(1);
        let f = g.sample(|p| p[0] - 0.5);
        assert!(blowup_estimate(&op, &g, &f, &[1.0, 2.0, 3.0, 4.0]).is_err());
        let f = g.sample(|_| 1.0);
        assert!(blowup_estimate(&op, &g, &f, &[1.0, 3.0, 2.0, 4.0]).is_err());
        // Schedule crossing the eigenvalue truncates below four points.
        assert!(blowup_estimate(&op, &g, &f, &[9.0, 9.5, 10.0, 11.0, 12.0]).is_err());
    }
}
