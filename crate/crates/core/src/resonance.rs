//! The Dirichlet problem at the principal half-eigenvalue: classification by
//! the solvability functional, continuation from below, and the threshold
//! `t*(h)` for forcings `h - t phi1`.

use rayon::prelude::*;

use crate::adjoint::{solvability_functional, MeasureSet};
use crate::dirichlet::{residual_norm, solve_bound, SolveOptions, SolveStatus};
use crate::eigen::{Branch, EigenResult};
use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::operator::{BoundOperator, ControlField, Mode};
use crate::sparse::{BandedLu, CsrMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceOptions {
    /// `|T(f)| <= class_tol * (1 + ||f||_inf)` is borderline.
    pub class_tol: f64,
    /// Below this half-eigenvalue gap the sufficiency branch is not applied.
    pub gap_tol: f64,
    /// Dyadic continuation steps.
    pub steps: usize,
    /// Extra dyadic steps tried in borderline cases before giving up.
    pub extra_steps: usize,
    /// Cauchy test `||u_last - u_prev||_inf <= cont_tol * (1 + ||u_last||_inf)`.
    pub cont_tol: f64,
    /// A solution is reported when its residual is at most
    /// `res_tol * (1 + ||f||_inf)`.
    pub res_tol: f64,
    /// Bisection and `T(h)` must agree to this.
    pub bisect_tol: f64,
    pub bisect_iters: usize,
    pub solve: SolveOptions,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions {
            class_tol: 1e-4,
            gap_tol: 1e-3,
            steps: 12,
            extra_steps: 36,
            cont_tol: 1e-2,
            res_tol: 1e-6,
            bisect_tol: 3e-2,
            bisect_iters: 10,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    SolvableStrict,
    Unsolvable,
    Borderline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationOutcome {
    /// A residual-certified solution at the eigenvalue was found, or
    /// successive solutions form a Cauchy sequence.
    Converged,
    /// Norms keep growing but stayed below the blow-up threshold.
    Growing,
    /// A solve below the eigenvalue blew up or met a singular system, or the
    /// problem at the eigenvalue has no solution (norms grow without bound).
    BlewUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationStep {
    pub lambda: f64,
    /// `||u_lambda||_inf`, infinite when the solve failed.
    pub sup_norm: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct Continuation {
    pub log: Vec<ContinuationStep>,
    pub outcome: ContinuationOutcome,
    /// Richardson extrapolation `2 u_last - u_prev` when the norms settled.
    pub extrapolated: Option<GridFunction>,
    /// Policy iteration at the eigenvalue, from the last control.
    pub endpoint: Option<ResonantSolve>,
}

#[derive(Debug, Clone)]
pub struct ResonanceVerdict {
    pub classification: Classification,
    pub t_value: f64,
    /// The absolute band used for the classification.
    pub class_tol: f64,
    /// False when the half-eigenvalue gap is below `gap_tol`; then only
    /// `t_value` is meaningful.
    pub sufficiency_applies: bool,
    pub lambda: f64,
    pub solution: Option<GridFunction>,
    pub residual: Option<f64>,
    pub continuation: Option<Continuation>,
}

impl ResonanceVerdict {
    pub fn continuation_log(&self) -> &[ContinuationStep] {
        self.continuation.as_ref().map_or(&[], |c| &c.log)
    }
}

fn check_plus(eig: &EigenResult) -> Result<()> {
    if eig.branch != Branch::Plus {
        return Err(Error::InvalidArgument("resonance needs the positive eigenpair".into()));
    }
    Ok(())
}

/// Solves at `lambda1 - 2^-j delta0` for `j = 0, 1, ..`, watching the norms,
/// then finishes with [`resonant_howard`] at `lambda1` from the last control.
///
/// `extra_steps` more points are tried while the first `steps` neither
/// converge nor blow up. Steps stop once the gap is too small to shift the
/// matrix diagonal in floating point.
pub fn continuation(
    op: &BoundOperator<'_>,
    f: &GridFunction,
    lambda1: f64,
    delta0: f64,
    opts: &ResonanceOptions,
    extra_steps: usize,
) -> Result<Continuation> {
    if !(delta0 > 0.0) || opts.steps < 2 {
        return Err(Error::InvalidArgument("continuation needs delta0 > 0 and at least two steps".into()));
    }
    let a_norm = (0..op.family_len())
        .map(|m| op.member_matrix(m).inf_norm())
        .fold(0.0, f64::max);
    let floor = (32.0 * f64::EPSILON * a_norm).max(1e-13 * (1.0 + lambda1.abs()));
    let mut log = Vec::new();
    let mut control: Option<ControlField> = None;
    let mut iterates: (Option<GridFunction>, Option<GridFunction>) = (None, None);
    let mut cauchy = false;
    for j in 0..opts.steps + extra_steps {
        let gap = delta0 * 0.5f64.powi(j as i32);
        if gap < floor {
            break;
        }
        let lambda = lambda1 - gap;
        let r = solve_bound(op, lambda, f, &opts.solve, control.as_ref())?;
        match r.status {
            SolveStatus::Converged => {}
            SolveStatus::Blowup | SolveStatus::Singular => {
                log.push(ContinuationStep {
                    lambda,
                    sup_norm: if r.status == SolveStatus::Blowup { r.u.sup_norm() } else { f64::INFINITY },
                    status: r.status,
                });
                return Ok(Continuation {
                    log,
                    outcome: ContinuationOutcome::BlewUp,
                    extrapolated: None,
                    endpoint: None,
                });
            }
            SolveStatus::MaxIters => {
                return Err(Error::Solver {
                    context: "continuation",
                    message: format!("Dirichlet solve at lambda = {lambda} ended with {:?}", r.status),
                })
            }
        }
        let norm = r.u.sup_norm();
        log.push(ContinuationStep {
            lambda,
            sup_norm: norm,
            status: r.status,
        });
        control = r.control;
        iterates = (iterates.1.take(), Some(r.u));
        if j + 1 >= opts.steps {
            if let (Some(prev), Some(last)) = (&iterates.0, &iterates.1) {
                if last.axpy(-1.0, prev).sup_norm() <= opts.cont_tol * (1.0 + norm) {
                    cauchy = true;
                    break;
                }
            }
        }
    }
    let extrapolated = match (&iterates, cauchy) {
        ((Some(prev), Some(last)), true) => Some(last.scaled(2.0).axpy(-1.0, prev)),
        _ => None,
    };
    let endpoint = match &control {
        Some(c) => Some(resonant_howard(op, f, lambda1, c, opts)?),
        None => None,
    };
    let certified = |e: &ResonantSolve| {
        e.status == ResonantStatus::Solved && e.residual <= opts.res_tol * (1.0 + f.sup_norm())
    };
    let outcome = match &endpoint {
        Some(e) if matches!(e.status, ResonantStatus::Inconsistent | ResonantStatus::Blowup) => {
            ContinuationOutcome::BlewUp
        }
        Some(e) if certified(e) => ContinuationOutcome::Converged,
        _ if cauchy => ContinuationOutcome::Converged,
        _ => ContinuationOutcome::Growing,
    };
    Ok(Continuation {
        log,
        outcome,
        extrapolated,
        endpoint,
    })
}

/// Outcome of policy iteration carried out at the eigenvalue itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonantStatus {
    Solved,
    /// A frozen system on the way is singular and `f` is not in its range:
    /// no solution with that selection, and norms below the eigenvalue grow
    /// without bound.
    Inconsistent,
    /// A nonsingular frozen solve exceeded the blow-up threshold.
    Blowup,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct ResonantSolve {
    pub status: ResonantStatus,
    pub u: Option<GridFunction>,
    pub residual: f64,
    /// `psi . f / psi . v` for the last singular frozen system met, where
    /// `v`, `psi` are its right and left principal eigenvectors.
    pub range_defect: Option<f64>,
    pub iterations: usize,
}

const DEFLATION_GAP: f64 = 0.1;
const DEFLATION_MAX_ITERS: usize = 500;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Principal eigenvector of the matrix factored in `lu` (shifted by
/// `-sigma`), by inverse iteration.
fn perron_vector(lu: &BandedLu, n: usize) -> Vec<f64> {
    let mut v = vec![1.0; n];
    for _ in 0..DEFLATION_MAX_ITERS {
        let next = lu.solve(&v);
        let norm = sup(&next);
        let next: Vec<f64> = next.iter().map(|x| x / norm).collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= 1e-14 {
            break;
        }
    }
    v
}

/// Solves the singular frozen system `(A - lambda1) u = f` on the range
/// complement of its principal eigenvector `v`. Returns the particular
/// solution with `psi . u = 0`, `v`, and the range defect `psi . f / psi . v`.
fn deflated_solve(matrix: &CsrMatrix, lambda1: f64, rhs: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let sigma = lambda1 - DEFLATION_GAP;
    let lu = BandedLu::factor(&matrix.shifted(sigma)).ok()?;
    let lu_t = BandedLu::factor(&matrix.transpose().shifted(sigma)).ok()?;
    let n = matrix.dim();
    let v = perron_vector(&lu, n);
    let psi = perron_vector(&lu_t, n);
    let pv = dot(&psi, &v);
    let defect = dot(&psi, rhs) / pv;
    let g: Vec<f64> = rhs.iter().zip(&v).map(|(a, b)| a - defect * b).collect();
    let mut u = vec![0.0; n];
    for _ in 0..DEFLATION_MAX_ITERS {
        let b: Vec<f64> = g.iter().zip(&u).map(|(a, x)| a + DEFLATION_GAP * x).collect();
        let mut next = lu.solve(&b);
        let c = dot(&psi, &next) / pv;
        for (x, vi) in next.iter_mut().zip(&v) {
            *x -= c * vi;
        }
        let change = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = sup(&next).max(f64::MIN_POSITIVE);
        u = next;
        if change <= 1e-15 * scale {
            break;
        }
    }
    Some((u, v, defect))
}

/// Smallest multiple `k` of `v` for which `selection` is still the optimal
/// member of `u_p + k v` at every node where that can be arranged.
fn kernel_multiple(op: &BoundOperator<'_>, selection: &[usize], u_p: &GridFunction, v: &GridFunction) -> Result<f64> {
    let sign = match op.mode() {
        Mode::Inf => 1.0,
        Mode::Sup => -1.0,
    };
    let members_p: Vec<GridFunction> = (0..op.family_len()).map(|m| op.eval_member(m, u_p)).collect::<Result<_>>()?;
    let members_v: Vec<GridFunction> = (0..op.family_len()).map(|m| op.eval_member(m, v)).collect::<Result<_>>()?;
    let scale = 1.0 + members_v.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    let mut k = f64::NEG_INFINITY;
    for (i, &node) in op.grid().interior().iter().enumerate() {
        let s = selection[i];
        for m in 0..op.family_len() {
            let dv = sign * (members_v[m][node] - members_v[s][node]);
            let dp = sign * (members_p[m][node] - members_p[s][node]);
            if dv > 1e-12 * scale {
                k = k.max(-dp / dv);
            }
        }
    }
    Ok(if k.is_finite() { k } else { 0.0 })
}

/// Policy iteration at `lambda1` itself. Frozen systems that are singular
/// there are solved on their range, adding the smallest multiple of their
/// principal eigenvector that keeps the selection optimal.
pub fn resonant_howard(
    op: &BoundOperator<'_>,
    f: &GridFunction,
    lambda1: f64,
    initial: &ControlField,
    opts: &ResonanceOptions,
) -> Result<ResonantSolve> {
    let grid = op.grid();
    grid.check(f)?;
    let rhs = grid.to_interior(f);
    let defect_tol = opts.res_tol * (1.0 + f.sup_norm());
    let mut control = initial.clone();
    let mut range_defect = None;
    for iter in 1..=opts.solve.max_policy_iters {
        let a = op.frozen_matrix(&control.selection);
        let u = match BandedLu::factor(&a.shifted(lambda1)) {
            Ok(lu) => {
                let u = grid.from_interior(&lu.solve(&rhs));
                if !(u.sup_norm() <= opts.solve.blowup_threshold) {
                    return Ok(ResonantSolve {
                        status: ResonantStatus::Blowup,
                        u: None,
                        residual: f64::INFINITY,
                        range_defect,
                        iterations: iter,
                    });
                }
                u
            }
            Err(_) => {
                let Some((u_p, v, defect)) = deflated_solve(&a, lambda1, &rhs) else {
                    return Err(Error::Solver {
                        context: "resonant_howard",
                        message: "frozen matrix has no principal eigenvalue near lambda1".into(),
                    });
                };
                range_defect = Some(defect);
                if defect.abs() > defect_tol {
                    return Ok(ResonantSolve {
                        status: ResonantStatus::Inconsistent,
                        u: None,
                        residual: f64::INFINITY,
                        range_defect,
                        iterations: iter,
                    });
                }
                let u_p = grid.from_interior(&u_p);
                let v = grid.from_interior(&v);
                let k = kernel_multiple(op, &control.selection, &u_p, &v)?;
                u_p.axpy(k, &v)
            }
        };
        let (_, next) = op.eval_with_prior(&u, opts.solve.tie_tol, Some(&control))?;
        let changed = next.switches_from(&control);
        control = next;
        if changed == 0 {
            let residual = residual_norm(op, lambda1, &u, f)?;
            return Ok(ResonantSolve {
                status: ResonantStatus::Solved,
                u: Some(u),
                residual,
                range_defect,
                iterations: iter,
            });
        }
    }
    Ok(ResonantSolve {
        status: ResonantStatus::MaxIters,
        u: None,
        residual: f64::INFINITY,
        range_defect,
        iterations: opts.solve.max_policy_iters,
    })
}

/// Continuation step base `min(1, (lambda_minus - lambda_plus) / 2)`.
pub fn continuation_delta(lambda_plus: f64, lambda_minus: f64) -> f64 {
    1f64.min(0.5 * (lambda_minus - lambda_plus)).max(0.0)
}

/// Classifies `F(u) = lambda1 u + f` by the sign of `T(f)` and attempts to
/// solve it by continuation from below.
pub fn solve_at_resonance(
    op: &BoundOperator<'_>,
    f: &GridFunction,
    plus: &EigenResult,
    lambda_minus: f64,
    ms: &MeasureSet,
    opts: &ResonanceOptions,
) -> Result<ResonanceVerdict> {
    check_plus(plus)?;
    let grid = op.grid();
    grid.check(f)?;
    let lambda1 = plus.lambda;
    let t_value = solvability_functional(grid, f, ms)?;
    let f_norm = f.sup_norm();
    let class_tol = opts.class_tol * (1.0 + f_norm);
    let classification = if t_value < -class_tol {
        Classification::SolvableStrict
    } else if t_value > class_tol {
        Classification::Unsolvable
    } else {
        Classification::Borderline
    };
    let sufficiency_applies = lambda_minus - lambda1 > opts.gap_tol;
    let mut verdict = ResonanceVerdict {
        classification,
        t_value,
        class_tol,
        sufficiency_applies,
        lambda: lambda1,
        solution: None,
        residual: None,
        continuation: None,
    };
    if !sufficiency_applies {
        return Ok(verdict);
    }
    let delta0 = continuation_delta(lambda1, lambda_minus);
    let extra = if classification == Classification::Borderline {
        opts.extra_steps
    } else {
        0
    };
    let cont = continuation(op, f, lambda1, delta0, opts, extra)?;
    if classification != Classification::Unsolvable {
        let endpoint = cont.endpoint.as_ref().and_then(|e| e.u.as_ref());
        let mut best: Option<(GridFunction, f64)> = None;
        for u in endpoint.into_iter().chain(cont.extrapolated.as_ref()) {
            let res = residual_norm(op, lambda1, u, f)?;
            if best.as_ref().is_none_or(|(_, r)| res < *r) {
                best = Some((u.clone(), res));
            }
        }
        if let Some((u, res)) = best {
            if res <= opts.res_tol * (1.0 + f_norm) {
                verdict.solution = Some(u);
                verdict.residual = Some(res);
            }
        }
    }
    verdict.continuation = Some(cont);
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TStarProbe {
    pub t: f64,
    pub outcome: ContinuationOutcome,
}

impl TStarProbe {
    pub fn solvable(&self) -> bool {
        self.outcome == ContinuationOutcome::Converged
    }
}

#[derive(Debug, Clone)]
pub struct TStarReport {
    /// `T(h)` from the measure set.
    pub functional: f64,
    /// Boundary between diverging and converging continuation in `t`.
    pub bisection: f64,
    /// Final bracket width of the bisection.
    pub bracket: f64,
    pub agrees: bool,
    pub bisect_tol: f64,
    pub probes: Vec<TStarProbe>,
    /// Continuation outcomes on `t* + {-0.3, .., 0.3}`.
    pub grid: Vec<TStarProbe>,
    /// No solvable point lies left of an unsolvable one on `grid`.
    pub monotone: bool,
}

/// Offsets of the monotonicity grid around `t*`.
pub const T_GRID_OFFSETS: [f64; 7] = [-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3];

/// Threshold `t*(h) = T(h)` for `f_t = h - t phi1`, cross-checked by
/// bisecting on continuation boundedness over `[T(h) - 1, T(h) + 1]`.
pub fn t_star(
    op: &BoundOperator<'_>,
    h: &GridFunction,
    plus: &EigenResult,
    lambda_minus: f64,
    ms: &MeasureSet,
    opts: &ResonanceOptions,
) -> Result<TStarReport> {
    check_plus(plus)?;
    let grid = op.grid();
    grid.check(h)?;
    let functional = solvability_functional(grid, h, ms)?;
    let delta0 = continuation_delta(plus.lambda, lambda_minus);
    if delta0 <= 0.5 * opts.gap_tol {
        return Err(Error::InvalidArgument(format!(
            "half-eigenvalue gap {} too small for continuation",
            lambda_minus - plus.lambda
        )));
    }
    let probe = |t: f64| -> Result<TStarProbe> {
        let f = h.axpy(-t, &plus.phi);
        let c = continuation(op, &f, plus.lambda, delta0, opts, 0)?;
        Ok(TStarProbe { t, outcome: c.outcome })
    };

    let mut probes = Vec::new();
    let (mut lo, mut hi) = (functional - 1.0, functional + 1.0);
    let ends = [probe(lo)?, probe(hi)?];
    let bracketed = !ends[0].solvable() && ends[1].solvable();
    probes.extend(ends);
    if bracketed {
        for _ in 0..opts.bisect_iters {
            let mid = 0.5 * (lo + hi);
            let p = probe(mid)?;
            if p.solvable() {
                hi = mid;
            } else {
                lo = mid;
            }
            probes.push(p);
        }
    }
    let bisection = if bracketed { 0.5 * (lo + hi) } else { f64::NAN };

    let t_grid: Vec<TStarProbe> = T_GRID_OFFSETS
        .par_iter()
        .map(|d| probe(functional + d))
        .collect::<Result<_>>()?;
    let monotone = t_grid.windows(2).all(|w| w[1].solvable() || !w[0].solvable());
    Ok(TStarReport {
        functional,
        agrees: bracketed && (bisection - functional).abs() <= opts.bisect_tol,
        bisection,
        bracket: hi - lo,
        bisect_tol: opts.bisect_tol,
        probes,
        grid: t_grid,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{measure_set, MeasureOptions};
    use crate::eigen::{half_eigen_minus_bound, half_eigen_plus_bound, EigenOptions};
    use crate::mesh::{Domain, Grid};
    use crate::operator::min_laplacians;
    use std::f64::consts::PI;

    struct Setup {
        grid: Grid,
    }

    fn run(
        setup: &Setup,
        f: impl Fn(f64) -> f64,
    ) -> (ResonanceVerdict, EigenResult) {
        let g = &setup.grid;
        let op = min_laplacians(1);
        let b = op.bind(g).unwrap();
        let plus = half_eigen_plus_bound(&b, &EigenOptions::default()).unwrap();
        let minus = half_eigen_minus_bound(&b, &EigenOptions::default()).unwrap();
        let ms = measure_set(&b, &plus, &[], &MeasureOptions::default()).unwrap();
        let f = g.sample(|p| f(p[0]));
        let v = solve_at_resonance(&b, &f, &plus, minus.lambda, &ms, &ResonanceOptions::default()).unwrap();
        (v, plus)
    }

    fn setup() -> Setup {
        Setup {
            grid: Grid::new(Domain::unit_interval(), 401).unwrap(),
        }
    }

    #[test]
    fn strictly_solvable_forcing() {
        let s = setup();
        let (v, plus) = run(&s, |x| -(PI * x).sin());
        assert_eq!(v.classification, Classification::SolvableStrict);
        assert!((v.t_value + 1.0).abs() < 1e-3);
        let u = v.solution.as_ref().expect("solution");
        assert!(v.residual.unwrap() <= 1e-6);
        // u = -phi / lambda on the grid.
        for n in 0..s.grid.len() {
            assert!((u[n] + plus.phi[n] / plus.lambda).abs() < 1e-8);
        }
        let log = v.continuation_log();
        assert_eq!(log.len(), 12);
        assert!(log.iter().all(|st| st.sup_norm < 1.0));
    }

    #[test]
    fn unsolvable_forcing_diverges() {
        let s = setup();
        let (v, plus) = run(&s, |x| (PI * x).sin());
        assert_eq!(v.classification, Classification::Unsolvable);
        assert!(v.solution.is_none());
        let log = v.continuation_log();
        assert!(log.windows(2).all(|w| w[1].sup_norm > 1.9 * w[0].sup_norm));
        let last = log.last().unwrap();
        let rate = (plus.lambda - last.lambda) * last.sup_norm;
        assert!((rate - 1.0).abs() < 0.05, "{rate}");
    }

    #[test]
    fn borderline_with_vanishing_boundary_values() {
        let s = setup();
        let (v, _) = run(&s, |x| (2.0 * PI * x).sin());
        assert_eq!(v.classification, Classification::Borderline);
        assert_eq!(v.continuation.as_ref().unwrap().outcome, ContinuationOutcome::Converged);
        assert!(v.residual.unwrap() <= 1e-6, "{:?}", v.residual);
    }

    #[test]
    fn t_star_for_two_mode_forcing() {
        let g = Grid::new(Domain::unit_interval(), 201).unwrap();
        let op = min_laplacians(1);
        let b = op.bind(&g).unwrap();
        let plus = half_eigen_plus_bound(&b, &EigenOptions::default()).unwrap();
        let minus = half_eigen_minus_bound(&b, &EigenOptions::default()).unwrap();
        let ms = measure_set(&b, &plus, &[], &MeasureOptions::default()).unwrap();
        let h = g.sample(|p| (PI * p[0]).sin() + (2.0 * PI * p[0]).sin());
        let r = t_star(&b, &h, &plus, minus.lambda, &ms, &ResonanceOptions::default()).unwrap();
        assert!((r.functional - 1.0).abs() < 1e-2);
        assert!(r.agrees, "{r:?}");
        assert!(r.monotone);
        assert!(!r.grid[0].solvable() && r.grid[6].solvable());

        let zero = t_star(&b, &g.zeros(), &plus, minus.lambda, &ms, &ResonanceOptions::default()).unwrap();
        assert!(zero.functional.abs() < 1e-14);
        assert!(zero.grid[4..].iter().all(|p| p.solvable()));
    }

    #[test]
    fn boundary_sign_borderline_diverges() {
        let s = setup();
        let (v, _) = run(&s, |x| -1.0 + 4.0 / PI * (PI * x).sin());
        assert_eq!(v.classification, Classification::Borderline);
        assert!(v.solution.is_none());
        let c = v.continuation.as_ref().unwrap();
        assert_eq!(c.outcome, ContinuationOutcome::BlewUp);
        let e = c.endpoint.as_ref().unwrap();
        assert_eq!(e.status, ResonantStatus::Inconsistent);
        // The range defect is the discrete solvability functional.
        assert!((e.range_defect.unwrap() - v.t_value).abs() < 1e-9);
    }

    #[test]
    fn resonant_howard_on_linear_operator_is_fredholm() {
        let g = Grid::new(Domain::unit_interval(), 101).unwrap();
        let b = crate::operator::laplacian(1).bind(&g).unwrap();
        let plus = half_eigen_plus_bound(&b, &EigenOptions::default()).unwrap();
        let c = ControlField::constant(&g, 0);
        let opts = ResonanceOptions::default();
        let orthogonal = g.sample(|p| (2.0 * PI * p[0]).sin());
        let r = resonant_howard(&b, &orthogonal, plus.lambda, &c, &opts).unwrap();
        assert_eq!(r.status, ResonantStatus::Solved);
        assert!(r.residual < 1e-9);
        let r = resonant_howard(&b, &plus.phi, plus.lambda, &c, &opts).unwrap();
        assert_eq!(r.status, ResonantStatus::Inconsistent);
        assert!((r.range_defect.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn resonant_solutions_differ_by_eigenfunction_multiple() {
        let g = Grid::new(Domain::unit_interval(), 201).unwrap();
        let b = min_laplacians(1).bind(&g).unwrap();
        let plus = half_eigen_plus_bound(&b, &EigenOptions::default()).unwrap();
        let f = g.sample(|p| (2.0 * PI * p[0]).sin());
        let opts = ResonanceOptions::default();
        let u1 = continuation(&b, &f, plus.lambda, 1.0, &opts, 0).unwrap();
        let u2 = continuation(&b, &f, plus.lambda, 0.3, &opts, 0).unwrap();
        let u1 = u1.endpoint.unwrap().u.unwrap();
        let u2 = u2.endpoint.unwrap().u.unwrap();
        let d = u1.axpy(-1.0, &u2);
        let k = g.integrate(&d.zip_with(&plus.phi, |a, b| a * b)).unwrap()
            / g.integrate(&plus.phi.zip_with(&plus.phi, |a, b| a * b)).unwrap();
        assert!(d.axpy(-k, &plus.phi).sup_norm() <= 1e-6 * (1.0 + u1.sup_norm()));
        // The second solution is again a certified solution.
        let other = u1.axpy(1.0, &plus.phi);
        assert!(residual_norm(&b, plus.lambda, &other, &f).unwrap() < 1e-6);
    }
}
