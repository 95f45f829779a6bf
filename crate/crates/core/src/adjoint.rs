//! Linearization at the positive eigenfunction, adjoint eigenfunctions,
//! minimizing measures and the solvability functional.
//!
//! A measure is stored through its density `phi_star` against Lebesgue
//! measure; the probability measure itself is `phi1 * phi_star dx`, which on
//! the grid is the weight vector `w_i phi1_i phi_star_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen::{blowup_estimate_bound, BlowupFit, Branch, EigenResult};
use crate::error::{solver_error, Error, Result};
use crate::expr::Expr;
use crate::mesh::{Grid, GridFunction};
use crate::operator::{BoundOperator, ControlField, DEFAULT_TIE_TOL};
use crate::sparse::{BandedLu, CsrMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureOptions {
    /// Relative band for ties, as in [`BoundOperator::eval`].
    pub tie_tol: f64,
    /// Ties on nodes carrying less than this fraction of the interior
    /// quadrature mass still count as unique almost everywhere.
    pub tie_measure_tol: f64,
    /// A frozen selection is accepted when the principal eigenvalue of its
    /// matrix is within `identity_tol * (1 + |lambda|)` of `lambda`.
    pub identity_tol: f64,
    /// Measures closer than this in L1 are merged.
    pub dedup_tol: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            tie_tol: DEFAULT_TIE_TOL,
            tie_measure_tol: 1e-9,
            identity_tol: 1e-7,
            dedup_tol: 1e-6,
        }
    }
}

impl MeasureOptions {
    /// Tolerances for operators whose members tie only up to discretization
    /// error (for instance a drift that is tangential to the level sets of a
    /// radial eigenfunction): ties and eigen-identities are judged at `2h`.
    pub fn grid_scaled(grid: &Grid) -> Self {
        let h = grid.h();
        MeasureOptions {
            tie_tol: 2.0 * h,
            identity_tol: 2.0 * h,
            ..MeasureOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrozenLinearization {
    pub matrix: CsrMatrix,
    pub control: ControlField,
    pub unique_almost_everywhere: bool,
    /// Fraction of interior quadrature mass on tied nodes.
    pub tie_fraction: f64,
    /// `max |(A phi1)_i - lambda phi1_i|` over non-tied interior nodes.
    pub identity_residual: f64,
}

fn interior_mass(grid: &Grid) -> f64 {
    grid.interior().iter().map(|&n| grid.quad_weights()[n]).sum()
}

fn identity_residual(grid: &Grid, matrix: &CsrMatrix, eig: &EigenResult, skip: Option<&[bool]>) -> f64 {
    let phi = grid.to_interior(&eig.phi);
    let ap = matrix.matvec(&phi);
    (0..phi.len())
        .filter(|&k| skip.is_none_or(|s| !s[k]))
        .map(|k| (ap[k] - eig.lambda * phi[k]).abs())
        .fold(0.0, f64::max)
}

/// Freezes the selection of `F` at the positive eigenfunction.
pub fn linearize_at(op: &BoundOperator<'_>, eig: &EigenResult, opts: &MeasureOptions) -> Result<FrozenLinearization> {
    let grid = op.grid();
    grid.check(&eig.phi)?;
    if eig.branch != Branch::Plus {
        return Err(Error::InvalidArgument("linearization needs the positive eigenpair".into()));
    }
    // Exact argmin for the selection, so that `A phi1 = F(phi1)`; the band
    // only decides which nodes count as tied.
    let (_, exact) = op.eval(&eig.phi, 0.0)?;
    let (_, banded) = op.eval(&eig.phi, opts.tie_tol)?;
    let mut control = exact;
    control.tie_mask = banded.tie_mask;
    let matrix = op.frozen_matrix(&control.selection);
    let tie_fraction = control.tie_measure(grid) / interior_mass(grid);
    let identity_residual = identity_residual(grid, &matrix, eig, Some(&control.tie_mask));
    Ok(FrozenLinearization {
        unique_almost_everywhere: tie_fraction < opts.tie_measure_tol,
        tie_fraction,
        identity_residual,
        matrix,
        control,
    })
}

/// Which selection produced a measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// The argmin (argmax) selection at the eigenfunction.
    Argmin,
    /// A single member whose matrix has the same principal eigenvalue.
    GloballyTying(usize),
    /// The caller-supplied candidate with this index.
    Candidate(usize),
}

#[derive(Debug, Clone)]
pub struct MinimizingMeasure {
    /// Density against Lebesgue measure; zero on the boundary.
    pub phi_star: GridFunction,
    pub provenance: Provenance,
    /// Principal eigenvalue of the frozen matrix seen from the left.
    pub adjoint_lambda: f64,
    /// Member per interior node of the frozen matrix.
    pub selection: Vec<usize>,
}

impl MinimizingMeasure {
    /// Nodal masses `w_i phi1_i phi_star_i`; they sum to one.
    pub fn weights(&self, grid: &Grid, phi1: &GridFunction) -> Vec<f64> {
        let w = grid.quad_weights();
        (0..grid.len())
            .map(|n| w[n] * phi1[n] * self.phi_star[n])
            .collect()
    }
}

const ADJOINT_SHIFT_GAP: f64 = 0.1;
const ADJOINT_MAX_ITERS: usize = 500;
const ADJOINT_TOL: f64 = 1e-13;

/// Adjoint eigenfunction of a linearization at the positive eigenpair.
pub fn linearization_adjoint(grid: &Grid, lin: &FrozenLinearization, eig: &EigenResult) -> Result<MinimizingMeasure> {
    adjoint_eigenfunction(grid, &lin.matrix, eig, Provenance::Argmin, lin.control.selection.clone())
}

/// Left principal eigenvector of `matrix` by inverse iteration on the
/// transpose, converted to a density and normalized against `eig.phi`.
pub fn adjoint_eigenfunction(
    grid: &Grid,
    matrix: &CsrMatrix,
    eig: &EigenResult,
    provenance: Provenance,
    selection: Vec<usize>,
) -> Result<MinimizingMeasure> {
    let shift = eig.lambda - ADJOINT_SHIFT_GAP;
    let lu = BandedLu::factor(&matrix.transpose().shifted(shift))
        .map_err(|e| solver_error("adjoint_eigenfunction", format!("shifted transpose not an M-matrix: {e:?}")))?;
    let nk = matrix.dim();
    let mut psi = vec![1.0 / nk as f64; nk];
    let mut adjoint_lambda = f64::NAN;
    for _ in 0..ADJOINT_MAX_ITERS {
        let next = lu.solve(&psi);
        let norm = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let next: Vec<f64> = next.iter().map(|v| v / norm).collect();
        let prev_norm = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let change = next
            .iter()
            .zip(&psi)
            .map(|(a, b)| (a - b / prev_norm).abs())
            .fold(0.0, f64::max);
        adjoint_lambda = shift + prev_norm / norm;
        psi = next;
        if change <= ADJOINT_TOL {
            break;
        }
    }
    if let Some(k) = psi.iter().position(|&v| v <= 0.0) {
        return Err(solver_error(
            "adjoint_eigenfunction",
            format!("left eigenvector not positive at interior unknown {k} (reducible frozen matrix?)"),
        ));
    }
    let phi = grid.to_interior(&eig.phi);
    let pairing: f64 = psi.iter().zip(&phi).map(|(a, b)| a * b).sum();
    let w = grid.quad_weights();
    let density: Vec<f64> = grid
        .interior()
        .iter()
        .zip(&psi)
        .map(|(&node, &p)| p / (pairing * w[node]))
        .collect();
    Ok(MinimizingMeasure {
        phi_star: grid.from_interior(&density),
        provenance,
        adjoint_lambda,
        selection,
    })
}

/// A candidate selection: at each interior node the first rule whose
/// predicate is positive picks the member; other nodes keep the argmin member.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRule {
    pub rules: Vec<(Expr, usize)>,
}

impl SelectionRule {
    pub fn uniform(member: usize) -> Self {
        SelectionRule {
            rules: vec![(Expr::constant(1.0), member)],
        }
    }

    fn selection(&self, grid: &Grid, base: &[usize], family_len: usize) -> Result<Vec<usize>> {
        if let Some(&(_, m)) = self.rules.iter().find(|(_, m)| *m >= family_len) {
            return Err(Error::InvalidArgument(format!(
                "selection rule member {m} out of range (family has {family_len})"
            )));
        }
        let mut out = base.to_vec();
        for (k, &node) in grid.interior().iter().enumerate() {
            let p = grid.point(node);
            if let Some((_, m)) = self.rules.iter().find(|(pred, _)| pred.eval(p) > 0.0) {
                out[k] = *m;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRejection {
    pub candidate: usize,
    /// Principal eigenvalue of the candidate's frozen matrix (NaN when it
    /// has none above the adjoint shift).
    pub frozen_lambda: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct MeasureSet {
    pub extremes: Vec<MinimizingMeasure>,
    /// True when the linearization is unique almost everywhere, so the set
    /// is known to be a singleton.
    pub complete: bool,
    pub linearization: FrozenLinearization,
    pub rejected: Vec<CandidateRejection>,
}

impl MeasureSet {
    pub fn len(&self) -> usize {
        self.extremes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extremes.is_empty()
    }
}

/// L1 distance between the probability measures of two densities.
pub fn measure_distance(grid: &Grid, phi1: &GridFunction, a: &MinimizingMeasure, b: &MinimizingMeasure) -> f64 {
    let w = grid.quad_weights();
    (0..grid.len())
        .map(|n| w[n] * phi1[n] * (a.phi_star[n] - b.phi_star[n]).abs())
        .sum()
}

/// Collects minimizing measures from the argmin selection, every member
/// whose frozen matrix shares the principal eigenvalue (a globally tying
/// member) and the caller's candidates.
///
/// Members and candidates are judged by the principal eigenvalue of their
/// frozen matrix rather than pointwise: the dominated members satisfy
/// `A phi1 >= lambda phi1`, so agreement of the eigenvalues is exactly what
/// makes the resulting measure minimizing, and it is robust to the O(1)
/// pointwise defects that grid boundaries introduce into discrete ties.
pub fn measure_set(
    op: &BoundOperator<'_>,
    eig: &EigenResult,
    candidates: &[SelectionRule],
    opts: &MeasureOptions,
) -> Result<MeasureSet> {
    let grid = op.grid();
    let lin = linearize_at(op, eig, opts)?;
    let nk = grid.interior().len();
    let lambda_tol = opts.identity_tol * (1.0 + eig.lambda.abs());

    let mut selections: Vec<(Provenance, Vec<usize>)> = vec![(Provenance::Argmin, lin.control.selection.clone())];
    for m in 0..op.family_len() {
        selections.push((Provenance::GloballyTying(m), vec![m; nk]));
    }
    for (i, rule) in candidates.iter().enumerate() {
        let sel = rule.selection(grid, &lin.control.selection, op.family_len())?;
        selections.push((Provenance::Candidate(i), sel));
    }

    let built: Vec<(Provenance, Result<MinimizingMeasure>)> = selections
        .into_par_iter()
        .map(|(prov, sel)| {
            let m = adjoint_eigenfunction(grid, &op.frozen_matrix(&sel), eig, prov.clone(), sel);
            (prov, m)
        })
        .collect();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (prov, m) in built {
        let frozen_lambda = m.as_ref().map_or(f64::NAN, |m| m.adjoint_lambda);
        let ok = (frozen_lambda - eig.lambda).abs() <= lambda_tol;
        match (prov, m) {
            (Provenance::Argmin, m) => accepted.push(m?),
            (_, Ok(m)) if ok => accepted.push(m),
            (Provenance::Candidate(candidate), _) => rejected.push(CandidateRejection {
                candidate,
                frozen_lambda,
                tolerance: lambda_tol,
            }),
            _ => {}
        }
    }
    let mut extremes: Vec<MinimizingMeasure> = Vec::new();
    for m in accepted {
        if extremes
            .iter()
            .all(|e| measure_distance(grid, &eig.phi, e, &m) > opts.dedup_tol)
        {
            extremes.push(m);
        }
    }
    Ok(MeasureSet {
        extremes,
        complete: lin.unique_almost_everywhere,
        linearization: lin,
        rejected,
    })
}

/// `max over measures of integral(f * phi_star)`.
pub fn solvability_functional(grid: &Grid, f: &GridFunction, ms: &MeasureSet) -> Result<f64> {
    if ms.is_empty() {
        return Err(Error::InvalidArgument("empty measure set".into()));
    }
    grid.check(f)?;
    let mut best = f64::NEG_INFINITY;
    for m in &ms.extremes {
        best = best.max(grid.integrate(&f.zip_with(&m.phi_star, |a, b| a * b))?);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCertificate {
    pub provenance: Provenance,
    /// Largest `J(mu, phi)` over the random positive test functions.
    pub max_j: f64,
    pub j_at_eigenfunction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub lambda: f64,
    pub trials: usize,
    pub cert_tol: f64,
    pub measures: Vec<MeasureCertificate>,
    /// `max |J(nu, phi1) - lambda|` over random probability vectors `nu`.
    pub max_eigen_ratio_deviation: f64,
    pub eigen_ratio_tol: f64,
    pub passed: bool,
}

/// `sum_i mu_i F(phi)_i / phi_i` over interior nodes.
fn j_value(grid: &Grid, weights: &[f64], fphi: &GridFunction, phi: &GridFunction) -> f64 {
    grid.interior()
        .iter()
        .map(|&n| weights[n] * fphi[n] / phi[n])
        .sum()
}

fn random_positive(grid: &Grid, phi1: &GridFunction, rng: &mut ChaCha8Rng, trial: usize) -> GridFunction {
    let mix = crate::operator::random_function(grid, rng, false);
    let amp = rng.gen_range(0.1..2.0);
    if trial % 2 == 0 {
        grid.sample_interior(|_| 0.0)
            .zip_with(&mix, |_, m| (amp * m).exp())
            .zip_with(phi1, |v, p| if p == 0.0 { 0.0 } else { v })
    } else {
        let eps = rng.gen_range(0.0..0.5);
        let delta = rng.gen_range(1e-3..0.5);
        phi1.zip_with(&mix, |p, m| if p == 0.0 { 0.0 } else { p * (eps * m).exp() + delta })
    }
}

/// Randomized check of the minimax formula: no strictly positive test
/// function pushes `J(mu, phi)` above the eigenvalue, and every probability
/// vector gives `J(nu, phi1) = lambda` up to the eigen residual.
pub fn minimax_certificate(
    op: &BoundOperator<'_>,
    ms: &MeasureSet,
    eig: &EigenResult,
    trials: usize,
    seed: u64,
    cert_tol: f64,
) -> Result<CertificateReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let grid = op.grid();
    let lambda = eig.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests: Vec<GridFunction> = (0..trials)
        .map(|t| random_positive(grid, &eig.phi, &mut rng, t))
        .collect();
    let images: Vec<GridFunction> = tests
        .par_iter()
        .map(|phi| op.apply(phi))
        .collect::<Result<_>>()?;
    let f_eig = op.apply(&eig.phi)?;

    let eigen_ratio_tol = 1e-8 * (1.0 + lambda.abs());
    let mut measures = Vec::new();
    for m in &ms.extremes {
        let w = m.weights(grid, &eig.phi);
        let max_j = tests
            .iter()
            .zip(&images)
            .map(|(phi, fphi)| j_value(grid, &w, fphi, phi))
            .fold(f64::NEG_INFINITY, f64::max);
        let j_at_eigenfunction = j_value(grid, &w, &f_eig, &eig.phi);
        measures.push(MeasureCertificate {
            provenance: m.provenance.clone(),
            passed: max_j <= lambda + cert_tol && (j_at_eigenfunction - lambda).abs() <= eigen_ratio_tol,
            max_j,
            j_at_eigenfunction,
        });
    }

    let ratios: Vec<f64> = grid
        .interior()
        .iter()
        .map(|&n| f_eig[n] / eig.phi[n])
        .collect();
    let mut max_dev = 0.0f64;
    for _ in 0..trials {
        let nu: Vec<f64> = ratios.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = nu.iter().sum();
        let j: f64 = nu.iter().zip(&ratios).map(|(a, r)| a * r).sum::<f64>() / total;
        max_dev = max_dev.max((j - lambda).abs());
    }
    Ok(CertificateReport {
        lambda,
        trials,
        cert_tol,
        passed: measures.iter().all(|m| m.passed) && max_dev <= eigen_ratio_tol,
        measures,
        max_eigen_ratio_deviation: max_dev,
        eigen_ratio_tol,
    })
}

#[derive(Debug, Clone)]
pub struct RefinedLimit {
    pub fit: BlowupFit,
    /// `max over measures of integral(f phi_star)`.
    pub integral: f64,
    /// `|k_est - integral| / integral`.
    pub relative_gap: f64,
}

/// Blow-up rate `lim (lambda1 - lambda) ||u_lambda||` along `schedule`,
/// compared with `max_mu integral(f / phi1) dmu`.
pub fn refined_limit(
    op: &BoundOperator<'_>,
    ms: &MeasureSet,
    f: &GridFunction,
    schedule: &[f64],
) -> Result<RefinedLimit> {
    let grid = op.grid();
    let fit = blowup_estimate_bound(op, f, schedule)?;
    let integral = solvability_functional(grid, f, ms)?;
    Ok(RefinedLimit {
        relative_gap: (fit.k_est - integral).abs() / integral.abs(),
        fit,
        integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{half_eigen_plus_bound, EigenOptions};
    use crate::expr::parse_expr;
    use crate::mesh::Domain;
    use crate::operator::{laplacian, min_laplacians, BellmanOperator, EllipticityParams, LinearOperatorSpec};
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(Domain::unit_interval(), n).unwrap()
    }

    fn setup(op: &BellmanOperator, grid: &Grid) -> EigenResult {
        half_eigen_plus_bound(&op.bind(grid).unwrap(), &EigenOptions::default()).unwrap()
    }

    #[test]
    fn min_laplacians_linearizes_to_first_member() {
        let g = unit(401);
        let op = min_laplacians(1);
        let eig = setup(&op, &g);
        let lin = linearize_at(&op.bind(&g).unwrap(), &eig, &MeasureOptions::default()).unwrap();
        assert!(lin.control.selection.iter().all(|&m| m == 0));
        assert!(lin.unique_almost_everywhere);
        assert!(lin.identity_residual < 1e-7);
    }

    #[test]
    fn linear_operator_frozen_matrix_is_member_matrix() {
        let g = unit(51);
        let op = laplacian(1);
        let bound = op.bind(&g).unwrap();
        let eig = setup(&op, &g);
        let lin = linearize_at(&bound, &eig, &MeasureOptions::default()).unwrap();
        assert_eq!(lin.matrix, bound.member_matrix(0));
    }

    #[test]
    fn self_adjoint_density() {
        let g = unit(401);
        for op in [laplacian(1), min_laplacians(1)] {
            let eig = setup(&op, &g);
            let ms = measure_set(&op.bind(&g).unwrap(), &eig, &[], &MeasureOptions::default()).unwrap();
            assert_eq!(ms.len(), 1);
            assert!(ms.complete);
            let m = &ms.extremes[0];
            for n in 0..g.len() {
                assert!((m.phi_star[n] - 2.0 * (PI * g.point(n)[0]).sin()).abs() < 2e-3);
            }
            let total: f64 = m.weights(&g, &eig.phi).iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn drift_adjoint_matches_toeplitz_oracle() {
        let g = unit(201);
        let b = 1.5;
        let spec = LinearOperatorSpec::scaled_laplacian(1, 1.0).with_drift(vec![Expr::constant(b)]);
        let op = BellmanOperator::linear(spec, EllipticityParams::new(1.0, 1.0, b, 0.0).unwrap()).unwrap();
        let eig = setup(&op, &g);
        let ms = measure_set(&op.bind(&g).unwrap(), &eig, &[], &MeasureOptions::default()).unwrap();
        let m = &ms.extremes[0];
        // Backward differencing for b > 0 makes the matrix tridiagonal
        // Toeplitz with sub-diagonal -(1/h^2 + b/h) and super-diagonal -1/h^2.
        let h = g.h();
        let nk = g.interior().len();
        let ratio = (1.0 / (h * h)) / (1.0 / (h * h) + b / h);
        let oracle: Vec<f64> = (1..=nk)
            .map(|j| ratio.powf(-(j as f64) / 2.0).recip() * (j as f64 * PI / (nk + 1) as f64).sin())
            .collect();
        let oracle = oracle.iter().map(|v| v / h).collect::<Vec<_>>();
        let got = g.to_interior(&m.phi_star);
        let scale = got.iter().zip(&oracle).map(|(a, b)| a * b).sum::<f64>()
            / oracle.iter().map(|b| b * b).sum::<f64>();
        for (a, o) in got.iter().zip(&oracle) {
            assert!((a - scale * o).abs() < 1e-6 * got.iter().cloned().fold(0.0, f64::max));
        }
        // The pairing normalization holds regardless of the drift.
        let total: f64 = m.weights(&g, &eig.phi).iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solvability_functional_examples() {
        let g = unit(401);
        let op = min_laplacians(1);
        let eig = setup(&op, &g);
        let ms = measure_set(&op.bind(&g).unwrap(), &eig, &[], &MeasureOptions::default()).unwrap();
        let t = |f: GridFunction| solvability_functional(&g, &f, &ms).unwrap();
        assert!((t(g.sample(|p| -(PI * p[0]).sin())) + 1.0).abs() < 1e-3);
        assert!(t(g.sample(|p| (2.0 * PI * p[0]).sin())).abs() < 1e-4);
        assert!((t(eig.phi.clone()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_passes_for_min_laplacians() {
        let g = unit(201);
        let op = min_laplacians(1);
        let bound = op.bind(&g).unwrap();
        let eig = setup(&op, &g);
        let ms = measure_set(&bound, &eig, &[], &MeasureOptions::default()).unwrap();
        let report = minimax_certificate(&bound, &ms, &eig, 200, 7, 1e-6 * (1.0 + eig.lambda)).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.measures[0].max_j < eig.lambda);
    }

    #[test]
    fn non_minimizing_measure_fails_certificate() {
        // Uniform weights are not the minimizing measure; some positive test
        // function must push J above lambda.
        let g = unit(101);
        let op = laplacian(1);
        let bound = op.bind(&g).unwrap();
        let eig = setup(&op, &g);
        let mut ms = measure_set(&bound, &eig, &[], &MeasureOptions::default()).unwrap();
        let flat = g.sample_interior(|_| 1.0);
        let pairing = g.integrate(&flat.zip_with(&eig.phi, |a, b| a * b)).unwrap();
        ms.extremes[0].phi_star = flat.scaled(1.0 / pairing);
        let report = minimax_certificate(&bound, &ms, &eig, 200, 3, 1e-6).unwrap();
        assert!(!report.measures[0].passed);
    }

    #[test]
    fn candidates_checked_against_eigen_identity() {
        let g = unit(101);
        let op = min_laplacians(1);
        let bound = op.bind(&g).unwrap();
        let eig = setup(&op, &g);
        let good = SelectionRule::uniform(0);
        let bad = SelectionRule {
            rules: vec![(parse_expr("x - 0.5").unwrap(), 1)],
        };
        let ms = measure_set(&bound, &eig, &[good, bad], &MeasureOptions::default()).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.rejected.len(), 1);
        assert_eq!(ms.rejected[0].candidate, 1);
        let out_of_range = SelectionRule::uniform(5);
        assert!(measure_set(&bound, &eig, &[out_of_range], &MeasureOptions::default()).is_err());
    }

    #[test]
    fn refined_limit_examples() {
        let g = unit(401);
        let sched: Vec<f64> = [1.0, 0.5, 0.25, 0.125, 0.0625].iter().map(|d| PI * PI - d).collect();
        for (op, f, expected) in [
            (min_laplacians(1), g.sample(|p| (PI * p[0]).sin()), 1.0),
            (laplacian(1), g.sample(|_| 1.0), 4.0 / PI),
        ] {
            let bound = op.bind(&g).unwrap();
            let eig = setup(&op, &g);
            let ms = measure_set(&bound, &eig, &[], &MeasureOptions::default()).unwrap();
            let r = refined_limit(&bound, &ms, &f, &sched).unwrap();
            assert!((r.fit.k_est - expected).abs() < 0.02 * expected, "{}", r.fit.k_est);
            assert!(r.relative_gap < 0.02);
        }
    }
}
