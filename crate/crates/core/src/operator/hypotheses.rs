//! Randomized checks of positive homogeneity, super/subadditivity and the
//! Pucci sandwich on the discrete operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BellmanOperator, BoundOperator, Mode};
use crate::error::{Error, Result};
use crate::mesh::{Grid, GridFunction};

/// Relative slack for every property check.
pub const HYPOTHESIS_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest excess over the allowed slack (negative when passing).
    pub worst_violation: f64,
    /// Node attaining `worst_violation`.
    pub worst_node: Option<usize>,
    pub worst_trial: Option<usize>,
}

impl CheckOutcome {
    fn new(name: &'static str) -> Self {
        CheckOutcome {
            name,
            passed: true,
            worst_violation: f64::NEG_INFINITY,
            worst_node: None,
            worst_trial: None,
        }
    }

    fn record(&mut self, excess: f64, node: usize, trial: usize) {
        if excess > self.worst_violation {
            self.worst_violation = excess;
            self.worst_node = Some(node);
            self.worst_trial = Some(trial);
        }
        if excess > 0.0 {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub trials: usize,
    pub homogeneity: CheckOutcome,
    /// Superadditivity in inf mode, subadditivity in sup mode.
    pub additivity: CheckOutcome,
    pub sandwich: CheckOutcome,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.homogeneity.passed && self.additivity.passed && self.sandwich.passed
    }
}

/// Random test function: alternates nodal noise and smooth Fourier mixes.
pub(crate) fn random_function(grid: &Grid, rng: &mut impl Rng, rough: bool) -> GridFunction {
    if rough {
        return grid.sample(|_| rng.gen_range(-1.0..1.0));
    }
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    grid.sample(|p| {
        modes
            .iter()
            .map(|&(a, kx, ky, ph)| a * (kx * p[0] + ky * p[1] + ph).sin())
            .sum()
    })
}

fn scale_of(vals: &[&[f64]]) -> f64 {
    vals.iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Runs `trials` randomized checks. Coefficients are bound without checking
/// them against the declared parameters, so a family whose true drift exceeds
/// `delta1` is caught here by the sandwich check rather than rejected.
pub fn check_hypotheses(
    op: &BellmanOperator,
    grid: &Grid,
    trials: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let bound = op.bind_unchecked(grid)?;
    check_bound(&bound, trials, seed)
}

pub(crate) fn check_bound(op: &BoundOperator<'_>, trials: usize, seed: u64) -> Result<HypothesisReport> {
    let grid = op.grid();
    let p = op.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut homogeneity = CheckOutcome::new("homogeneity");
    let mut additivity = CheckOutcome::new(match op.mode() {
        Mode::Inf => "superadditivity",
        Mode::Sup => "subadditivity",
    });
    let mut sandwich = CheckOutcome::new("pucci_sandwich");

    for trial in 0..trials {
        let rough = trial % 2 == 0;
        let u = random_function(grid, &mut rng, rough);
        let v = random_function(grid, &mut rng, !rough);
        let t = rng.gen_range(0.0..10.0);

        let fu = op.apply(&u)?;
        let fv = op.apply(&v)?;
        let ftu = op.apply(&u.scaled(t))?;
        let sum = u.axpy(1.0, &v);
        let fsum = op.apply(&sum)?;
        let w = u.axpy(-1.0, &v);
        let (lo, hi) = op.pucci_pair(&w)?;
        let grad = op.upwind_gradient_magnitude(&w)?;

        let hom_scale = 1.0 + scale_of(&[ftu.values(), fu.values()]) * t.max(1.0);
        let add_scale = 1.0 + scale_of(&[fsum.values(), fu.values(), fv.values()]);
        let sand_scale = 1.0 + scale_of(&[fu.values(), fv.values(), &lo, &hi]);

        for (k, &node) in grid.interior().iter().enumerate() {
            homogeneity.record(
                (ftu[node] - t * fu[node]).abs() - HYPOTHESIS_TOL * hom_scale,
                node,
                trial,
            );
            let gap = match op.mode() {
                Mode::Inf => fu[node] + fv[node] - fsum[node],
                Mode::Sup => fsum[node] - fu[node] - fv[node],
            };
            additivity.record(gap - HYPOTHESIS_TOL * add_scale, node, trial);

            let lower_order = p.delta1 * grad[k] + p.delta0 * w[node].abs();
            let diff = fu[node] - fv[node];
            let below = (lo[k] - lower_order) - diff;
            let above = diff - (hi[k] + lower_order);
            sandwich.record(below.max(above) - HYPOTHESIS_TOL * sand_scale, node, trial);
        }
    }

    Ok(HypothesisReport {
        trials,
        homogeneity,
        additivity,
        sandwich,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::mesh::Domain;
    use crate::operator::{min_laplacians, pucci_minus, tangential_drift, EllipticityParams, LinearOperatorSpec};

    #[test]
    fn min_laplacians_passes() {
        let grid = Grid::new(Domain::unit_interval(), 101).unwrap();
        let report = check_hypotheses(&min_laplacians(1), &grid, 100, 1).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.additivity.name, "superadditivity");
    }

    #[test]
    fn sup_mode_checks_subadditivity() {
        let grid = Grid::new(Domain::unit_interval(), 101).unwrap();
        let report = check_hypotheses(&min_laplacians(1).dual(), &grid, 50, 2).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.additivity.name, "subadditivity");
    }

    #[test]
    fn two_dimensional_builtins_pass() {
        let disk = Grid::new(Domain::unit_disk(), 31).unwrap();
        assert!(check_hypotheses(&tangential_drift(), &disk, 20, 3).unwrap().passed());
        let params = EllipticityParams::new(0.5, 3.0, 0.0, 0.0).unwrap();
        assert!(check_hypotheses(&pucci_minus(params, 2), &disk, 20, 4).unwrap().passed());
    }

    #[test]
    fn understated_drift_bound_is_caught() {
        let grid = Grid::new(Domain::unit_interval(), 51).unwrap();
        let op = BellmanOperator::new(
            vec![
                LinearOperatorSpec::scaled_laplacian(1, 1.0).with_drift(vec![Expr::constant(2.0)]),
                LinearOperatorSpec::scaled_laplacian(1, 1.0),
            ],
            EllipticityParams::new(1.0, 1.0, 0.5, 0.0).unwrap(),
        )
        .unwrap();
        let report = check_hypotheses(&op, &grid, 10, 5).unwrap();
        assert!(report.homogeneity.passed);
        assert!(!report.sandwich.passed);
        let node = report.sandwich.worst_node.unwrap();
        assert!(grid.is_interior(node));
    }

    #[test]
    fn zero_trials_rejected() {
        let grid = Grid::new(Domain::unit_interval(), 11).unwrap();
        assert!(check_hypotheses(&min_laplacians(1), &grid, 0, 0).is_err());
    }
}
