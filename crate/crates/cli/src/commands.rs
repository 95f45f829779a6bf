//! One function per subcommand. Each writes `result.json` plus CSV tables.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use halfeig_core::adjoint::{
    measure_distance, measure_set, minimax_certificate, solvability_functional, MeasureSet, Provenance,
};
use halfeig_core::dirichlet::{abp_ratio, solve_bellman_dirichlet, verify_comparison, SolveStatus};
use halfeig_core::eigen::{
    dyadic_schedule, half_eigen_by_blowup, half_eigen_minus_bound, half_eigen_plus_bound, Branch, EigenResult,
};
use halfeig_core::operator::{check_hypotheses, BoundOperator, CheckOutcome};
use halfeig_core::resonance::{
    solve_at_resonance, t_star, Classification, ContinuationOutcome, ContinuationStep, ResonantStatus,
};

use crate::config::{Problem, ProblemConfig};
use crate::output::{exact, measured, Measured, OutputDir};

/// What the process should exit with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Success,
    Unsolvable,
    Failure,
}

pub struct Context<'a> {
    pub config: &'a ProblemConfig,
    pub problem: &'a Problem,
    pub out: &'a OutputDir,
    pub seed: u64,
}

impl Context<'_> {
    fn header(&self, command: &str, status: &str) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("command".into(), json!(command));
        m.insert("status".into(), json!(status));
        m.insert("seed".into(), json!({"value": self.seed, "tol": 0.0}));
        m.insert("nodes".into(), json!(exact(self.problem.grid.len())));
        m
    }

    fn finish(&self, mut doc: serde_json::Map<String, Value>, body: impl Serialize) -> Result<()> {
        if let Value::Object(extra) = serde_json::to_value(body)? {
            doc.extend(extra);
        }
        self.out.write_json("result.json", &Value::Object(doc))
    }

    fn bind(&self) -> Result<BoundOperator<'_>> {
        Ok(self.problem.op.bind(&self.problem.grid)?)
    }

    fn plus(&self, op: &BoundOperator<'_>) -> Result<EigenResult> {
        Ok(half_eigen_plus_bound(op, &self.config.eigen_options())?)
    }

    fn minus(&self, op: &BoundOperator<'_>) -> Result<EigenResult> {
        Ok(half_eigen_minus_bound(op, &self.config.eigen_options())?)
    }

    fn measures(&self, op: &BoundOperator<'_>, plus: &EigenResult) -> Result<MeasureSet> {
        let opts = self.config.measure_options(&self.problem.grid);
        Ok(measure_set(op, plus, &self.problem.candidates, &opts)?)
    }

    fn trials(&self, default: usize) -> usize {
        self.config.options.trials.unwrap_or(default)
    }
}

#[derive(Serialize)]
struct EigenSummary {
    lambda: Measured<f64>,
    residual: Measured<f64>,
    iterations: Measured<usize>,
    file: String,
}

fn eigen_summary(ctx: &Context<'_>, e: &EigenResult, file: &str) -> Result<EigenSummary> {
    let opts = ctx.config.eigen_options();
    ctx.out.write_grid_function(file, &ctx.problem.grid, &e.phi)?;
    Ok(EigenSummary {
        lambda: measured(e.lambda, opts.lambda_tol),
        residual: measured(e.residual, opts.residual_tol * (1.0 + e.lambda.abs())),
        iterations: exact(e.iters),
        file: file.into(),
    })
}

pub fn eigen(ctx: &Context<'_>) -> Result<Verdict> {
    let op = ctx.bind()?;
    let plus = ctx.plus(&op)?;
    let minus = ctx.minus(&op)?;
    let mut body = json!({
        "lambda_plus": measured(plus.lambda, ctx.config.eigen_options().lambda_tol),
        "lambda_minus": measured(minus.lambda, ctx.config.eigen_options().lambda_tol),
        "plus": eigen_summary(ctx, &plus, "phi_plus.csv")?,
        "minus": eigen_summary(ctx, &minus, "phi_minus.csv")?,
    });
    if ctx.config.options.blowup {
        let f = ctx.problem.forcing()?;
        let mut fits = serde_json::Map::new();
        for (name, branch, target) in [("plus", Branch::Plus, plus.lambda), ("minus", Branch::Minus, minus.lambda)] {
            let offset = 1f64.min(0.5 * (minus.lambda - plus.lambda).abs()).max(0.1);
            let (est, fit) = half_eigen_by_blowup(&op, branch, f, &dyadic_schedule(target, offset, 6))?;
            let spread = (est.lambda - target).abs();
            fits.insert(
                name.into(),
                json!({
                    "lambda": measured(est.lambda, spread),
                    "slope": measured(fit.slope, spread),
                    "points": exact(fit.lambdas.len()),
                }),
            );
        }
        body["blowup"] = Value::Object(fits);
    }
    ctx.finish(ctx.header("eigen", "converged"), body)?;
    Ok(Verdict::Success)
}

fn solve_status(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::Blowup => "blowup",
        SolveStatus::Singular => "singular",
        SolveStatus::MaxIters => "max_iters",
    }
}

pub fn solve(ctx: &Context<'_>) -> Result<Verdict> {
    let Some(lambda) = ctx.config.options.lambda else {
        bail!("config options.lambda: required for solve");
    };
    let f = ctx.problem.forcing()?;
    let opts = ctx.config.solve_options();
    let r = solve_bellman_dirichlet(&ctx.problem.op, &ctx.problem.grid, lambda, f, &opts)?;
    let target = opts.residual_tol * (1.0 + f.sup_norm());
    if r.converged() {
        ctx.out.write_grid_function("u.csv", &ctx.problem.grid, &r.u)?;
    }
    let body = json!({
        "lambda": measured(lambda, 0.0),
        "residual": measured(r.residual, target),
        "sup_norm": measured(r.u.sup_norm(), target),
        "policy_iterations": exact(r.policy_switches.len()),
        "file": if r.converged() { Some("u.csv") } else { None },
    });
    ctx.finish(ctx.header("solve", solve_status(r.status)), body)?;
    Ok(match r.status {
        SolveStatus::Converged => Verdict::Success,
        SolveStatus::Blowup => Verdict::Unsolvable,
        SolveStatus::Singular | SolveStatus::MaxIters => Verdict::Failure,
    })
}

fn classification(c: Classification) -> &'static str {
    match c {
        Classification::SolvableStrict => "solvable_strict",
        Classification::Unsolvable => "unsolvable",
        Classification::Borderline => "borderline",
    }
}

fn continuation_outcome(c: ContinuationOutcome) -> &'static str {
    match c {
        ContinuationOutcome::Converged => "converged",
        ContinuationOutcome::Growing => "growing",
        ContinuationOutcome::BlewUp => "blew_up",
    }
}

fn write_continuation(out: &OutputDir, log: &[ContinuationStep]) -> Result<()> {
    out.write_table(
        "continuation.csv",
        &["lambda", "sup_norm", "status"],
        log.iter()
            .map(|s| vec![s.lambda.to_string(), s.sup_norm.to_string(), solve_status(s.status).into()]),
    )
}

pub fn resonance(ctx: &Context<'_>) -> Result<Verdict> {
    let f = ctx.problem.forcing()?;
    let op = ctx.bind()?;
    let plus = ctx.plus(&op)?;
    let minus = ctx.minus(&op)?;
    let ms = ctx.measures(&op, &plus)?;
    let opts = ctx.config.resonance_options();
    let v = solve_at_resonance(&op, f, &plus, minus.lambda, &ms, &opts)?;
    let scale = 1.0 + f.sup_norm();
    let mut body = json!({
        "classification": classification(v.classification),
        "functional": measured(v.t_value, v.class_tol),
        "lambda": measured(v.lambda, ctx.config.eigen_options().lambda_tol),
        "sufficiency_applies": v.sufficiency_applies,
        "measures": exact(ms.len()),
    });
    if let Some(u) = &v.solution {
        ctx.out.write_grid_function("solution.csv", &ctx.problem.grid, u)?;
        body["solution"] = json!({
            "file": "solution.csv",
            "residual": measured(v.residual.unwrap_or(f64::NAN), opts.res_tol * scale),
            "sup_norm": measured(u.sup_norm(), opts.res_tol * scale),
        });
    }
    if let Some(c) = &v.continuation {
        write_continuation(ctx.out, &c.log)?;
        let endpoint = c.endpoint.as_ref().map(|e| {
            json!({
                "status": match e.status {
                    ResonantStatus::Solved => "solved",
                    ResonantStatus::Inconsistent => "inconsistent",
                    ResonantStatus::Blowup => "blowup",
                    ResonantStatus::MaxIters => "max_iters",
                },
                "residual": measured(e.residual, opts.res_tol * scale),
                "range_defect": e.range_defect.map(|d| measured(d, opts.res_tol * scale)),
                "iterations": exact(e.iterations),
            })
        });
        body["continuation"] = json!({
            "outcome": continuation_outcome(c.outcome),
            "steps": exact(c.log.len()),
            "cauchy_tol": measured(opts.cont_tol, 0.0),
            "endpoint": endpoint,
            "file": "continuation.csv",
        });
    }
    let (status, verdict) = match (&v.solution, v.classification, v.continuation.as_ref().map(|c| c.outcome)) {
        (Some(_), _, _) => ("solved", Verdict::Success),
        (None, Classification::Unsolvable, _) | (None, _, Some(ContinuationOutcome::BlewUp)) => {
            ("unsolvable", Verdict::Unsolvable)
        }
        _ => ("inconclusive", Verdict::Failure),
    };
    ctx.finish(ctx.header("resonance", status), body)?;
    Ok(verdict)
}

pub fn tstar(ctx: &Context<'_>) -> Result<Verdict> {
    let Some(h) = ctx.problem.h.as_ref() else {
        bail!("config options.h: required for tstar");
    };
    let op = ctx.bind()?;
    let plus = ctx.plus(&op)?;
    let minus = ctx.minus(&op)?;
    let ms = ctx.measures(&op, &plus)?;
    let opts = ctx.config.resonance_options();
    let r = t_star(&op, h, &plus, minus.lambda, &ms, &opts)?;
    let rows = r.probes.iter().chain(&r.grid).map(|p| {
        vec![
            p.t.to_string(),
            continuation_outcome(p.outcome).into(),
            p.solvable().to_string(),
        ]
    });
    ctx.out.write_table("probes.csv", &["t", "outcome", "solvable"], rows)?;
    let body = json!({
        "t_star": measured(r.functional, opts.class_tol * (1.0 + h.sup_norm())),
        "bisection": measured(r.bisection, r.bracket),
        "bisect_tol": measured(r.bisect_tol, 0.0),
        "agrees": r.agrees,
        "monotone": r.monotone,
        "probes": exact(r.probes.len() + r.grid.len()),
        "file": "probes.csv",
    });
    let ok = r.agrees && r.monotone;
    ctx.finish(ctx.header("tstar", if ok { "consistent" } else { "inconsistent" }), body)?;
    Ok(if ok { Verdict::Success } else { Verdict::Failure })
}

fn provenance(p: &Provenance) -> String {
    match p {
        Provenance::Argmin => "argmin".into(),
        Provenance::GloballyTying(m) => format!("member {m}"),
        Provenance::Candidate(c) => format!("candidate {c}"),
    }
}

pub fn measures(ctx: &Context<'_>) -> Result<Verdict> {
    let op = ctx.bind()?;
    let plus = ctx.plus(&op)?;
    let ms = ctx.measures(&op, &plus)?;
    let grid = &ctx.problem.grid;
    let cert_tol = ctx.config.tolerances.cert_tol.unwrap_or(1e-6 * (1.0 + plus.lambda.abs()));
    let report = minimax_certificate(&op, &ms, &plus, ctx.trials(200), ctx.seed, cert_tol)?;
    let opts = ctx.config.measure_options(grid);
    let mut list = Vec::new();
    for (k, (m, c)) in ms.extremes.iter().zip(&report.measures).enumerate() {
        let file = format!("measure_{k}.csv");
        ctx.out.write_grid_function(&file, grid, &m.phi_star)?;
        list.push(json!({
            "provenance": provenance(&m.provenance),
            "adjoint_lambda": measured(m.adjoint_lambda, opts.identity_tol * (1.0 + plus.lambda.abs())),
            "max_j": measured(c.max_j, cert_tol),
            "j_at_eigenfunction": measured(c.j_at_eigenfunction, report.eigen_ratio_tol),
            "passed": c.passed,
            "file": file,
        }));
    }
    let mut distances = Vec::new();
    for i in 0..ms.len() {
        for k in 0..i {
            distances.push(json!({
                "pair": [exact(k), exact(i)],
                "l1": measured(measure_distance(grid, &plus.phi, &ms.extremes[k], &ms.extremes[i]), opts.dedup_tol),
            }));
        }
    }
    let rejected: Vec<Value> = ms
        .rejected
        .iter()
        .map(|r| {
            json!({
                "candidate": exact(r.candidate),
                "frozen_lambda": measured(r.frozen_lambda, r.tolerance),
            })
        })
        .collect();
    let mut body = json!({
        "lambda_plus": measured(plus.lambda, ctx.config.eigen_options().lambda_tol),
        "complete": ms.complete,
        "tie_fraction": measured(ms.linearization.tie_fraction, opts.tie_measure_tol),
        "trials": exact(report.trials),
        "measures": list,
        "distances": distances,
        "rejected": rejected,
        "certificate_passed": report.passed,
    });
    if let Some(f) = &ctx.problem.f {
        let t = solvability_functional(grid, f, &ms)?;
        body["solvability_functional"] =
            json!(measured(t, ctx.config.resonance_options().class_tol * (1.0 + f.sup_norm())));
    }
    ctx.finish(ctx.header("measures", if report.passed { "certified" } else { "certificate_failed" }), body)?;
    Ok(if report.passed { Verdict::Success } else { Verdict::Failure })
}

fn check_outcome(c: &CheckOutcome) -> Value {
    json!({
        "passed": c.passed,
        "worst_violation": measured(c.worst_violation, halfeig_core::operator::HYPOTHESIS_TOL),
    })
}

pub fn check(ctx: &Context<'_>) -> Result<Verdict> {
    let (op, grid) = (&ctx.problem.op, &ctx.problem.grid);
    let trials = ctx.trials(100);
    let hyp = check_hypotheses(op, grid, trials, ctx.seed)?;
    let bound = ctx.bind()?;
    let plus = ctx.plus(&bound)?;
    let offset = ctx.config.options.comparison_offset.unwrap_or(0.5);
    let below = verify_comparison(op, grid, plus.lambda - offset, trials, ctx.seed)?;
    let above = verify_comparison(op, grid, plus.lambda + offset, trials, ctx.seed)?;
    let comparison_ok = below.holds && !above.holds && above.witness.is_some();
    // The bound only constrains u^+, so the sweep needs forcing with a positive part.
    let f = match &ctx.problem.f {
        Some(f) if f.max() > 0.0 => f.clone(),
        _ => grid.sample_interior(|_| 1.0),
    };
    let ratios: Vec<(f64, f64)> = (0..=8)
        .map(|j| {
            let lambda = plus.lambda - offset * 0.5f64.powi(j);
            abp_ratio(op, grid, lambda, &f, plus.lambda).map(|r| (lambda, r))
        })
        .collect::<halfeig_core::error::Result<_>>()?;
    let max = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    ctx.out.write_table(
        "abp.csv",
        &["lambda", "ratio"],
        ratios.iter().map(|(l, r)| vec![l.to_string(), r.to_string()]),
    )?;
    let abp_ok = spread < 50.0;
    let passed = hyp.passed() && comparison_ok && abp_ok;
    let body = json!({
        "lambda_plus": measured(plus.lambda, ctx.config.eigen_options().lambda_tol),
        "trials": exact(trials),
        "hypotheses": {
            "passed": hyp.passed(),
            "homogeneity": check_outcome(&hyp.homogeneity),
            "additivity": check_outcome(&hyp.additivity),
            "sandwich": check_outcome(&hyp.sandwich),
        },
        "comparison": {
            "passed": comparison_ok,
            "below": {"lambda": measured(below.lambda, 0.0), "holds": below.holds, "worst_violation": measured(below.worst_violation, 0.0)},
            "above": {"lambda": measured(above.lambda, 0.0), "holds": above.holds, "witness_defect": above.witness.as_ref().map(|w| measured(w.max_defect, 0.0))},
        },
        "abp": {"passed": abp_ok, "max_over_min": measured(spread, 50.0), "file": "abp.csv"},
    });
    ctx.finish(ctx.header("check", if passed { "passed" } else { "failed" }), body)?;
    Ok(if passed { Verdict::Success } else { Verdict::Failure })
}

pub fn sweep(ctx: &Context<'_>) -> Result<Verdict> {
    let Some(s) = &ctx.config.options.sweep else {
        bail!("config options.sweep: required for sweep");
    };
    let f = ctx.problem.forcing()?;
    let opts = ctx.config.solve_options();
    let lambdas: Vec<f64> = (0..s.count)
        .map(|i| s.from + (s.to - s.from) * i as f64 / (s.count - 1) as f64)
        .collect();
    let results: Vec<(f64, SolveStatus, f64)> = lambdas
        .par_iter()
        .map(|&l| {
            solve_bellman_dirichlet(&ctx.problem.op, &ctx.problem.grid, l, f, &opts)
                .map(|r| (l, r.status, if r.converged() { r.u.sup_norm() } else { f64::INFINITY }))
        })
        .collect::<halfeig_core::error::Result<_>>()?;
    ctx.out.write_table(
        "sweep.csv",
        &["lambda", "sup_norm", "inv_sup_norm", "status"],
        results.iter().map(|&(l, st, n)| {
            vec![l.to_string(), n.to_string(), (1.0 / n).to_string(), solve_status(st).into()]
        }),
    )?;
    let tol = opts.residual_tol * (1.0 + f.sup_norm());
    let points: Vec<Value> = results
        .iter()
        .map(|&(l, st, n)| {
            json!({
                "lambda": measured(l, 0.0),
                "status": solve_status(st),
                "sup_norm": measured(n, tol),
                "inv_sup_norm": measured(1.0 / n, tol),
            })
        })
        .collect();
    let failed = results.iter().any(|r| matches!(r.1, SolveStatus::MaxIters));
    let body = json!({"points": points, "file": "sweep.csv"});
    ctx.finish(ctx.header("sweep", if failed { "incomplete" } else { "complete" }), body)?;
    Ok(if failed { Verdict::Failure } else { Verdict::Success })
}
