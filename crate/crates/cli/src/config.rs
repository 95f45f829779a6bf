//! Problem configuration: a single JSON document, validated into core types.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use halfeig_core::adjoint::{MeasureOptions, SelectionRule};
use halfeig_core::dirichlet::SolveOptions;
use halfeig_core::eigen::EigenOptions;
use halfeig_core::error::Error as CoreError;
use halfeig_core::expr::{parse_expr, Expr};
use halfeig_core::mesh::{Domain, Grid, GridFunction};
use halfeig_core::operator::{
    laplacian, min_laplacians, pucci_minus, pucci_plus, tangential_drift, BellmanOperator, EllipticityParams,
    LinearOperatorSpec, Mode,
};
use halfeig_core::resonance::ResonanceOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    /// Nodes per axis.
    pub n: usize,
    pub operator: OperatorConfig,
    /// Forcing term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: CommandOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        a: f64,
        b: f64,
    },
    Rectangle {
        ax: f64,
        bx: f64,
        ay: f64,
        by: f64,
    },
    Disk {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    /// `laplacian`, `example_4_2`, `example_4_3`, `pucci_minus(g,G)` or
    /// `pucci_plus(g,G)`. Mutually exclusive with `members`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
}

/// One linear member `-sum a_d d_d^2 + b.D + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub a: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub big_gamma: f64,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Inf,
    Sup,
}

/// Overrides for the library defaults. Absent fields keep the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cont_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
    /// Absolute slack for the minimax certificate; defaults to `1e-6 (1 + |lambda|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandOptions {
    /// Shift for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Direction `h` for `tstar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Extra selection rules tried by `measures`, `resonance` and `tstar`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateConfig>,
    /// Random trials for certificates and property checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Offset from `lambda1+` used by the comparison check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison_offset: Option<f64>,
    /// Also estimate both half-eigenvalues by blow-up extrapolation in `eigen`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub blowup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub rules: Vec<RuleConfig>,
}

/// Use `member` wherever `region > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub region: String,
    pub member: usize,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Parses and validates; error messages lead with the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("config {}: {}", if path == "." { "(root)".into() } else { path }, e.inner())
        })?;
        cfg.problem()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Builds the core objects, checking expressions and coefficient bounds.
    pub fn problem(&self) -> Result<Problem> {
        let domain = match self.domain {
            DomainConfig::Interval { a, b } => Domain::Interval { a, b },
            DomainConfig::Rectangle { ax, bx, ay, by } => Domain::Rectangle { ax, bx, ay, by },
            DomainConfig::Disk { radius, center } => Domain::Disk { radius, center },
        };
        let grid = Grid::new(domain, self.n).map_err(|e| match e {
            CoreError::TooFewNodes(_) => field_error("n", e),
            _ => field_error("domain", e),
        })?;
        let op = self.operator.build(grid.dim())?;
        op.bind(&grid).map_err(|e| match e {
            CoreError::InvalidOperator { member, .. } | CoreError::CoefficientBound { member, .. }
                if !self.operator.members.is_empty() =>
            {
                field_error(&format!("operator.members[{member}]"), e)
            }
            _ => field_error("operator", e),
        })?;
        let f = self.f.as_deref().map(|s| sample(&grid, s, "f")).transpose()?;
        let h = self.options.h.as_deref().map(|s| sample(&grid, s, "options.h")).transpose()?;
        let mut candidates = Vec::new();
        for (i, c) in self.options.candidates.iter().enumerate() {
            let mut rules = Vec::new();
            for (j, r) in c.rules.iter().enumerate() {
                let path = format!("options.candidates[{i}].rules[{j}]");
                let expr = expr(&r.region, &format!("{path}.region"))?;
                if r.member >= op.family.len() {
                    bail!(
                        "config {path}.member: member {} out of range (family has {})",
                        r.member,
                        op.family.len()
                    );
                }
                rules.push((expr, r.member));
            }
            candidates.push(SelectionRule { rules });
        }
        if let Some(s) = &self.options.sweep {
            if s.count < 2 || !(s.from < s.to) {
                bail!("config options.sweep: need from < to and count >= 2");
            }
        }
        if self.options.trials == Some(0) {
            bail!("config options.trials: must be at least 1");
        }
        for (name, v) in self.tolerances.fields() {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    bail!("config tolerances.{name}: must be positive and finite, got {v}");
                }
            }
        }
        Ok(Problem {
            grid,
            op,
            f,
            h,
            candidates,
        })
    }

    pub fn eigen_options(&self) -> EigenOptions {
        let mut o = EigenOptions::default();
        let t = &self.tolerances;
        if let Some(v) = t.lambda_tol {
            o.lambda_tol = v;
        }
        if let Some(v) = t.eigen_residual_tol {
            o.residual_tol = v;
        }
        o
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default();
        let t = &self.tolerances;
        if let Some(v) = t.solve_residual_tol {
            o.residual_tol = v;
        }
        if let Some(v) = t.blowup_threshold {
            o.blowup_threshold = v;
        }
        if let Some(v) = t.tie_tol {
            o.tie_tol = v;
        }
        o
    }

    /// Disk grids get tolerances scaled with the mesh size: the boundary
    /// treatment is first order there, so pointwise ties only hold to O(h).
    pub fn measure_options(&self, grid: &Grid) -> MeasureOptions {
        let mut o = match self.domain {
            DomainConfig::Disk { .. } => MeasureOptions::grid_scaled(grid),
            _ => MeasureOptions::default(),
        };
        let t = &self.tolerances;
        if let Some(v) = t.tie_tol {
            o.tie_tol = v;
        }
        if let Some(v) = t.identity_tol {
            o.identity_tol = v;
        }
        o
    }

    pub fn resonance_options(&self) -> ResonanceOptions {
        let mut o = ResonanceOptions {
            solve: self.solve_options(),
            ..ResonanceOptions::default()
        };
        let t = &self.tolerances;
        if let Some(v) = t.class_tol {
            o.class_tol = v;
        }
        if let Some(v) = t.cont_tol {
            o.cont_tol = v;
        }
        if let Some(v) = t.res_tol {
            o.res_tol = v;
        }
        if let Some(v) = t.bisect_tol {
            o.bisect_tol = v;
        }
        o
    }
}

impl Tolerances {
    fn fields(&self) -> [(&'static str, Option<f64>); 11] {
        [
            ("lambda_tol", self.lambda_tol),
            ("eigen_residual_tol", self.eigen_residual_tol),
            ("solve_residual_tol", self.solve_residual_tol),
            ("blowup_threshold", self.blowup_threshold),
            ("tie_tol", self.tie_tol),
            ("identity_tol", self.identity_tol),
            ("class_tol", self.class_tol),
            ("cont_tol", self.cont_tol),
            ("res_tol", self.res_tol),
            ("bisect_tol", self.bisect_tol),
            ("cert_tol", self.cert_tol),
        ]
    }
}

impl OperatorConfig {
    fn build(&self, dim: usize) -> Result<BellmanOperator> {
        let op = match (&self.builtin, self.members.is_empty()) {
            (Some(_), false) => bail!("config operator: `builtin` and `members` are mutually exclusive"),
            (None, true) => bail!("config operator: one of `builtin` or `members` is required"),
            (Some(name), true) => {
                if self.params.is_some() {
                    bail!("config operator.params: not allowed with a built-in operator");
                }
                builtin(name, dim)?
            }
            (None, false) => {
                let p = self
                    .params
                    .ok_or_else(|| anyhow!("config operator.params: required when `members` is given"))?;
                let params = EllipticityParams::new(p.gamma, p.big_gamma, p.delta1, p.delta0)
                    .map_err(|e| field_error("operator.params", e))?;
                let family = self
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(dim, &format!("operator.members[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                BellmanOperator::new(family, params).map_err(|e| match e {
                    CoreError::InvalidOperator { member, .. } => field_error(&format!("operator.members[{member}]"), e),
                    _ => field_error("operator", e),
                })?
            }
        };
        Ok(match self.mode {
            Some(ModeConfig::Sup) if op.mode == Mode::Inf => op.dual(),
            Some(ModeConfig::Inf) if op.mode == Mode::Sup => op.dual(),
            _ => op,
        })
    }
}

impl MemberConfig {
    fn build(&self, dim: usize, path: &str) -> Result<LinearOperatorSpec> {
        if self.a.len() != dim {
            bail!("config {path}.a: expected {dim} diffusion coefficients, got {}", self.a.len());
        }
        if !self.b.is_empty() && self.b.len() != dim {
            bail!("config {path}.b: expected {dim} drift coefficients, got {}", self.b.len());
        }
        let diffusion = self
            .a
            .iter()
            .enumerate()
            .map(|(d, s)| expr(s, &format!("{path}.a[{d}]")))
            .collect::<Result<Vec<_>>>()?;
        let drift = if self.b.is_empty() {
            vec![Expr::constant(0.0); dim]
        } else {
            self.b
                .iter()
                .enumerate()
                .map(|(d, s)| expr(s, &format!("{path}.b[{d}]")))
                .collect::<Result<Vec<_>>>()?
        };
        let zeroth = match &self.c {
            Some(s) => expr(s, &format!("{path}.c"))?,
            None => Expr::constant(0.0),
        };
        Ok(LinearOperatorSpec::new(diffusion, drift, zeroth))
    }
}

fn builtin(name: &str, dim: usize) -> Result<BellmanOperator> {
    let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
    let pucci_args = |prefix: &str| -> Option<Result<EllipticityParams>> {
        let args = compact.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
        let nums: Vec<f64> = match args.split(',').map(str::parse).collect() {
            Ok(v) => v,
            Err(_) => return Some(Err(anyhow!("config operator.builtin: bad arguments in `{name}`"))),
        };
        Some(match nums.as_slice() {
            [g, big] => EllipticityParams::new(*g, *big, 0.0, 0.0).map_err(|e| field_error("operator.builtin", e)),
            _ => Err(anyhow!("config operator.builtin: `{prefix}` takes two arguments (gamma, Gamma)")),
        })
    };
    if let Some(p) = pucci_args("pucci_minus") {
        return Ok(pucci_minus(p?, dim));
    }
    if let Some(p) = pucci_args("pucci_plus") {
        return Ok(pucci_plus(p?, dim));
    }
    match compact.as_str() {
        "laplacian" => Ok(laplacian(dim)),
        "example_4_3" => Ok(min_laplacians(dim)),
        "example_4_2" if dim == 2 => Ok(tangential_drift()),
        "example_4_2" => bail!("config operator.builtin: `example_4_2` needs a two-dimensional domain"),
        _ => bail!(
            "config operator.builtin: unknown operator `{name}` (expected laplacian, example_4_2, example_4_3, pucci_minus(g,G) or pucci_plus(g,G))"
        ),
    }
}

fn field_error(path: &str, e: CoreError) -> anyhow::Error {
    anyhow!("config {path}: {e}")
}

fn expr(src: &str, path: &str) -> Result<Expr> {
    parse_expr(src).map_err(|e| field_error(path, e))
}

fn sample(grid: &Grid, src: &str, path: &str) -> Result<GridFunction> {
    let e = expr(src, path)?;
    let values = e.sample_checked(grid).map_err(|err| field_error(path, err))?;
    grid.function(values).map_err(|err| field_error(path, err))
}

/// Validated problem ready for the commands.
pub struct Problem {
    pub grid: Grid,
    pub op: BellmanOperator,
    pub f: Option<GridFunction>,
    pub h: Option<GridFunction>,
    pub candidates: Vec<SelectionRule>,
}

impl Problem {
    pub fn forcing(&self) -> Result<&GridFunction> {
        self.f.as_ref().ok_or_else(|| anyhow!("config f: required for this command"))
    }
}
