//! Scenario files: a TOML description of one problem plus the settings of
//! every command that can run on it.
//!
//! Loading validates everything up front. [`Scenario::to_toml`] writes the
//! normalized form, which loads back to an identical value.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{self, Var};
use crate::fraccalc::{DomainPolicy, Grid, GridFunction, Interp};
use crate::monotone::{MixedKind, MonotoneConfig, UniquenessConfig, VerifyConfig};
use crate::problem::{ProblemSpec, SamplingBox};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<BracketSection>,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn zero() -> String {
    "0".into()
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub alpha: f64,
    #[serde(default)]
    pub s0: f64,
    pub a: f64,
    pub v0: f64,
    #[serde(default = "zero")]
    pub psi: String,
    #[serde(default = "zero")]
    pub aleph1: String,
    #[serde(default = "zero")]
    pub aleph2: String,
    #[serde(default = "one")]
    pub ell: f64,
    #[serde(default = "one", rename = "M")]
    pub big_m: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<f64>,
    #[serde(default)]
    pub domain_policy: DomainPolicy,
    #[serde(default)]
    pub interp: Interp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Number of grid intervals.
    pub n: usize,
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_tol: f64,
    pub relaxation: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            n: 512,
            tol: c.tol,
            max_outer: c.max_outer,
            max_inner: c.max_inner,
            inner_tol: c.inner_tol,
            relaxation: c.relaxation,
        }
    }
}

fn kind_a() -> MixedKind {
    MixedKind::A
}
fn default_width_tol() -> f64 {
    MonotoneConfig::default().width_tol
}
fn default_max_steps() -> usize {
    MonotoneConfig::default().max_steps
}
fn default_tol_defect() -> f64 {
    VerifyConfig::default().tol_defect
}
fn default_tol_initial() -> f64 {
    VerifyConfig::default().tol_initial
}
fn yes() -> bool {
    true
}
fn every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSection {
    #[serde(default = "kind_a")]
    pub kind: MixedKind,
    /// Initial lower curve, an expression in `s` only.
    pub sigma0: String,
    /// Initial upper curve, an expression in `s` only.
    pub rho0: String,
    #[serde(default = "default_width_tol")]
    pub width_tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_order: Option<f64>,
    #[serde(default = "default_tol_defect")]
    pub tol_defect: f64,
    #[serde(default = "default_tol_initial")]
    pub tol_initial: f64,
    #[serde(default = "yes")]
    pub enforce_precondition: bool,
    /// Keep every `thin`-th iterate in the iterate CSV (the last one is always kept).
    #[serde(default = "every")]
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    /// State range of the sampling box; defaults to `v0 ± 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_hi: Option<f64>,
    pub s_samples: usize,
    pub v_samples: usize,
    pub w_samples: usize,
    pub collapse_tol: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            v_lo: None,
            v_hi: None,
            s_samples: 21,
            v_samples: 41,
            w_samples: 21,
            collapse_tol: UniquenessConfig::default().collapse_tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn normalize_expr(field: &str, text: &str, s_only: bool) -> Result<String> {
    let e = expr::parse(text).map_err(|e| Error::Config(format!("{field}: {e}")))?;
    if s_only && (e.uses(Var::V) || e.uses(Var::W)) {
        return Err(Error::Config(format!("{field}: initial curves may only depend on s")));
    }
    Ok(e.to_string())
}

impl Scenario {
    /// Parses, normalizes and validates a scenario.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.normalize()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn normalize(mut self) -> Result<Self> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        let p = &mut self.problem;
        p.psi = normalize_expr("problem.psi", &p.psi, false)?;
        p.aleph1 = normalize_expr("problem.aleph1", &p.aleph1, false)?;
        p.aleph2 = normalize_expr("problem.aleph2", &p.aleph2, false)?;
        if let Some(b) = &mut self.bracket {
            b.sigma0 = normalize_expr("bracket.sigma0", &b.sigma0, true)?;
            b.rho0 = normalize_expr("bracket.rho0", &b.rho0, true)?;
            if b.thin == 0 {
                return Err(Error::Config("bracket.thin must be at least 1".into()));
            }
        }
        if self.solver.n < 2 {
            return Err(Error::Config("solver.n must be at least 2".into()));
        }
        self.problem()?;
        self.solver_config().validate()?;
        if let Some(m) = self.monotone_config() {
            m.validate()?;
        }
        if let (Some(lo), Some(hi)) = (self.checks.v_lo, self.checks.v_hi) {
            if !(lo < hi) {
                return Err(Error::Config("checks.v_lo must be below checks.v_hi".into()));
            }
        }
        Ok(self)
    }

    /// The normalized form; loading it back yields an identical scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable")
    }

    /// SHA-256 of the normalized form, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let mut b = ProblemSpec::builder(p.alpha, p.s0, p.a, p.v0)
            .psi(&p.psi)
            .aleph1(&p.aleph1)
            .aleph2(&p.aleph2)
            .constants(p.ell, p.big_m, p.kappa)
            .domain_policy(p.domain_policy)
            .interp(p.interp);
        match (p.n1, p.n2) {
            (Some(n1), Some(n2)) => b = b.uniqueness(n1, n2),
            (None, None) => {}
            _ => return Err(Error::Config("problem.n1 and problem.n2 go together".into())),
        }
        b.build()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.s0, self.problem.a, self.solver.n)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            tol: s.tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            inner_tol: s.inner_tol,
            relaxation: s.relaxation,
        }
    }

    pub fn monotone_config(&self) -> Option<MonotoneConfig> {
        self.bracket.as_ref().map(|b| MonotoneConfig {
            width_tol: b.width_tol,
            max_steps: b.max_steps,
            tol_order: b.tol_order,
            verify: self.verify_config(),
            enforce_precondition: b.enforce_precondition,
            keep_iterates: true,
        })
    }

    pub fn verify_config(&self) -> VerifyConfig {
        match &self.bracket {
            Some(b) => VerifyConfig {
                tol_defect: b.tol_defect,
                tol_initial: b.tol_initial,
            },
            None => VerifyConfig::default(),
        }
    }

    pub fn kind(&self) -> MixedKind {
        self.bracket.as_ref().map_or(MixedKind::A, |b| b.kind)
    }

    /// Samples the initial curves on `grid`.
    pub fn bracket_pair(&self, grid: Grid) -> Result<Option<(GridFunction, GridFunction)>> {
        let Some(b) = &self.bracket else {
            return Ok(None);
        };
        let curve = |field: &str, text: &str| -> Result<GridFunction> {
            let e = expr::parse(text)?;
            let values = grid
                .nodes()
                .map(|s| e.eval(s, 0.0, 0.0).map_err(|err| Error::Config(format!("{field}: {err}"))))
                .collect::<Result<Vec<_>>>()?;
            GridFunction::new(grid, values, self.problem.interp)
        };
        Ok(Some((curve("bracket.sigma0", &b.sigma0)?, curve("bracket.rho0", &b.rho0)?)))
    }

    pub fn sampling_box(&self) -> SamplingBox {
        let c = &self.checks;
        let lo = c.v_lo.unwrap_or(self.problem.v0 - 1.0);
        let hi = c.v_hi.unwrap_or(self.problem.v0 + 1.0);
        SamplingBox::new(lo, hi).with_resolution(c.s_samples, c.v_samples, c.w_samples)
    }

    pub fn uniqueness_config(&self) -> UniquenessConfig {
        UniquenessConfig {
            collapse_tol: self.checks.collapse_tol,
            ..UniquenessConfig::default()
        }
    }
}
