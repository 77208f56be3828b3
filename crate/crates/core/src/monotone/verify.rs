use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fraccalc::{differentiate, GridFunction, RlIntegral};
use crate::solver::{FihieOperator, State};
use crate::problem::ProblemSpec;

/// Which variant of the mixed split a pair is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedKind {
    /// `σ` sees `ℵ₁(σ) + ℵ₂(ρ)`, `ρ` sees `ℵ₁(ρ) + ℵ₂(σ)`.
    A,
    /// `σ` sees `ℵ₁(ρ) + ℵ₂(σ)`, `ρ` sees `ℵ₁(σ) + ℵ₂(ρ)`.
    B,
}

impl std::fmt::Display for MixedKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MixedKind::A => "A",
            MixedKind::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Slack on the sign of the discrete defect.
    pub tol_defect: f64,
    /// Slack on the comparison with `v0` at `s0`.
    pub tol_initial: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tol_defect: 1e-6,
            tol_initial: 1e-9,
        }
    }
}

/// Defect of one curve against one right-hand side.
///
/// The defect is `D^α[u - u(s0)] - F` with `u = x - ψ(s, x, x∘x)`, sampled at
/// the interior nodes; node 0 and the last node carry 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub role: Role,
    pub passes: bool,
    /// Largest defect for a lower role, smallest for an upper role.
    pub worst_defect: f64,
    pub worst_node: usize,
    pub max_abs_defect: f64,
    pub initial_value: f64,
    pub initial_ok: bool,
    /// Positive when the role fails; the amount by which it fails.
    pub worst_violation: f64,
    pub witness_node: usize,
    #[serde(skip)]
    pub defects: Vec<f64>,
}

impl DefectReport {
    fn build(role: Role, defects: Vec<f64>, x0: f64, v0: f64, cfg: &VerifyConfig) -> Self {
        let sign = match role {
            Role::Lower => 1.0,
            Role::Upper => -1.0,
        };
        let n = defects.len();
        let mut worst_node = if n > 2 { 1 } else { 0 };
        let mut worst = f64::NEG_INFINITY;
        let mut max_abs = 0.0_f64;
        for (i, &d) in defects.iter().enumerate().take(n.saturating_sub(1)).skip(1) {
            max_abs = max_abs.max(d.abs());
            if sign * d > worst {
                worst = sign * d;
                worst_node = i;
            }
        }
        if n <= 2 {
            worst = 0.0;
        }
        let init_excess = sign * (x0 - v0) - cfg.tol_initial;
        let defect_excess = worst - cfg.tol_defect;
        let (worst_violation, witness_node) = if init_excess > defect_excess {
            (init_excess, 0)
        } else {
            (defect_excess, worst_node)
        };
        Self {
            role,
            passes: worst_violation <= 0.0,
            worst_defect: sign * worst,
            worst_node,
            max_abs_defect: max_abs,
            initial_value: x0,
            initial_ok: init_excess <= 0.0,
            worst_violation,
            witness_node,
            defects,
        }
    }

    fn describe(&self, label: &str) -> String {
        format!(
            "{label} as {:?}: worst defect {:e} at node {}, value at s0 {} ({})",
            self.role,
            self.worst_defect,
            self.worst_node,
            self.initial_value,
            if self.initial_ok { "ok" } else { "wrong side of v0" }
        )
    }
}

/// Both halves of a mixed pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedPairReport {
    pub kind: MixedKind,
    pub sigma: DefectReport,
    pub rho: DefectReport,
    pub passes: bool,
    pub worst_violation: f64,
    pub witness_node: usize,
    /// Both defects vanish to within tolerance and both curves start at `v0`.
    pub mixed_solution: bool,
}

impl MixedPairReport {
    pub fn summary(&self) -> String {
        format!(
            "kind {}: {}; {}",
            self.kind,
            self.sigma.describe("sigma"),
            self.rho.describe("rho")
        )
    }

    pub fn is_mixed_solution(&self) -> bool {
        self.mixed_solution
    }
}

pub(crate) struct DefectEngine<'a, 'p> {
    op: &'a FihieOperator<'p>,
    complement: RlIntegral,
}

impl<'a, 'p> DefectEngine<'a, 'p> {
    pub(crate) fn new(op: &'a FihieOperator<'p>) -> Result<Self> {
        let complement = RlIntegral::new(*op.grid(), 1.0 - op.problem().alpha())?;
        Ok(Self { op, complement })
    }

    /// `D^α[u - u(s0)]` for `u = x - ψ(s, x, x∘x)`.
    fn derivative(&self, st: &State<'_>) -> Result<Vec<f64>> {
        let psi = self.op.psi_term(st)?;
        let u: Vec<f64> = st.x.values().iter().zip(&psi).map(|(x, q)| x - q).collect();
        let u0 = u[0];
        let shifted: Vec<f64> = u.iter().map(|x| x - u0).collect();
        let g = self.complement.apply(&shifted)?;
        Ok(differentiate(&g, self.op.grid().h()))
    }

    /// Defect of `x` against `ℵ₁(s, a, a∘a) + ℵ₂(s, b, b∘b)`.
    pub(crate) fn defect(&self, x: &State<'_>, a: &State<'_>, b: &State<'_>) -> Result<Vec<f64>> {
        let d = self.derivative(x)?;
        let f = self.op.split_rhs(a, b)?;
        let n = d.len() - 1;
        Ok((0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { d[i] - f[i] })
            .collect())
    }
}

/// Checks that `x` is a lower or upper solution on the grid it is sampled on.
pub fn verify_lower_upper(
    p: &ProblemSpec,
    x: &GridFunction,
    role: Role,
    cfg: &VerifyConfig,
) -> Result<DefectReport> {
    let op = FihieOperator::new(p, *x.grid())?;
    let engine = DefectEngine::new(&op)?;
    let st = op.state(x)?;
    let defects = engine.defect(&st, &st, &st)?;
    Ok(DefectReport::build(role, defects, x.values()[0], p.v0(), cfg))
}

/// Checks the coupled inequalities that make `(σ, ρ)` a mixed lower/upper pair.
pub fn verify_mixed_pair(
    p: &ProblemSpec,
    sigma: &GridFunction,
    rho: &GridFunction,
    kind: MixedKind,
    cfg: &VerifyConfig,
) -> Result<MixedPairReport> {
    let op = FihieOperator::new(p, *sigma.grid())?;
    op.check_grid(rho)?;
    let engine = DefectEngine::new(&op)?;
    let ss = op.state(sigma)?;
    let rs = op.state(rho)?;
    let (ds, dr) = match kind {
        MixedKind::A => (engine.defect(&ss, &ss, &rs)?, engine.defect(&rs, &rs, &ss)?),
        MixedKind::B => (engine.defect(&ss, &rs, &ss)?, engine.defect(&rs, &ss, &rs)?),
    };
    let sigma_rep = DefectReport::build(Role::Lower, ds, sigma.values()[0], p.v0(), cfg);
    let rho_rep = DefectReport::build(Role::Upper, dr, rho.values()[0], p.v0(), cfg);
    let (worst_violation, witness_node) = if sigma_rep.worst_violation >= rho_rep.worst_violation {
        (sigma_rep.worst_violation, sigma_rep.witness_node)
    } else {
        (rho_rep.worst_violation, rho_rep.witness_node)
    };
    let solved = |r: &DefectReport| {
        r.max_abs_defect <= cfg.tol_defect && (r.initial_value - p.v0()).abs() <= cfg.tol_initial
    };
    Ok(MixedPairReport {
        kind,
        passes: sigma_rep.passes && rho_rep.passes,
        mixed_solution: solved(&sigma_rep) && solved(&rho_rep),
        worst_violation,
        witness_node,
        sigma: sigma_rep,
        rho: rho_rep,
    })
}
