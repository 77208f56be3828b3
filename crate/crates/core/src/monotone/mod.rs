//! Monotone iteration from a mixed lower/upper pair.
//!
//! Each step solves two implicit problems of the form
//! `x = c(x) + ψ(s, x, x∘x) + I^α[ℵ₁(·, a) + ℵ₂(·, b)]`, where the pair
//! `(a, b)` is taken from the previous iterates according to the kind.

mod verify;

pub use verify::{
    verify_lower_upper, verify_mixed_pair, DefectReport, MixedKind, MixedPairReport, Role,
    VerifyConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccalc::{sup_dist, GridFunction};
use crate::problem::ProblemSpec;
use crate::solver::{FihieOperator, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonotoneConfig {
    /// Stop once `‖ρ - σ‖∞` (or every subsequence increment, for kind B) falls below this.
    pub width_tol: f64,
    pub max_steps: usize,
    /// Ordering slack; `None` means `10 (inner_tol + h²)`.
    pub tol_order: Option<f64>,
    pub verify: VerifyConfig,
    /// Refuse to iterate from a pair that fails verification.
    pub enforce_precondition: bool,
    pub keep_iterates: bool,
}

impl Default for MonotoneConfig {
    fn default() -> Self {
        Self {
            width_tol: 1e-6,
            max_steps: 200,
            tol_order: None,
            verify: VerifyConfig::default(),
            enforce_precondition: true,
            keep_iterates: true,
        }
    }
}

impl MonotoneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_tol > 0.0) {
            return Err(Error::Config("width_tol must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let Some(t) = self.tol_order {
            if !(t >= 0.0) {
                return Err(Error::Config("tol_order must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn order_slack(&self, solver: &SolverConfig, h: f64) -> f64 {
        self.tol_order.unwrap_or(10.0 * (solver.inner_tol + h * h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketState {
    pub sigma: GridFunction,
    pub rho: GridFunction,
    pub t: usize,
    pub width: f64,
    /// `σ ≤ ρ` for kind A and even kind-B steps, `ρ ≤ σ` for odd kind-B steps.
    pub ordered: bool,
}

impl BracketState {
    pub fn new(sigma: GridFunction, rho: GridFunction) -> Result<Self> {
        sigma.grid().ensure_same(rho.grid())?;
        let width = sup_dist(sigma.values(), rho.values());
        let ordered = first_excess(&sigma, &rho).is_none_or(|(_, m)| m <= 0.0);
        Ok(Self {
            sigma,
            rho,
            t: 0,
            width,
            ordered,
        })
    }
}

/// A pointwise ordering that failed during the iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderViolation {
    pub t: usize,
    pub node: usize,
    pub s: f64,
    pub relation: String,
    pub magnitude: f64,
}

/// Largest `lo - hi` over the nodes, if positive anywhere.
fn first_excess(lo: &GridFunction, hi: &GridFunction) -> Option<(usize, f64)> {
    lo.values()
        .iter()
        .zip(hi.values())
        .map(|(a, b)| a - b)
        .enumerate()
        .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
            Some((_, m)) if m >= d => acc,
            _ => Some((i, d)),
        })
}

fn check_le(
    t: usize,
    lo: &GridFunction,
    hi: &GridFunction,
    relation: &str,
    slack: f64,
) -> Option<OrderViolation> {
    let (node, m) = first_excess(lo, hi)?;
    (m > slack).then(|| OrderViolation {
        t,
        node,
        s: lo.grid().node(node),
        relation: relation.into(),
        magnitude: m,
    })
}

struct Stepper<'a, 'p> {
    op: &'a FihieOperator<'p>,
    solver: &'a SolverConfig,
}

impl Stepper<'_, '_> {
    /// Solves `x = c(x) + ψ(x) + I^α[ℵ₁(a) + ℵ₂(b)]` starting from `init`.
    fn solve(&self, a: &GridFunction, b: &GridFunction, init: &GridFunction) -> Result<GridFunction> {
        let sa = self.op.state(a)?;
        let sb = self.op.state(b)?;
        let load = self.op.integral().apply(&self.op.split_rhs(&sa, &sb)?)?;
        self.op.implicit(&load, true, init.clone(), self.solver)
    }

    fn step(&self, state: &BracketState, kind: MixedKind) -> Result<BracketState> {
        let (sig, rho) = (&state.sigma, &state.rho);
        let (next_sigma, next_rho) = match kind {
            MixedKind::A => rayon::join(|| self.solve(sig, rho, sig), || self.solve(rho, sig, rho)),
            MixedKind::B => rayon::join(|| self.solve(rho, sig, sig), || self.solve(sig, rho, rho)),
        };
        let (sigma, rho) = (next_sigma?, next_rho?);
        let t = state.t + 1;
        let width = sup_dist(sigma.values(), rho.values());
        let ordered = match (kind, t % 2) {
            (MixedKind::B, 1) => first_excess(&rho, &sigma),
            _ => first_excess(&sigma, &rho),
        }
        .is_none_or(|(_, m)| m <= 0.0);
        Ok(BracketState {
            sigma,
            rho,
            t,
            width,
            ordered,
        })
    }
}

fn chain_a(prev: &BracketState, next: &BracketState, slack: f64) -> Option<OrderViolation> {
    let t = next.t;
    check_le(t, &prev.sigma, &next.sigma, "sigma_t <= sigma_t+1", slack)
        .or_else(|| check_le(t, &next.sigma, &next.rho, "sigma_t+1 <= rho_t+1", slack))
        .or_else(|| check_le(t, &next.rho, &prev.rho, "rho_t+1 <= rho_t", slack))
}

/// One kind-A step; the chain `σ_t ≤ σ_{t+1} ≤ ρ_{t+1} ≤ ρ_t` is enforced.
pub fn step_type_a(
    p: &ProblemSpec,
    state: &BracketState,
    solver: &SolverConfig,
    cfg: &MonotoneConfig,
) -> Result<BracketState> {
    let op = FihieOperator::new(p, *state.sigma.grid())?;
    let next = Stepper { op: &op, solver }.step(state, MixedKind::A)?;
    let slack = cfg.order_slack(solver, op.grid().h());
    match chain_a(state, &next, slack) {
        Some(v) => Err(ordering_error(v)),
        None => Ok(next),
    }
}

/// One kind-B step: `σ` is driven by `ℵ₁(ρ) + ℵ₂(σ)` and `ρ` by `ℵ₁(σ) + ℵ₂(ρ)`.
pub fn step_type_b(p: &ProblemSpec, state: &BracketState, solver: &SolverConfig) -> Result<BracketState> {
    let op = FihieOperator::new(p, *state.sigma.grid())?;
    Stepper { op: &op, solver }.step(state, MixedKind::B)
}

fn ordering_error(v: OrderViolation) -> Error {
    Error::Ordering {
        t: v.t,
        node: v.node,
        relation: v.relation,
        magnitude: v.magnitude,
    }
}

/// Residual of one limit relation in integral form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDefect {
    pub equation: String,
    pub residual: f64,
}

/// Even and odd limits of a kind-B run.
#[derive(Debug, Clone, PartialEq)]
pub struct KindBLimits {
    pub sigma: GridFunction,
    pub rho: GridFunction,
    pub sigma_odd: GridFunction,
    pub rho_odd: GridFunction,
}

#[derive(Debug, Clone)]
pub struct BracketReport {
    pub kind: MixedKind,
    pub steps: usize,
    pub converged: bool,
    pub width_history: Vec<f64>,
    pub violations: Vec<OrderViolation>,
    pub tol_order: f64,
    pub sigma: GridFunction,
    pub rho: GridFunction,
    /// Even and odd limits, kind B only.
    pub limits: Option<KindBLimits>,
    pub limit_defects: Vec<LimitDefect>,
    pub precondition: MixedPairReport,
    pub precondition_overridden: bool,
    /// `(t, σ_t, ρ_t)`, including `t = 0`, when iterates are kept.
    pub iterates: Vec<(usize, GridFunction, GridFunction)>,
    pub notes: Vec<String>,
}

/// Serializable digest of a [`BracketReport`].
#[derive(Debug, Clone, Serialize)]
pub struct BracketSummary {
    pub kind: MixedKind,
    pub steps: usize,
    pub converged: bool,
    pub final_width: f64,
    pub width_history: Vec<f64>,
    pub violations: Vec<OrderViolation>,
    pub tol_order: f64,
    pub limit_defects: Vec<LimitDefect>,
    pub precondition: MixedPairReport,
    pub precondition_overridden: bool,
    pub notes: Vec<String>,
}

impl BracketReport {
    pub fn summary(&self) -> BracketSummary {
        BracketSummary {
            kind: self.kind,
            steps: self.steps,
            converged: self.converged,
            final_width: self.width_history.last().copied().unwrap_or(f64::NAN),
            width_history: self.width_history.clone(),
            violations: self.violations.clone(),
            tol_order: self.tol_order,
            limit_defects: self.limit_defects.clone(),
            precondition: self.precondition.clone(),
            precondition_overridden: self.precondition_overridden,
            notes: self.notes.clone(),
        }
    }

    pub fn final_width(&self) -> f64 {
        self.width_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Kind-B expectations: even `σ` rise, odd `σ` fall, evens stay below odds; mirrored for `ρ`.
fn interleave_b(hist: &[BracketState], slack: f64) -> Vec<OrderViolation> {
    let last = hist.len() - 1;
    let cur = &hist[last];
    let t = cur.t;
    let mut out = Vec::new();
    let mut push = |v: Option<OrderViolation>| out.extend(v);
    if last >= 2 {
        let old = &hist[last - 2];
        if t % 2 == 0 {
            push(check_le(t, &old.sigma, &cur.sigma, "sigma even iterates non-decreasing", slack));
            push(check_le(t, &cur.rho, &old.rho, "rho even iterates non-increasing", slack));
        } else {
            push(check_le(t, &cur.sigma, &old.sigma, "sigma odd iterates non-increasing", slack));
            push(check_le(t, &old.rho, &cur.rho, "rho odd iterates non-decreasing", slack));
        }
    }
    if last >= 1 {
        let prev = &hist[last - 1];
        let (even, odd) = if t % 2 == 0 { (cur, prev) } else { (prev, cur) };
        push(check_le(t, &even.sigma, &odd.sigma, "sigma even below sigma odd", slack));
        push(check_le(t, &odd.rho, &even.rho, "rho odd below rho even", slack));
    }
    out
}

fn converged_b(hist: &[BracketState], tol: f64) -> bool {
    let t = hist.len() - 1;
    if hist[t].width <= tol {
        return true;
    }
    // Needs two increments of each parity, so four states in the window.
    if t < 3 {
        return false;
    }
    let inc = |i: usize| {
        sup_dist(hist[i].sigma.values(), hist[i - 2].sigma.values())
            .max(sup_dist(hist[i].rho.values(), hist[i - 2].rho.values()))
    };
    inc(t) <= tol && inc(t - 1) <= tol
}

/// Integral-form residual of `x = c(x) + ψ(x) + I^α[ℵ₁(a) + ℵ₂(b)]`.
fn limit_residual(
    op: &FihieOperator<'_>,
    x: &GridFunction,
    a: &GridFunction,
    b: &GridFunction,
) -> Result<f64> {
    let (sx, sa, sb) = (op.state(x)?, op.state(a)?, op.state(b)?);
    let load = op.integral().apply(&op.split_rhs(&sa, &sb)?)?;
    let g = op.apply_with(&sx, &load)?;
    Ok(sup_dist(&g, x.values()))
}

/// Runs the monotone iteration from `(σ0, ρ0)`.
pub fn iterate_extremal(
    p: &ProblemSpec,
    sigma0: &GridFunction,
    rho0: &GridFunction,
    kind: MixedKind,
    solver: &SolverConfig,
    cfg: &MonotoneConfig,
) -> Result<BracketReport> {
    solver.validate()?;
    cfg.validate()?;
    let op = FihieOperator::new(p, *sigma0.grid())?;
    op.check_grid(rho0)?;
    let precondition = verify_mixed_pair(p, sigma0, rho0, kind, &cfg.verify)?;
    let init = BracketState::new(sigma0.clone(), rho0.clone())?;
    if !(precondition.passes && init.ordered) && cfg.enforce_precondition {
        let mut msg = precondition.summary();
        if !init.ordered {
            msg.push_str("; sigma0 is not below rho0");
        }
        return Err(Error::Precondition(msg));
    }
    let precondition_overridden = !(precondition.passes && init.ordered);
    let slack = cfg.order_slack(solver, op.grid().h());
    let stepper = Stepper { op: &op, solver };

    let mut width_history = vec![init.width];
    let mut violations = Vec::new();
    let mut iterates = Vec::new();
    if cfg.keep_iterates {
        iterates.push((0, init.sigma.clone(), init.rho.clone()));
    }
    let mut hist = vec![init];
    let mut converged = precondition.mixed_solution || hist[0].width <= cfg.width_tol;

    while !converged && hist.len() <= cfg.max_steps {
        let cur = hist.last().expect("history is never empty");
        let next = stepper.step(cur, kind)?;
        if kind == MixedKind::A {
            if let Some(v) = chain_a(cur, &next, slack) {
                return Err(ordering_error(v));
            }
        }
        width_history.push(next.width);
        if cfg.keep_iterates {
            iterates.push((next.t, next.sigma.clone(), next.rho.clone()));
        }
        if kind == MixedKind::A {
            hist = vec![next];
            converged = hist[0].width <= cfg.width_tol;
        } else {
            hist.push(next);
            violations.extend(interleave_b(&hist, slack));
            converged = converged_b(&hist, cfg.width_tol);
            if hist.len() > 4 {
                hist.remove(0);
            }
        }
    }

    let last = hist.last().expect("history is never empty");
    let steps = last.t;
    let (sigma, rho) = (last.sigma.clone(), last.rho.clone());
    let limits = (kind == MixedKind::B && steps >= 1).then(|| {
        let prev = &hist[hist.len() - 2];
        let (even, odd) = if steps % 2 == 0 { (last, prev) } else { (prev, last) };
        KindBLimits {
            sigma: even.sigma.clone(),
            rho: even.rho.clone(),
            sigma_odd: odd.sigma.clone(),
            rho_odd: odd.rho.clone(),
        }
    });

    let mut limit_defects = Vec::new();
    let mut record = |name: &str, x: &GridFunction, a: &GridFunction, b: &GridFunction| -> Result<()> {
        limit_defects.push(LimitDefect {
            equation: name.into(),
            residual: limit_residual(&op, x, a, b)?,
        });
        Ok(())
    };
    match &limits {
        None => {
            record("sigma = T[aleph1(sigma) + aleph2(rho)]", &sigma, &sigma, &rho)?;
            record("rho = T[aleph1(rho) + aleph2(sigma)]", &rho, &rho, &sigma)?;
        }
        Some(l) => {
            record("sigma = T[aleph1(rho) + aleph2(sigma)]", &l.sigma, &l.rho, &l.sigma)?;
            record("rho = T[aleph1(sigma) + aleph2(rho)]", &l.rho, &l.sigma, &l.rho)?;
            record(
                "sigma_odd = T[aleph1(rho_odd) + aleph2(sigma_odd)]",
                &l.sigma_odd,
                &l.rho_odd,
                &l.sigma_odd,
            )?;
            record(
                "rho_odd = T[aleph1(sigma_odd) + aleph2(rho_odd)]",
                &l.rho_odd,
                &l.sigma_odd,
                &l.rho_odd,
            )?;
        }
    }

    let mut notes = Vec::new();
    if precondition_overridden {
        notes.push("initial pair failed verification; iterated anyway".into());
    }
    match kind {
        MixedKind::A => notes.push(
            "limit relations use aleph1 on the own curve and aleph2 on the partner".into(),
        ),
        MixedKind::B => notes.push(
            "one cross-coupled step map is applied at every t; even and odd iterates are \
             tracked separately and the odd limits are reported as sigma_odd, rho_odd"
                .into(),
        ),
    }

    Ok(BracketReport {
        kind,
        steps,
        converged,
        width_history,
        violations,
        tol_order: slack,
        sigma,
        rho,
        limits,
        limit_defects,
        precondition,
        precondition_overridden,
        iterates,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessConfig {
    pub s_samples: usize,
    pub v_samples: usize,
    pub w_samples: usize,
    /// Width below which the two limits are considered equal.
    pub collapse_tol: f64,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        Self {
            s_samples: 21,
            v_samples: 41,
            w_samples: 11,
            collapse_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessCondition {
    pub name: String,
    pub holds: bool,
    pub worst_violation: f64,
    /// `(s, x1, x2, w)` attaining the worst violation.
    pub witness: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub n1: f64,
    pub n2: f64,
    pub v_range: [f64; 2],
    pub conditions: Vec<UniquenessCondition>,
    pub conditions_hold: bool,
    pub width: f64,
    pub collapsed: bool,
    /// Both conditions hold on the sampled range and the limits coincide.
    pub passes: bool,
}

/// Samples the one-sided Lipschitz conditions with constants `N1`, `N2` on
/// the range spanned by the limits and reports whether the limits collapse.
///
/// For `x1 ≥ x2` and `Δu = (x1 - ψ(x1)) - (x2 - ψ(x2))` the conditions are
/// `ℵ₁(x1) - ℵ₁(x2) ≤ N1 Δu` and `ℵ₂(x2) - ℵ₂(x1) ≤ N2 Δu`.
pub fn check_uniqueness(
    p: &ProblemSpec,
    sigma: &GridFunction,
    rho: &GridFunction,
    cfg: &UniquenessConfig,
) -> Result<UniquenessReport> {
    let (Some(n1), Some(n2)) = (p.n1(), p.n2()) else {
        return Err(Error::Config("uniqueness check needs N1 and N2".into()));
    };
    sigma.grid().ensure_same(rho.grid())?;
    let lo = sigma.values().iter().chain(rho.values()).copied().fold(f64::INFINITY, f64::min);
    let hi = sigma.values().iter().chain(rho.values()).copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = |a: f64, b: f64, n: usize| -> Vec<f64> {
        if n < 2 || a == b {
            return vec![a];
        }
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    };
    let ss = spread(p.s0(), p.s0() + p.length(), cfg.s_samples.max(2));
    let xs = spread(lo, hi, cfg.v_samples);
    let ws = spread(lo, hi, cfg.w_samples);

    let mut worst = [(f64::NEG_INFINITY, [f64::NAN; 4]); 2];
    for &s in &ss {
        for &w in &ws {
            let u: Vec<f64> = xs
                .iter()
                .map(|&x| Ok(x - p.psi().eval(s, x, w)?))
                .collect::<Result<_>>()?;
            let a1: Vec<f64> = xs.iter().map(|&x| p.aleph1().eval(s, x, w)).collect::<Result<_>>()?;
            let a2: Vec<f64> = xs.iter().map(|&x| p.aleph2().eval(s, x, w)).collect::<Result<_>>()?;
            // xs is increasing, so k > j means x1 = xs[k] >= x2 = xs[j].
            for j in 0..xs.len() {
                for k in j + 1..xs.len() {
                    let du = u[k] - u[j];
                    let scale = 1e-12 * (1.0 + a1[k].abs().max(a1[j].abs()).max(a2[k].abs()).max(a2[j].abs()));
                    let e1 = a1[k] - a1[j] - n1 * du - scale;
                    let e2 = a2[j] - a2[k] - n2 * du - scale;
                    for (slot, e) in [e1, e2].into_iter().enumerate() {
                        if e > worst[slot].0 {
                            worst[slot] = (e, [s, xs[k], xs[j], w]);
                        }
                    }
                }
            }
        }
    }
    let conditions: Vec<UniquenessCondition> = ["N1", "N2"]
        .iter()
        .zip(worst)
        .map(|(name, (value, witness))| {
            let value = if value.is_finite() { value } else { 0.0 };
            UniquenessCondition {
                name: (*name).into(),
                holds: value <= 0.0,
                worst_violation: value,
                witness,
            }
        })
        .collect();
    let conditions_hold = conditions.iter().all(|c| c.holds);
    let width = sup_dist(sigma.values(), rho.values());
    let collapsed = width <= cfg.collapse_tol;
    Ok(UniquenessReport {
        n1,
        n2,
        v_range: [lo, hi],
        conditions,
        conditions_hold,
        width,
        collapsed,
        passes: conditions_hold && collapsed,
    })
}
