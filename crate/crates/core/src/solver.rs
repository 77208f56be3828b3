//! Picard iteration on the integral form
//!
//! ```text
//! v(s) = [v0 - ψ(s0, v0, v(v0))] + ψ(s, v(s), v(v(s))) + I^α[ℵ(·, v, v∘v)](s)
//! ```
//!
//! and the implicit solve `w = g + ψ(s, w, w∘w)` used by the monotone steps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Var;
use crate::fraccalc::{
    compose_values, eval_with_policy, sup_dist, Grid, GridFunction, RlIntegral,
};
use crate::problem::{NamedExpr, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Sup-norm stopping tolerance on successive Picard iterates.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_tol: f64,
    /// Damping `λ` in `v ← (1 - λ) v + λ G(v)`.
    pub relaxation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 500,
            max_inner: 200,
            inner_tol: 1e-12,
            relaxation: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iters: usize,
    /// `‖v_k - G(v_k)‖∞` per outer step, ending with the returned iterate.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub escape_nodes: usize,
    /// Observed `‖v_{k+1} - v_k‖ / ‖v_k - v_{k-1}‖` over the last informative pair.
    pub contraction_estimate: f64,
    pub final_relaxation: f64,
}

// Consecutive growing updates tolerated before the damping is halved.
const NON_CONTRACTING_LIMIT: usize = 10;

/// Grid-bound pieces of the integral operator, shared by the solver and the monotone steps.
#[derive(Debug, Clone)]
pub struct FihieOperator<'p> {
    p: &'p ProblemSpec,
    grid: Grid,
    integral: RlIntegral,
    nodes: Vec<f64>,
}

/// `x` and its composed values `x(x(s_i))` (only computed when some expression reads `w`).
pub(crate) struct State<'a> {
    pub x: &'a GridFunction,
    pub w: Vec<f64>,
    pub escaped: Vec<usize>,
}

impl<'p> FihieOperator<'p> {
    pub fn new(p: &'p ProblemSpec, grid: Grid) -> Result<Self> {
        if !grid.same_as(&p.grid(grid.n())?) {
            return Err(Error::GridMismatch(format!(
                "grid [{}, {}] does not cover the problem interval [{}, {}]",
                grid.s0(),
                grid.end(),
                p.s0(),
                p.s0() + p.length()
            )));
        }
        Ok(Self {
            p,
            grid,
            integral: RlIntegral::new(grid, p.alpha())?,
            nodes: grid.nodes().collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.p
    }

    pub(crate) fn integral(&self) -> &RlIntegral {
        &self.integral
    }

    pub(crate) fn check_grid(&self, f: &GridFunction) -> Result<()> {
        self.grid.ensure_same(f.grid())
    }

    fn reads_w(e: &NamedExpr) -> bool {
        e.expr().uses(Var::W)
    }

    pub(crate) fn state<'a>(&self, x: &'a GridFunction) -> Result<State<'a>> {
        self.check_grid(x)?;
        let p = self.p;
        let needed = Self::reads_w(&p.psi) || Self::reads_w(&p.aleph1) || Self::reads_w(&p.aleph2);
        let (w, escaped) = if needed {
            compose_values(x, p.domain_policy())?
        } else {
            (vec![0.0; x.values().len()], Vec::new())
        };
        Ok(State { x, w, escaped })
    }

    /// `v0 - ψ(s0, v0, x(v0))`.
    pub(crate) fn anchor(&self, x: &GridFunction) -> Result<f64> {
        let p = self.p;
        let w0 = if Self::reads_w(&p.psi) {
            eval_with_policy(x, p.v0(), p.domain_policy())?.0
        } else {
            0.0
        };
        Ok(p.v0() - p.psi.eval(p.s0(), p.v0(), w0)?)
    }

    pub(crate) fn psi_term(&self, st: &State<'_>) -> Result<Vec<f64>> {
        self.sample(&self.p.psi, st)
    }

    pub(crate) fn sample(&self, e: &NamedExpr, st: &State<'_>) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .zip(st.x.values())
            .zip(&st.w)
            .map(|((&s, &v), &w)| e.eval(s, v, w))
            .collect()
    }

    /// `ℵ₁(s, x, x∘x) + ℵ₂(s, y, y∘y)` at the nodes.
    pub(crate) fn split_rhs(&self, x: &State<'_>, y: &State<'_>) -> Result<Vec<f64>> {
        let a1 = self.sample(&self.p.aleph1, x)?;
        let a2 = self.sample(&self.p.aleph2, y)?;
        Ok(a1.iter().zip(&a2).map(|(a, b)| a + b).collect())
    }

    /// `I^α[ℵ(·, x, x∘x)]`.
    pub(crate) fn forcing(&self, st: &State<'_>) -> Result<Vec<f64>> {
        self.integral.apply(&self.split_rhs(st, st)?)
    }

    /// `G(x)` given the state and a precomputed forcing.
    pub(crate) fn apply_with(&self, st: &State<'_>, forcing: &[f64]) -> Result<Vec<f64>> {
        let c = self.anchor(st.x)?;
        let psi = self.psi_term(st)?;
        Ok(psi.iter().zip(forcing).map(|(q, f)| c + q + f).collect())
    }

    /// `G(x)` and the nodes whose composed argument left the interval.
    pub fn apply(&self, x: &GridFunction) -> Result<(GridFunction, Vec<usize>)> {
        let st = self.state(x)?;
        let forcing = self.forcing(&st)?;
        let g = self.apply_with(&st, &forcing)?;
        Ok((x.with_values(g)?, st.escaped))
    }

    /// Solves `w = base + [anchor(w)] + ψ(s, w, w∘w)` by damped fixed-point iteration.
    ///
    /// With `anchored`, the initial-value constant `v0 - ψ(s0, v0, w(v0))` is
    /// re-evaluated from the current iterate at every sweep.
    pub(crate) fn implicit(
        &self,
        base: &[f64],
        anchored: bool,
        init: GridFunction,
        cfg: &SolverConfig,
    ) -> Result<GridFunction> {
        let lambda = cfg.relaxation;
        let mut w = init;
        let mut diff = f64::INFINITY;
        for _ in 0..cfg.max_inner {
            let st = self.state(&w)?;
            let c = if anchored { self.anchor(&w)? } else { 0.0 };
            let psi = self.psi_term(&st)?;
            let target: Vec<f64> = base.iter().zip(&psi).map(|(b, q)| b + c + q).collect();
            diff = sup_dist(&target, w.values());
            let next = if lambda == 1.0 {
                target
            } else {
                w.values()
                    .iter()
                    .zip(&target)
                    .map(|(x, t)| (1.0 - lambda) * x + lambda * t)
                    .collect()
            };
            w = w.with_values(next)?;
            if lambda * diff <= cfg.inner_tol {
                return Ok(w);
            }
        }
        Err(Error::ImplicitSolve {
            iterations: cfg.max_inner,
            residual: diff,
        })
    }
}

/// `G(v) = c + ψ(s, v, v∘v) + I^α ℵ(·, v, v∘v)`; `forcing` replaces the last term when given.
pub fn fihie_rhs(
    p: &ProblemSpec,
    v: &GridFunction,
    forcing: Option<&GridFunction>,
) -> Result<GridFunction> {
    let op = FihieOperator::new(p, *v.grid())?;
    match forcing {
        None => Ok(op.apply(v)?.0),
        Some(f) => {
            op.check_grid(f)?;
            let st = op.state(v)?;
            v.with_values(op.apply_with(&st, f.values())?)
        }
    }
}

/// `‖v - G(v)‖∞` over the nodes.
pub fn residual(p: &ProblemSpec, v: &GridFunction) -> Result<f64> {
    let op = FihieOperator::new(p, *v.grid())?;
    let (g, _) = op.apply(v)?;
    Ok(sup_dist(g.values(), v.values()))
}

/// Solves `w = g + ψ(s, w, w∘w)` pointwise on the grid, starting from `w = g`.
pub fn solve_implicit_pointwise(
    p: &ProblemSpec,
    g: &GridFunction,
    cfg: &SolverConfig,
) -> Result<GridFunction> {
    cfg.validate()?;
    let op = FihieOperator::new(p, *g.grid())?;
    op.implicit(g.values(), false, g.clone(), cfg)
}

/// Constant initial guess `v ≡ v0` on an `n`-interval grid.
pub fn default_initial(p: &ProblemSpec, n: usize) -> Result<GridFunction> {
    GridFunction::constant(p.grid(n)?, p.v0(), p.interp())
}

/// Damped Picard iteration; non-convergence is reported, not raised.
pub fn solve_fihie(
    p: &ProblemSpec,
    cfg: &SolverConfig,
    v_init: &GridFunction,
) -> Result<(GridFunction, SolveReport)> {
    cfg.validate()?;
    let op = FihieOperator::new(p, *v_init.grid())?;
    let mut v = v_init.clone();
    let mut lambda = cfg.relaxation;
    let mut history = Vec::new();
    let mut prev_update: Option<f64> = None;
    let mut contraction = 0.0;
    let mut growing = 0;
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_outer {
        iters += 1;
        let (g, _) = op.apply(&v)?;
        let r = sup_dist(g.values(), v.values());
        history.push(r);
        let next: Vec<f64> = if lambda == 1.0 {
            g.into_values()
        } else {
            v.values()
                .iter()
                .zip(g.values())
                .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                .collect()
        };
        let update = sup_dist(&next, v.values());
        v = v.with_values(next)?;

        if let Some(prev) = prev_update {
            let floor = 1e3 * f64::EPSILON * (1.0 + v.sup_norm());
            if prev > floor && update > floor {
                contraction = update / prev;
            }
            if update > prev {
                growing += 1;
                if growing >= NON_CONTRACTING_LIMIT && lambda > 0.5 {
                    lambda = 0.5;
                }
            }
        }
        prev_update = Some(update);
        if update <= cfg.tol {
            converged = true;
            break;
        }
    }

    let (g, escaped) = op.apply(&v)?;
    let final_residual = sup_dist(g.values(), v.values());
    history.push(final_residual);
    Ok((
        v,
        SolveReport {
            converged,
            outer_iters: iters,
            residual_history: history,
            final_residual,
            escape_nodes: escaped.len(),
            contraction_estimate: contraction,
            final_relaxation: lambda,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::{gamma_unchecked, DomainPolicy, Interp};

    fn simple(psi: &str, aleph: &str, v0: f64) -> ProblemSpec {
        ProblemSpec::builder(0.5, 0.0, 1.0, v0)
            .psi(psi)
            .aleph1(aleph)
            .build()
            .unwrap()
    }

    #[test]
    fn constant_solution_is_a_fixed_point() {
        let p = simple("0", "0", 0.7);
        let v = default_initial(&p, 64).unwrap();
        let g = fihie_rhs(&p, &v, None).unwrap();
        assert!(g.values().iter().all(|&x| x == 0.7));
        let (sol, rep) = solve_fihie(&p, &SolverConfig::default(), &v).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.outer_iters, 1);
        assert_eq!(rep.final_residual, 0.0);
        assert_eq!(residual(&p, &sol).unwrap(), 0.0);
    }

    #[test]
    fn state_independent_load() {
        let p = simple("0", "1", 0.0);
        let g = p.grid(128).unwrap();
        let v = GridFunction::from_fn(g, Interp::PchipMonotone, |s| (4.0 * s).cos()).unwrap();
        let out = fihie_rhs(&p, &v, None).unwrap();
        for (s, x) in g.nodes().zip(out.values()) {
            assert!((x - s.sqrt() / gamma_unchecked(1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_solution() {
        let p = ProblemSpec::builder(0.6, 0.0, 1.0, 0.25).aleph1("0.8").build().unwrap();
        let v = default_initial(&p, 256).unwrap();
        let (sol, rep) = solve_fihie(&p, &SolverConfig::default(), &v).unwrap();
        assert!(rep.converged);
        for (s, x) in sol.grid().nodes().zip(sol.values()) {
            let exact = 0.25 + 0.8 * s.powf(0.6) / gamma_unchecked(1.6);
            assert!((x - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_forcing_replaces_the_integral() {
        let p = simple("0.1*v", "5", 1.0);
        let g = p.grid(16).unwrap();
        let v = GridFunction::constant(g, 1.0, Interp::Linear).unwrap();
        let zero = GridFunction::constant(g, 0.0, Interp::Linear).unwrap();
        let out = fihie_rhs(&p, &v, Some(&zero)).unwrap();
        assert!(out.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn implicit_solve_examples() {
        let cfg = SolverConfig::default();
        let g = GridFunction::from_fn(simple("0", "0", 0.0).grid(32).unwrap(), Interp::Linear, |s| s * s)
            .unwrap();
        let w = solve_implicit_pointwise(&simple("0", "0", 0.0), &g, &cfg).unwrap();
        assert_eq!(w.values(), g.values());
        let w = solve_implicit_pointwise(&simple("0.25", "0", 0.0), &g, &cfg).unwrap();
        for (a, b) in w.values().iter().zip(g.values()) {
            assert_eq!(*a, b + 0.25);
        }
    }

    #[test]
    fn implicit_solve_reports_failure() {
        let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.0)
            .psi("0.9*sin(v)")
            .build()
            .unwrap();
        let g = GridFunction::constant(p.grid(8).unwrap(), 1.0, Interp::Linear).unwrap();
        let cfg = SolverConfig {
            max_inner: 2,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_implicit_pointwise(&p, &g, &cfg),
            Err(Error::ImplicitSolve { iterations: 2, .. })
        ));
    }

    #[test]
    fn non_convergence_is_a_status() {
        let p = simple("0", "v", 1.0);
        let cfg = SolverConfig {
            max_outer: 3,
            ..SolverConfig::default()
        };
        let (_, rep) = solve_fihie(&p, &cfg, &default_initial(&p, 32).unwrap()).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.outer_iters, 3);
        assert_eq!(rep.residual_history.len(), 4);
        assert_eq!(*rep.residual_history.last().unwrap(), rep.final_residual);
    }

    #[test]
    fn strict_policy_surfaces_escapes() {
        let p = ProblemSpec::builder(0.5, 0.0, 1.0, 2.0)
            .aleph1("w")
            .domain_policy(DomainPolicy::Strict)
            .build()
            .unwrap();
        let v = default_initial(&p, 8).unwrap();
        assert!(matches!(fihie_rhs(&p, &v, None), Err(Error::Range { .. })));
        let clamp = p.with_domain_policy(DomainPolicy::Clamp);
        let (_, rep) = solve_fihie(&clamp, &SolverConfig { max_outer: 5, ..Default::default() }, &v).unwrap();
        assert_eq!(rep.escape_nodes, 9);
    }

    #[test]
    fn rejects_bad_configs_and_grids() {
        let p = simple("0", "0", 0.0);
        let v = default_initial(&p, 8).unwrap();
        for cfg in [
            SolverConfig { tol: 0.0, ..Default::default() },
            SolverConfig { relaxation: 1.5, ..Default::default() },
            SolverConfig { max_outer: 0, ..Default::default() },
        ] {
            assert!(solve_fihie(&p, &cfg, &v).is_err());
        }
        let other = GridFunction::constant(Grid::new(0.0, 2.0, 8).unwrap(), 0.0, Interp::Linear).unwrap();
        assert!(matches!(residual(&p, &other), Err(Error::GridMismatch(_))));
    }
}
