use std::path::{Path, PathBuf};

use fihde_core::fraccalc::{gamma_fn, GridFunction, Interp};
use fihde_core::monotone::{
    check_uniqueness, iterate_extremal, step_type_a, step_type_b, verify_lower_upper,
    verify_mixed_pair, BracketState, MixedKind, MonotoneConfig, Role, UniquenessConfig,
    VerifyConfig,
};
use fihde_core::oracle::golden::Golden;
use fihde_core::oracle::oracle_rl_integral;
use fihde_core::scenario::Scenario;
use fihde_core::solver::{default_initial, solve_fihie};
use fihde_core::{Error, ProblemSpec, SolverConfig};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Demo {
    sc: Scenario,
    p: ProblemSpec,
    sigma0: GridFunction,
    rho0: GridFunction,
}

fn demo(file: &str) -> Demo {
    let sc = Scenario::load(&root().join("scenarios").join(file)).unwrap();
    let p = sc.problem().unwrap();
    let (sigma0, rho0) = sc.bracket_pair(sc.grid().unwrap()).unwrap().unwrap();
    Demo { sc, p, sigma0, rho0 }
}

fn max_excess(lo: &GridFunction, hi: &GridFunction) -> f64 {
    lo.values()
        .iter()
        .zip(hi.values())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn constant(p: &ProblemSpec, n: usize, c: f64) -> GridFunction {
    GridFunction::constant(p.grid(n).unwrap(), c, Interp::Linear).unwrap()
}

#[test]
fn exact_constant_is_both_lower_and_upper() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.7).build().unwrap();
    let c = constant(&p, 64, 0.7);
    let cfg = VerifyConfig::default();
    for role in [Role::Lower, Role::Upper] {
        let r = verify_lower_upper(&p, &c, role, &cfg).unwrap();
        assert!(r.passes);
        assert_eq!(r.max_abs_defect, 0.0);
    }
    let pair = verify_mixed_pair(&p, &c, &c, MixedKind::A, &cfg).unwrap();
    assert!(pair.passes && pair.is_mixed_solution());
}

#[test]
fn constant_below_a_positive_load_is_lower_only() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.3).aleph1("1").build().unwrap();
    let c = constant(&p, 128, 0.3);
    let cfg = VerifyConfig::default();
    let lower = verify_lower_upper(&p, &c, Role::Lower, &cfg).unwrap();
    let upper = verify_lower_upper(&p, &c, Role::Upper, &cfg).unwrap();
    assert!(lower.passes);
    assert!(!upper.passes);
    assert!(lower.defects[1..128].iter().all(|&d| d == -1.0));
    assert_eq!(upper.worst_defect, -1.0);
}

#[test]
fn kind_a_without_aleph2_reduces_to_single_checks() {
    let p = ProblemSpec::builder(0.6, 0.0, 1.0, 0.2)
        .psi("0.1 * sin(v)")
        .aleph1("0.5 * v + s")
        .constants(0.1, 1.0, 2.0)
        .build()
        .unwrap();
    let g = p.grid(256).unwrap();
    let sigma = GridFunction::from_fn(g, Interp::PchipMonotone, |s| 0.2 - 0.5 * s).unwrap();
    let rho = GridFunction::from_fn(g, Interp::PchipMonotone, |s| 0.2 + 2.0 * s.sqrt()).unwrap();
    let cfg = VerifyConfig::default();
    let pair = verify_mixed_pair(&p, &sigma, &rho, MixedKind::A, &cfg).unwrap();
    let lower = verify_lower_upper(&p, &sigma, Role::Lower, &cfg).unwrap();
    let upper = verify_lower_upper(&p, &rho, Role::Upper, &cfg).unwrap();
    assert_eq!(pair.sigma, lower);
    assert_eq!(pair.rho, upper);
    assert_eq!(pair.passes, lower.passes && upper.passes);
}

#[test]
fn demo_pair_defects_agree_with_a_dense_derivative() {
    let d = demo("logistic.toml");
    let pair = verify_mixed_pair(&d.p, &d.sigma0, &d.rho0, MixedKind::A, &d.sc.verify_config()).unwrap();
    assert!(pair.passes);
    assert!(pair.sigma.worst_defect < -0.1 && pair.rho.worst_defect > 0.1);

    // Dense reference for the lower curve: D^α via I^(1-α) and central differences.
    let alpha = d.p.alpha();
    let k = 0.43;
    let sig = |s: f64| 0.5 - k * s.powf(0.8);
    let rho = |s: f64| 0.5 + k * s.powf(0.8);
    let u = |s: f64| {
        let x = sig(s);
        x - 0.1 * x / (1.0 + x)
    };
    let u0 = u(0.0);
    let dense = 4096;
    let h = 1.0 / dense as f64;
    let g = oracle_rl_integral(|s| u(s) - u0, 1.0 - alpha, 0.0, 1.0, dense).unwrap();
    for i in (52..512).step_by(23) {
        let j = 8 * i;
        let s = j as f64 * h;
        let deriv = (g[j + 1] - g[j - 1]) / (2.0 * h);
        let load = 0.3 * sig(s) - 0.3 * rho(s) * rho(rho(s));
        let reference = deriv - load;
        assert!((pair.sigma.defects[i] - reference).abs() < 1e-3, "node {i}");
    }
}

#[test]
fn state_independent_load_collapses_in_one_step() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.1).aleph1("0.6").build().unwrap();
    let g = p.grid(128).unwrap();
    let sigma = constant(&p, 128, 0.1);
    let rho = GridFunction::from_fn(g, Interp::Linear, |s| 0.1 + s.sqrt()).unwrap();
    let state = BracketState::new(sigma.clone(), rho.clone()).unwrap();
    let next = step_type_a(&p, &state, &SolverConfig::default(), &MonotoneConfig::default()).unwrap();
    let gm = gamma_fn(1.5).unwrap();
    assert_eq!(next.width, 0.0);
    for (s, x) in g.nodes().zip(next.sigma.values()) {
        assert!((x - (0.1 + 0.6 * s.sqrt() / gm)).abs() < 1e-12);
    }
    let rep = iterate_extremal(&p, &sigma, &rho, MixedKind::A, &SolverConfig::default(), &MonotoneConfig::default())
        .unwrap();
    assert!(rep.converged);
    assert_eq!(rep.steps, 1);
}

#[test]
fn collapsed_brackets_stay_collapsed() {
    let d = demo("logistic.toml");
    let solver = d.sc.solver_config();
    let state = BracketState::new(d.sigma0.clone(), d.sigma0.clone()).unwrap();
    // Not a mixed pair, so the chain check is switched off; only the symmetry matters here.
    let unchecked = MonotoneConfig {
        tol_order: Some(f64::INFINITY),
        ..MonotoneConfig::default()
    };
    let a = step_type_a(&d.p, &state, &solver, &unchecked).unwrap();
    assert_eq!(a.sigma, a.rho);
    let b = step_type_b(&d.p, &state, &solver).unwrap();
    assert_eq!(b.sigma, b.rho);
}

#[test]
fn kind_b_without_aleph1_decouples() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.2)
        .aleph2("-0.4 * v")
        .constants(1.0, 1.0, 1.0)
        .build()
        .unwrap();
    let g = p.grid(64).unwrap();
    let sigma = GridFunction::from_fn(g, Interp::Linear, |s| 0.2 - s).unwrap();
    let rho = GridFunction::from_fn(g, Interp::Linear, |s| 0.2 + s).unwrap();
    let other = GridFunction::from_fn(g, Interp::Linear, |s| 0.2 + 3.0 * s).unwrap();
    let solver = SolverConfig::default();
    let one = step_type_b(&p, &BracketState::new(sigma.clone(), rho).unwrap(), &solver).unwrap();
    let two = step_type_b(&p, &BracketState::new(sigma, other).unwrap(), &solver).unwrap();
    assert_eq!(one.sigma, two.sigma);
}

#[test]
fn demo_kind_a_chain_sandwich_and_golden_widths() {
    let d = demo("logistic.toml");
    let solver = d.sc.solver_config();
    let cfg = d.sc.monotone_config().unwrap();
    let rep = iterate_extremal(&d.p, &d.sigma0, &d.rho0, MixedKind::A, &solver, &cfg).unwrap();
    assert!(rep.converged && rep.steps <= 30);
    assert!(rep.violations.is_empty());
    assert!(rep.width_history.windows(2).all(|w| w[1] < w[0]));
    assert!(rep.width_history[1] / rep.width_history[0] <= 0.9);

    let golden = Golden::read(&root().join("crates/core/tests/golden/logistic_widths.csv")).unwrap();
    let widths = golden.column("width").unwrap();
    assert_eq!(widths.len(), rep.width_history.len());
    for (a, b) in widths.iter().zip(&rep.width_history) {
        assert!((a - b).abs() <= 1e-8);
    }

    let tol = rep.tol_order;
    for pair in rep.iterates.windows(2) {
        let ((_, s0, r0), (_, s1, r1)) = (&pair[0], &pair[1]);
        assert!(max_excess(s0, s1) <= tol);
        assert!(max_excess(s1, r1) <= tol);
        assert!(max_excess(r1, r0) <= tol);
    }

    // Any solution started between the initial curves stays between all iterates.
    let mid = d.sigma0.with_values(
        d.sigma0.values().iter().zip(d.rho0.values()).map(|(a, b)| 0.25 * a + 0.75 * b).collect(),
    )
    .unwrap();
    for init in [default_initial(&d.p, 512).unwrap(), mid] {
        let (v, r) = solve_fihie(&d.p, &solver, &init).unwrap();
        assert!(r.converged);
        for (_, s, rho) in &rep.iterates {
            assert!(max_excess(s, &v) <= tol && max_excess(&v, rho) <= tol);
        }
    }

    let h = d.sigma0.grid().h();
    for defect in &rep.limit_defects {
        assert!(defect.residual <= cfg.width_tol + h * h, "{}", defect.equation);
    }
}

#[test]
fn demo_kind_b_interleaves() {
    let d = demo("logistic_b.toml");
    let solver = d.sc.solver_config();
    let cfg = d.sc.monotone_config().unwrap();
    let rep = iterate_extremal(&d.p, &d.sigma0, &d.rho0, MixedKind::B, &solver, &cfg).unwrap();
    assert!(rep.converged);
    assert!(rep.steps >= 6);
    assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    let tol = rep.tol_order;
    let it = &rep.iterates;
    assert!(max_excess(&it[0].1, &it[2].1) <= tol);
    assert!(max_excess(&it[2].2, &it[0].2) <= tol);
    for t in 2..it.len() {
        let (s_now, s_old) = (&it[t].1, &it[t - 2].1);
        if t % 2 == 0 {
            assert!(max_excess(s_old, s_now) <= tol, "even sigma at {t}");
        } else {
            assert!(max_excess(s_now, s_old) <= tol, "odd sigma at {t}");
        }
    }
    let limits = rep.limits.as_ref().unwrap();
    assert!(max_excess(&limits.sigma, &limits.sigma_odd) <= tol);
    let h = d.sigma0.grid().h();
    assert_eq!(rep.limit_defects.len(), 4);
    for defect in &rep.limit_defects {
        assert!(defect.residual <= cfg.width_tol + h * h, "{}", defect.equation);
    }
}

#[test]
fn decreasing_aleph1_breaks_the_chain() {
    let d = demo("b2_violation.toml");
    let cfg = d.sc.monotone_config().unwrap();
    let err = iterate_extremal(&d.p, &d.sigma0, &d.rho0, MixedKind::A, &d.sc.solver_config(), &cfg)
        .unwrap_err();
    match err {
        Error::Ordering { t, magnitude, .. } => assert!(t == 1 && magnitude > 0.1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn precondition_is_enforced_unless_overridden() {
    let d = demo("logistic.toml");
    let solver = d.sc.solver_config();
    let mut cfg = d.sc.monotone_config().unwrap();
    // Swapped roles cannot form a mixed pair.
    let err = iterate_extremal(&d.p, &d.rho0, &d.sigma0, MixedKind::A, &solver, &cfg).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    cfg.enforce_precondition = false;
    cfg.max_steps = 2;
    let res = iterate_extremal(&d.p, &d.rho0, &d.sigma0, MixedKind::A, &solver, &cfg);
    match res {
        Ok(rep) => assert!(rep.precondition_overridden),
        Err(e) => assert!(matches!(e, Error::Ordering { .. }), "{e}"),
    }
}

#[test]
fn collapsed_initial_bracket_returns_immediately() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.7).build().unwrap();
    let c = constant(&p, 32, 0.7);
    let rep = iterate_extremal(&p, &c, &c, MixedKind::A, &SolverConfig::default(), &MonotoneConfig::default())
        .unwrap();
    assert_eq!(rep.steps, 0);
    assert_eq!(rep.width_history, vec![0.0]);
}

#[test]
fn uniqueness_checks() {
    let cfg = UniquenessConfig::default();
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.7)
        .aleph1("0.2")
        .aleph2("-0.1")
        .uniqueness(0.5, 0.5)
        .build()
        .unwrap();
    let g = p.grid(32).unwrap();
    let lo = constant(&p, 32, 0.5);
    let hi = GridFunction::from_fn(g, Interp::Linear, |s| 0.7 + s).unwrap();
    let r = check_uniqueness(&p, &lo, &hi, &cfg).unwrap();
    assert!(r.conditions_hold && !r.collapsed);
    assert!(check_uniqueness(&p, &hi, &hi, &cfg).unwrap().passes);

    let missing = ProblemSpec::builder(0.5, 0.0, 1.0, 0.7).build().unwrap();
    assert!(matches!(check_uniqueness(&missing, &lo, &lo, &cfg), Err(Error::Config(_))));

    let d = demo("logistic.toml");
    let rep = iterate_extremal(
        &d.p,
        &d.sigma0,
        &d.rho0,
        MixedKind::A,
        &d.sc.solver_config(),
        &d.sc.monotone_config().unwrap(),
    )
    .unwrap();
    let u = check_uniqueness(&d.p, &rep.sigma, &rep.rho, &d.sc.uniqueness_config()).unwrap();
    assert!(u.passes && u.width <= 1e-6);
}
