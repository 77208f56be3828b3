use std::path::{Path, PathBuf};

use fihde_core::fraccalc::{gamma_fn, rl_integral, Grid, GridFunction, Interp};
use fihde_core::oracle::golden::{regenerate, Golden};
use fihde_core::oracle::{
    oracle_rl_integral, oracle_scalar_fixed_point, oracle_solve, OracleConfig,
};
use fihde_core::scenario::Scenario;
use fihde_core::solver::{default_initial, solve_fihie};
use fihde_core::{Error, ProblemSpec, SolverConfig};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(root().join("crates/core/tests/golden"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
}

#[test]
fn integral_of_one_at_the_endpoint() {
    let v = oracle_rl_integral(|_| 1.0, 0.5, 0.0, 1.0, 8192).unwrap();
    assert!((v[8192] - 1.128_379_167_1).abs() < 1e-9);
}

#[test]
fn power_rule_with_one_richardson_step() {
    let exact = gamma_fn(3.0).unwrap() / gamma_fn(3.3).unwrap();
    let fine = oracle_rl_integral(|s| s * s, 0.3, 0.0, 1.0, 8192).unwrap()[8192];
    let coarse = oracle_rl_integral(|s| s * s, 0.3, 0.0, 1.0, 4096).unwrap()[4096];
    // The raw rule is second order; one extrapolation step removes the h² term.
    assert!((fine - exact).abs() < 5e-9);
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!((extrapolated - exact).abs() < 1e-10, "{:e}", extrapolated - exact);
}

#[test]
fn production_integral_sits_within_its_error_bound() {
    let n = 512;
    let grid = Grid::new(0.0, 1.0, n).unwrap();
    let f = GridFunction::from_fn(grid, Interp::Linear, |s| (3.0 * s).sin() + s).unwrap();
    let prod = rl_integral(&f, 0.5).unwrap();
    let dense = oracle_rl_integral(|s| (3.0 * s).sin() + s, 0.5, 0.0, 1.0, 8192).unwrap();
    let h = grid.h();
    for (i, x) in prod.values().iter().enumerate() {
        assert!((x - dense[16 * i]).abs() <= 2.0 * h * h, "node {i}");
    }
    // Same rule at the same resolution: agreement to round-off.
    let same = oracle_rl_integral(|s| (3.0 * s).sin() + s, 0.5, 0.0, 1.0, n).unwrap();
    for (x, y) in prod.values().iter().zip(&same) {
        assert!((x - y).abs() < 1e-13);
    }
}

#[test]
fn oracle_rejects_bad_input() {
    assert!(oracle_rl_integral(|_| 1.0, 1.5, 0.0, 1.0, 8).is_err());
    assert!(matches!(
        oracle_rl_integral(|s| 1.0 / s, 0.5, 0.0, 1.0, 8),
        Err(Error::Data(_))
    ));
    let cfg = OracleConfig::default();
    assert_eq!(cfg.check_against(512).unwrap(), 16);
    assert!(cfg.check_against(2048).is_err());
}

#[test]
fn scalar_fixed_points() {
    assert_eq!(oracle_scalar_fixed_point(|_| 1.0, 0.0, 2.0).unwrap(), 1.0);
    let c = oracle_scalar_fixed_point(|_| 0.375, -1.0, 1.0).unwrap();
    assert!((c - 0.375).abs() <= 1e-12);
    let r = oracle_scalar_fixed_point(|x| 1.0 + 0.3 * x.sin(), 0.0, 2.0).unwrap();
    assert!((r - 1.288_091_313_211_837_7).abs() <= 1e-12);
    assert!(oracle_scalar_fixed_point(|x| x + 1.0, 0.0, 2.0).is_err());
}

#[test]
fn dense_picard_on_closed_forms() {
    let cfg = OracleConfig {
        dense_n: 2048,
        ..OracleConfig::default()
    };
    let flat = ProblemSpec::builder(0.5, 0.0, 1.0, 0.7).build().unwrap();
    let sol = oracle_solve(&flat, &cfg).unwrap();
    assert!(sol.v.iter().all(|&v| v == 0.7));
    let pl = ProblemSpec::builder(0.6, 0.0, 1.0, 0.25).aleph1("0.8").build().unwrap();
    let sol = oracle_solve(&pl, &cfg).unwrap();
    let g = gamma_fn(1.6).unwrap();
    for (s, v) in sol.s.iter().zip(&sol.v) {
        assert!((v - (0.25 + 0.8 * s.powf(0.6) / g)).abs() < 1e-10);
    }
}

#[test]
fn dense_picard_refuses_to_stop_early() {
    let p = ProblemSpec::builder(0.5, 0.0, 1.0, 1.0).aleph1("3 * v").build().unwrap();
    let cfg = OracleConfig {
        dense_n: 64,
        dense_tol: 1e-12,
        max_iter: 3,
    };
    assert!(matches!(oracle_solve(&p, &cfg), Err(Error::Oracle(_))));
}

#[test]
fn every_golden_file_regenerates_bit_identically() {
    let files = golden_files();
    assert!(files.len() >= 4);
    for path in files {
        let stored = Golden::read(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(stored.render(), text, "{} is not in canonical form", path.display());
        let fresh = regenerate(&root(), &stored).unwrap();
        assert_eq!(fresh.body(), stored.body(), "{}", path.display());
    }
}

#[test]
fn constant_and_power_law_goldens_match_closed_forms() {
    let dir = root().join("crates/core/tests/golden");
    let flat = Golden::read(&dir.join("trivial_constant_solve.csv")).unwrap();
    assert!(flat.column("v").unwrap().iter().all(|&v| v == 0.7));
    let pl = Golden::read(&dir.join("power_law_solve.csv")).unwrap();
    let g = gamma_fn(1.6).unwrap();
    for row in &pl.rows {
        assert!((row[1] - (0.25 + 0.8 * row[0].powf(0.6) / g)).abs() < 1e-10);
    }
}

#[test]
fn production_converges_toward_the_oracle() {
    let sc = Scenario::load(&root().join("scenarios/logistic.toml")).unwrap();
    let p = sc.problem().unwrap();
    let golden = Golden::read(&root().join("crates/core/tests/golden/logistic_solve.csv")).unwrap();
    let reference = golden.column("v").unwrap();
    let cfg = SolverConfig::default();
    let mut errors = Vec::new();
    for n in [128, 256, 512] {
        let (v, rep) = solve_fihie(&p, &cfg, &default_initial(&p, n).unwrap()).unwrap();
        assert!(rep.converged);
        let stride = 512 / n;
        let err = v
            .values()
            .iter()
            .enumerate()
            .map(|(i, x)| (x - reference[i * stride]).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-6);
}
