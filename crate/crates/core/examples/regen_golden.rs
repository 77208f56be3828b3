//! Rewrites every golden file under `crates/core/tests/golden/`.
//!
//! `cargo run -p fihde-core --example regen_golden` regenerates from scratch;
//! `-- --check` only verifies that the stored bodies still reproduce.

use std::path::{Path, PathBuf};

use fihde_core::oracle::golden::{generate, regenerate, Golden, GoldenKind};
use fihde_core::oracle::OracleConfig;

const TARGETS: &[(&str, &str, GoldenKind)] = &[
    ("logistic_solve.csv", "scenarios/logistic.toml", GoldenKind::Solve),
    ("logistic_widths.csv", "scenarios/logistic.toml", GoldenKind::BracketWidths),
    ("hybrid_tanh_solve.csv", "scenarios/hybrid_tanh.toml", GoldenKind::Solve),
    ("power_law_solve.csv", "scenarios/power_law.toml", GoldenKind::Solve),
    ("trivial_constant_solve.csv", "scenarios/trivial_constant.toml", GoldenKind::Solve),
];

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let check = std::env::args().any(|a| a == "--check");
    let root = root();
    let dir = root.join("crates/core/tests/golden");
    std::fs::create_dir_all(&dir)?;
    let today = chrono::Local::now().format("%Y-%m-%d").to_string();
    for (file, scenario, kind) in TARGETS {
        let path = dir.join(file);
        if check {
            let stored = Golden::read(&path)?;
            let fresh = regenerate(&root, &stored)?;
            let same = fresh.body() == stored.body();
            println!("{file}: {}", if same { "reproduces" } else { "DIFFERS" });
            if !same {
                std::process::exit(1);
            }
        } else {
            let g = generate(&root, scenario, *kind, &OracleConfig::default(), &today)?;
            std::fs::write(&path, g.render())?;
            println!("{file}: {} rows", g.rows.len());
        }
    }
    Ok(())
}
