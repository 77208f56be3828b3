//! Golden files: CSV bodies produced by the oracle, preceded by one
//! `#`-prefixed JSON line that is enough to regenerate them.
//!
//! ```text
//! # {"schema":1,"kind":"solve","scenario":"scenarios/logistic.toml",...}
//! s,v
//! 0.0,0.5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{oracle_bracket_widths, oracle_solve, OracleConfig};
use crate::error::{Error, Result};
use crate::expr;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldenKind {
    /// Dense Picard solution sampled on the scenario grid; columns `s,v`.
    Solve,
    /// Width history of the monotone iteration on the scenario grid; columns `t,width`.
    BracketWidths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub schema: u32,
    pub kind: GoldenKind,
    /// Scenario path relative to the workspace root.
    pub scenario: String,
    pub scenario_hash: String,
    /// Grid the body is sampled on.
    pub n: usize,
    /// Grid the oracle ran on.
    pub dense_n: usize,
    pub tol: f64,
    pub generated: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Golden {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// CSV text with a header row; numbers in shortest round-trip form.
pub fn csv_body(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

impl Golden {
    pub fn render(&self) -> String {
        let header = serde_json::to_string(&self.provenance).expect("provenance serializes");
        let columns: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        format!("# {header}\n{}", csv_body(&columns, &self.rows))
    }

    /// Everything after the provenance line.
    pub fn body(&self) -> String {
        let columns: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        csv_body(&columns, &self.rows)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (first, rest) = text
            .split_once('\n')
            .ok_or_else(|| Error::Data("golden file has no body".into()))?;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Data("golden file must start with '# ' and a JSON header".into()))?;
        let provenance: Provenance =
            serde_json::from_str(json).map_err(|e| Error::Data(format!("provenance header: {e}")))?;
        let mut lines = rest.lines();
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Data("golden file has no column header".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .enumerate()
            .map(|(i, line)| {
                let row: Vec<f64> = line
                    .split(',')
                    .map(|c| c.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Data(format!("golden row {}: {e}", i + 1)))?;
                if row.len() != columns.len() {
                    return Err(Error::Data(format!("golden row {} has {} cells", i + 1, row.len())));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            provenance,
            columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// One column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Data(format!("golden file has no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Runs the oracle for `kind` on the scenario at `root/scenario_path`.
pub fn generate(
    root: &Path,
    scenario_path: &str,
    kind: GoldenKind,
    cfg: &OracleConfig,
    generated: &str,
) -> Result<Golden> {
    let sc = Scenario::load(&root.join(scenario_path))?;
    let n = sc.solver.n;
    let dense_n = match kind {
        GoldenKind::Solve => cfg.dense_n,
        GoldenKind::BracketWidths => n,
    };
    let provenance = Provenance {
        schema: 1,
        kind,
        scenario: scenario_path.into(),
        scenario_hash: sc.hash(),
        n,
        dense_n,
        tol: cfg.dense_tol,
        generated: generated.into(),
    };
    compute(&sc, provenance, cfg.max_iter)
}

fn compute(sc: &Scenario, provenance: Provenance, max_iter: usize) -> Result<Golden> {
    let p = sc.problem()?;
    let (columns, rows) = match provenance.kind {
        GoldenKind::Solve => {
            let cfg = OracleConfig {
                dense_n: provenance.dense_n,
                dense_tol: provenance.tol,
                max_iter,
            };
            let stride = cfg.check_against(provenance.n)?;
            let sol = oracle_solve(&p, &cfg)?;
            let rows = sol.subsample(stride).into_iter().map(|(s, v)| vec![s, v]).collect();
            (vec!["s", "v"], rows)
        }
        GoldenKind::BracketWidths => {
            let b = sc
                .bracket
                .as_ref()
                .ok_or_else(|| Error::Oracle("scenario has no [bracket] section".into()))?;
            let sigma = expr::parse(&b.sigma0)?;
            let rho = expr::parse(&b.rho0)?;
            let curve = |e: &expr::Expr| {
                let e = e.clone();
                move |s: f64| e.eval(s, 0.0, 0.0).unwrap_or(f64::NAN)
            };
            let widths = oracle_bracket_widths(
                &p,
                curve(&sigma),
                curve(&rho),
                b.kind,
                provenance.n,
                b.width_tol,
                b.max_steps,
                provenance.tol,
            )?;
            let rows = widths.iter().enumerate().map(|(t, &w)| vec![t as f64, w]).collect();
            (vec!["t", "width"], rows)
        }
    };
    Ok(Golden {
        provenance,
        columns: columns.into_iter().map(String::from).collect(),
        rows,
    })
}

/// Recomputes a golden file from its own header. The scenario must still hash
/// to the recorded value.
pub fn regenerate(root: &Path, golden: &Golden) -> Result<Golden> {
    let prov = &golden.provenance;
    let sc = Scenario::load(&root.join(&prov.scenario))?;
    if sc.hash() != prov.scenario_hash {
        return Err(Error::Oracle(format!(
            "{} changed since the golden file was generated (hash {} != {})",
            prov.scenario,
            sc.hash(),
            prov.scenario_hash
        )));
    }
    compute(&sc, prov.clone(), OracleConfig::default().max_iter)
}
