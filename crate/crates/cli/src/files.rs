use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fihde_core::fraccalc::Grid;
use fihde_core::oracle::golden::csv_body;
use fihde_core::scenario::Scenario;
use fihde_core::Error;

/// `--out`, then `FIHDE_OUT`, then the scenario's `output.dir`, then `out`.
pub fn out_dir(flag: Option<&Path>, sc: &Scenario) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os("FIHDE_OUT").filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(sc.output.dir.as_deref().unwrap_or("out"))
}

pub struct Writer {
    dir: PathBuf,
    stem: String,
}

impl Writer {
    pub fn new(dir: PathBuf, stem: &str) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            stem: stem.to_string(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.stem))
    }

    pub fn csv(&self, suffix: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let path = self.path(suffix);
        std::fs::write(&path, csv_body(columns, rows)).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn json(&self, suffix: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let path = self.path(suffix);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// A CSV of named numeric columns. Lines starting with `#` are skipped.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let columns: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|c| c.trim().to_string()).collect(),
            None => bail!("{}: empty file", path.display()),
        };
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("{}: data row {}", path.display(), k + 1))?;
            if row.len() != columns.len() {
                bail!("{}: data row {} has {} cells, header has {}", path.display(), k + 1, row.len(), columns.len());
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("missing column `{name}` (have {})", self.columns.join(",")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Fails with a grid mismatch unless the `s` column is exactly the grid's nodes.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let s = self.column("s")?;
        if s.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "candidate has {} rows, scenario grid has {} nodes",
                s.len(),
                grid.len()
            ))
            .into());
        }
        for (i, (a, b)) in s.iter().zip(grid.nodes()).enumerate() {
            if (a - b).abs() > 1e-9 * (1.0 + b.abs()) {
                return Err(Error::GridMismatch(format!("row {i}: s = {a}, grid node is {b}")).into());
            }
        }
        Ok(())
    }
}
