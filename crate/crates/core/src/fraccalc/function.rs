use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Rule used to evaluate a [`GridFunction`] between nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Linear,
    /// Shape-preserving piecewise cubic Hermite (Fritsch–Carlson slopes).
    #[default]
    PchipMonotone,
}

/// What to do when `f(f(s))` needs `f` outside the interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    Strict,
    #[default]
    Clamp,
}

/// A real function sampled on every node of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    interp: Interp,
    // Hermite slopes, only populated for `PchipMonotone`.
    slopes: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample {} at node {i}", values[i])));
        }
        let slopes = match interp {
            Interp::Linear => Vec::new(),
            Interp::PchipMonotone => pchip_slopes(&values, grid.h()),
        };
        Ok(Self {
            grid,
            values,
            interp,
            slopes,
        })
    }

    pub fn from_fn(grid: Grid, interp: Interp, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect(), interp)
    }

    pub fn constant(grid: Grid, c: f64, interp: Interp) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()], interp)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid and interpolation rule, new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.interp)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Largest absolute difference over the nodes.
    pub fn sup_dist(&self, other: &GridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(sup_dist(&self.values, &other.values))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Evaluates the interpolant at `s`, which must lie in the interval.
    pub fn interpolate(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || !self.grid.contains(s) {
            return Err(Error::Domain(format!(
                "s = {s} outside [{}, {}]",
                self.grid.s0(),
                self.grid.end()
            )));
        }
        Ok(self.eval_clamped(self.grid.clamp(s)))
    }

    /// Interpolant at a point already known to be inside the interval.
    pub(crate) fn eval_clamped(&self, s: f64) -> f64 {
        let n = self.grid.n();
        let h = self.grid.h();
        let x = (s - self.grid.s0()) / h;
        let i = (x.floor() as isize).clamp(0, n as isize - 1) as usize;
        let t = x - i as f64;
        if t == 0.0 {
            return self.values[i];
        }
        if t == 1.0 {
            return self.values[i + 1];
        }
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        match self.interp {
            Interp::Linear => y0 + t * (y1 - y0),
            Interp::PchipMonotone => {
                let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
            }
        }
    }
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len() - 1;
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    if n == 1 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n + 1];
    for i in 1..n {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            // Harmonic mean; equal weights on a uniform grid.
            d[i] = 2.0 * a * b / (a + b);
        }
    }
    d[0] = pchip_end_slope(delta[0], delta[1]);
    d[n] = pchip_end_slope(delta[n - 1], delta[n - 2]);
    d
}

fn pchip_end_slope(d0: f64, d1: f64) -> f64 {
    let d = 0.5 * (3.0 * d0 - d1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(0.0, 1.0, 8).unwrap()
    }

    #[test]
    fn node_values_are_reproduced_exactly() {
        for interp in [Interp::Linear, Interp::PchipMonotone] {
            let f = GridFunction::from_fn(grid(), interp, |s| (3.0 * s).sin()).unwrap();
            for (i, s) in grid().nodes().enumerate() {
                assert_eq!(f.interpolate(s).unwrap(), f.values()[i]);
            }
        }
    }

    #[test]
    fn linear_midpoint_is_the_mean() {
        let f = GridFunction::from_fn(grid(), Interp::Linear, |s| s * s).unwrap();
        let mid = f.interpolate(0.5 * (0.25 + 0.375)).unwrap();
        assert!((mid - 0.5 * (0.0625 + 0.140625)).abs() < 1e-15);
    }

    #[test]
    fn pchip_stays_between_neighbours_on_monotone_data() {
        let vals = vec![0.0, 0.0, 0.1, 0.9, 1.0, 1.0, 3.0, 3.0, 3.1];
        let f = GridFunction::new(grid(), vals.clone(), Interp::PchipMonotone).unwrap();
        for k in 0..800 {
            let s = k as f64 / 800.0;
            let i = ((s * 8.0).floor() as usize).min(7);
            let v = f.interpolate(s).unwrap();
            assert!(v >= vals[i] - 1e-14 && v <= vals[i + 1] + 1e-14, "s = {s}: {v}");
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let f = GridFunction::constant(grid(), 1.0, Interp::Linear).unwrap();
        assert!(matches!(f.interpolate(1.1), Err(Error::Domain(_))));
        assert!(matches!(f.interpolate(-1e-3), Err(Error::Domain(_))));
        assert!(f.interpolate(1.0 + 1e-15).is_ok());
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let mut vals = vec![0.0; 9];
        vals[3] = f64::NAN;
        assert!(matches!(
            GridFunction::new(grid(), vals, Interp::Linear),
            Err(Error::Data(_))
        ));
        assert!(GridFunction::new(grid(), vec![0.0; 8], Interp::Linear).is_err());
    }
}
