//! Fractional calculus on uniform grids.
//!
//! The Riemann–Liouville integral is discretised by product integration: on
//! each subinterval the integrand is replaced by its linear interpolant and
//! the weakly singular kernel `(s - β)^(α-1)` is integrated exactly against
//! it. The derivative of order `α` is the first derivative of the integral of
//! order `1 - α`.

mod function;
mod gamma;
mod grid;

use rayon::prelude::*;

pub use function::{DomainPolicy, GridFunction, Interp};
pub use gamma::{gamma_fn, Kernel};
pub(crate) use function::sup_dist;
pub(crate) use gamma::gamma_unchecked;
pub use grid::Grid;

use crate::error::{Error, Result};

// Below this many nodes the parallel split costs more than it saves.
const PAR_THRESHOLD: usize = 256;

/// Cached product-integration weights for one grid and one order.
#[derive(Debug, Clone)]
pub struct RlIntegral {
    grid: Grid,
    alpha: f64,
    scale: f64,
    // interior[k] weights f_{i-k} for 1 <= k <= i-1
    interior: Vec<f64>,
    // first[i] weights f_0 in the sum for node i
    first: Vec<f64>,
}

impl RlIntegral {
    pub fn new(grid: Grid, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("integral order must lie in (0, 1], got {alpha}")));
        }
        let n = grid.n();
        let p = alpha + 1.0;
        // fwd[k] = (k+1)^p - k^p, written to avoid cancellation for large k.
        let fwd: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    1.0
                } else {
                    let kf = k as f64;
                    kf.powf(p) * (p * (1.0 / kf).ln_1p()).exp_m1()
                }
            })
            .collect();
        let mut interior = vec![0.0; n + 1];
        for k in 1..=n {
            interior[k] = fwd[k] - fwd[k - 1];
        }
        let mut first = vec![0.0; n + 1];
        for i in 1..=n {
            let m = (i - 1) as f64;
            first[i] = p * (m + 1.0).powf(alpha) - fwd[i - 1];
        }
        let scale = grid.h().powf(alpha) / gamma_unchecked(alpha + 2.0);
        Ok(Self {
            grid,
            alpha,
            scale,
            interior,
            first,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Applies the integral to raw node samples.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.grid.len() {
            return Err(Error::Data(format!(
                "expected {} samples, got {}",
                self.grid.len(),
                f.len()
            )));
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite integrand {} at node {i}", f[i])));
        }
        let node = |i: usize| -> f64 {
            if i == 0 {
                return 0.0;
            }
            let mut acc = self.first[i] * f[0] + f[i];
            for j in 1..i {
                acc += self.interior[i - j] * f[j];
            }
            self.scale * acc
        };
        let n = self.grid.len();
        Ok(if n >= PAR_THRESHOLD {
            (0..n).into_par_iter().map(node).collect()
        } else {
            (0..n).map(node).collect()
        })
    }
}

/// Riemann–Liouville integral of order `alpha` in `(0, 1]`, anchored at `s0`.
pub fn rl_integral(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    let op = RlIntegral::new(*f.grid(), alpha)?;
    f.with_values(op.apply(f.values())?)
}

/// Riemann–Liouville derivative of order `alpha` in `(0, 1)`.
pub fn rl_derivative(f: &GridFunction, alpha: f64) -> Result<GridFunction> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("derivative order must lie in (0, 1), got {alpha}")));
    }
    if f.grid().n() < 2 {
        return Err(Error::Domain("derivative needs at least two subintervals".into()));
    }
    let op = RlIntegral::new(*f.grid(), 1.0 - alpha)?;
    let g = op.apply(f.values())?;
    f.with_values(differentiate(&g, f.grid().h()))
}

/// Second-order finite differences: central inside, three-point one-sided at the ends.
pub(crate) fn differentiate(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len() - 1;
    let mut d = vec![0.0; n + 1];
    for i in 1..n {
        d[i] = (g[i + 1] - g[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
    d[n] = (3.0 * g[n] - 4.0 * g[n - 1] + g[n - 2]) / (2.0 * h);
    d
}

/// Result of [`self_compose`]: `f(f(s))` on the grid and the nodes whose inner value escaped.
#[derive(Debug, Clone, PartialEq)]
pub struct Composed {
    pub function: GridFunction,
    pub escaped: Vec<usize>,
}

/// Samples `f(f(s_i))` by interpolation.
pub fn self_compose(f: &GridFunction, policy: DomainPolicy) -> Result<Composed> {
    let (values, escaped) = compose_values(f, policy)?;
    Ok(Composed {
        function: f.with_values(values)?,
        escaped,
    })
}

pub(crate) fn compose_values(f: &GridFunction, policy: DomainPolicy) -> Result<(Vec<f64>, Vec<usize>)> {
    let grid = f.grid();
    let escaped: Vec<usize> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| !grid.contains(v))
        .map(|(i, _)| i)
        .collect();
    if policy == DomainPolicy::Strict && !escaped.is_empty() {
        return Err(Error::Range { nodes: escaped });
    }
    let values = f
        .values()
        .iter()
        .map(|&v| f.eval_clamped(grid.clamp(v)))
        .collect();
    Ok((values, escaped))
}

/// `f(x)` for a scalar `x`, projected onto the interval under `Clamp`.
pub(crate) fn eval_with_policy(f: &GridFunction, x: f64, policy: DomainPolicy) -> Result<(f64, bool)> {
    let inside = f.grid().contains(x);
    if !inside && policy == DomainPolicy::Strict {
        return Err(Error::Domain(format!(
            "composed argument {x} outside [{}, {}]",
            f.grid().s0(),
            f.grid().end()
        )));
    }
    Ok((f.eval_clamped(f.grid().clamp(x)), !inside))
}
