//! Reference computations for tests and golden files.
//!
//! Everything here is written as plain loops that share formulas, not code,
//! with the production path: the integral weights are rebuilt per offset from
//! the kernel moments, composition uses its own linear interpolation and the
//! iterations are undamped. Slow (quadratic in the grid size) by design.

pub mod golden;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccalc::gamma_fn;
use crate::monotone::MixedKind;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub dense_n: usize,
    pub dense_tol: f64,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            dense_n: 8192,
            dense_tol: 1e-12,
            max_iter: 2000,
        }
    }
}

impl OracleConfig {
    /// The dense grid must refine the production grid by a factor of at least 8.
    pub fn check_against(&self, production_n: usize) -> Result<usize> {
        if self.dense_n < 8 * production_n || self.dense_n % production_n != 0 {
            return Err(Error::Oracle(format!(
                "dense_n = {} must be a multiple of, and at least 8x, the production n = {production_n}",
                self.dense_n
            )));
        }
        Ok(self.dense_n / production_n)
    }
}

/// Product-rule weights `(left, right)` for the subinterval at offset `m`
/// below the target node, already divided by `Γ(α)`.
fn offset_weights(alpha: f64, h: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let g = gamma_fn(alpha)?;
    Ok((0..n)
        .map(|m| {
            let m = m as f64;
            // P = ∫ u^α du and Q = ∫ u^(α-1) du over [m h, (m + 1) h].
            let p = h.powf(alpha + 1.0) * ((m + 1.0).powf(alpha + 1.0) - m.powf(alpha + 1.0)) / (alpha + 1.0);
            let q = h.powf(alpha) * ((m + 1.0).powf(alpha) - m.powf(alpha)) / alpha;
            let left = (p - m * h * q) / h;
            let right = ((m + 1.0) * h * q - p) / h;
            (left / g, right / g)
        })
        .collect())
}

fn integrate(w: &[(f64, f64)], f: &[f64]) -> Vec<f64> {
    (0..f.len())
        .map(|i| {
            let mut acc = 0.0;
            for m in 0..i {
                acc += f[i - m - 1] * w[m].0 + f[i - m] * w[m].1;
            }
            acc
        })
        .collect()
}

/// `I^α f` at the `n + 1` nodes of `[s0, s0 + a]`.
pub fn oracle_rl_integral(
    f: impl Fn(f64) -> f64,
    alpha: f64,
    s0: f64,
    a: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("integral order must lie in (0, 1], got {alpha}")));
    }
    if n == 0 || !(a > 0.0) {
        return Err(Error::Domain("need n >= 1 and a > 0".into()));
    }
    let h = a / n as f64;
    let samples: Vec<f64> = (0..=n).map(|i| f(s0 + i as f64 * h)).collect();
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("integrand has non-finite samples".into()));
    }
    Ok(integrate(&offset_weights(alpha, h, n)?, &samples))
}

/// A dense discretisation of one problem.
struct Dense<'p> {
    p: &'p ProblemSpec,
    s: Vec<f64>,
    h: f64,
    weights: Vec<(f64, f64)>,
}

impl<'p> Dense<'p> {
    fn new(p: &'p ProblemSpec, n: usize) -> Result<Self> {
        let h = p.length() / n as f64;
        Ok(Self {
            p,
            s: (0..=n).map(|i| p.s0() + i as f64 * h).collect(),
            h,
            weights: offset_weights(p.alpha(), h, n)?,
        })
    }

    fn at(&self, v: &[f64], x: f64) -> f64 {
        let n = v.len() - 1;
        let t = ((x - self.s[0]) / self.h).clamp(0.0, n as f64);
        let j = (t.floor() as usize).min(n - 1);
        let frac = t - j as f64;
        v[j] + frac * (v[j + 1] - v[j])
    }

    fn composed(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.at(v, x)).collect()
    }

    fn anchor(&self, v: &[f64]) -> Result<f64> {
        let v0 = self.p.v0();
        Ok(v0 - self.p.psi().eval(self.s[0], v0, self.at(v, v0))?)
    }

    fn load(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let (wa, wb) = (self.composed(a), self.composed(b));
        let mut f = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            f.push(
                self.p.aleph1().eval(self.s[i], a[i], wa[i])?
                    + self.p.aleph2().eval(self.s[i], b[i], wb[i])?,
            );
        }
        Ok(integrate(&self.weights, &f))
    }

    fn with_psi(&self, x: &[f64], base: &[f64]) -> Result<Vec<f64>> {
        let c = self.anchor(x)?;
        let wx = self.composed(x);
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            out.push(c + self.p.psi().eval(self.s[i], x[i], wx[i])? + base[i]);
        }
        Ok(out)
    }

    fn implicit(&self, base: &[f64], init: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let mut x = init.to_vec();
        for _ in 0..max_iter {
            let next = self.with_psi(&x, base)?;
            let d = max_diff(&next, &x);
            x = next;
            if d <= tol {
                return Ok(x);
            }
        }
        Err(Error::Oracle("implicit solve did not converge".into()))
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl OracleSolution {
    /// Values at every `stride`-th node.
    pub fn subsample(&self, stride: usize) -> Vec<(f64, f64)> {
        self.s
            .iter()
            .zip(&self.v)
            .step_by(stride)
            .map(|(&s, &v)| (s, v))
            .collect()
    }
}

/// Undamped Picard iteration at `cfg.dense_n`; refuses to return an unconverged result.
pub fn oracle_solve(p: &ProblemSpec, cfg: &OracleConfig) -> Result<OracleSolution> {
    let d = Dense::new(p, cfg.dense_n)?;
    let mut v = vec![p.v0(); cfg.dense_n + 1];
    for k in 1..=cfg.max_iter {
        let next = d.with_psi(&v, &d.load(&v, &v)?)?;
        let step = max_diff(&next, &v);
        v = next;
        if step <= cfg.dense_tol {
            let residual = max_diff(&d.with_psi(&v, &d.load(&v, &v)?)?, &v);
            return Ok(OracleSolution {
                s: d.s,
                v,
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::Oracle(format!(
        "Picard did not reach {} within {} iterations",
        cfg.dense_tol, cfg.max_iter
    )))
}

/// `G(v)` on an `n`-interval grid for samples `v` of length `n + 1`.
pub fn oracle_apply(p: &ProblemSpec, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::Data("need at least two samples".into()));
    }
    let d = Dense::new(p, v.len() - 1)?;
    d.with_psi(v, &d.load(v, v)?)
}

/// Width history `‖ρ_t - σ_t‖∞` of the monotone iteration on an `n`-interval grid,
/// stopping on the width alone.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bracket_widths(
    p: &ProblemSpec,
    sigma0: impl Fn(f64) -> f64,
    rho0: impl Fn(f64) -> f64,
    kind: MixedKind,
    n: usize,
    width_tol: f64,
    max_steps: usize,
    inner_tol: f64,
) -> Result<Vec<f64>> {
    let d = Dense::new(p, n)?;
    let mut sig: Vec<f64> = d.s.iter().map(|&s| sigma0(s)).collect();
    let mut rho: Vec<f64> = d.s.iter().map(|&s| rho0(s)).collect();
    let mut widths = vec![max_diff(&sig, &rho)];
    for _ in 0..max_steps {
        if widths.last().is_some_and(|&w| w <= width_tol) {
            break;
        }
        let (ls, lr) = match kind {
            MixedKind::A => (d.load(&sig, &rho)?, d.load(&rho, &sig)?),
            MixedKind::B => (d.load(&rho, &sig)?, d.load(&sig, &rho)?),
        };
        sig = d.implicit(&ls, &sig, inner_tol, 10_000)?;
        rho = d.implicit(&lr, &rho, inner_tol, 10_000)?;
        widths.push(max_diff(&sig, &rho));
    }
    Ok(widths)
}

/// Bisection for `x = g(x)` on `[lo, hi]` to an absolute width of `1e-12`.
pub fn oracle_scalar_fixed_point(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let f = |x: f64| x - g(x);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Oracle(format!(
            "x - g(x) has no sign change on [{lo}, {hi}]"
        )));
    }
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
