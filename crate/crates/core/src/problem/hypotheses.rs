//! Grid-sampling checks of the structural hypotheses on `ψ` and `ℵ`.
//!
//! Every check evaluates on a fixed lattice `s × v × w` and reports the worst
//! signed violation together with the point that attains it. A pass means the
//! property holds on the sampled lattice only.

use rayon::prelude::*;
use serde::Serialize;

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::fraccalc::{eval_with_policy, gamma_unchecked, DomainPolicy, GridFunction};
use crate::monotone::{verify_mixed_pair, MixedKind, VerifyConfig};

/// How the third argument `w = v(v(s))` is chosen while sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum ThirdSlot {
    /// Swept over its own lattice, independent of `v`.
    Sweep { lo: f64, hi: f64, samples: usize },
    /// Tied to the state through a candidate curve: `w = c(v)`.
    Tied(GridFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub s_samples: usize,
    pub v_lo: f64,
    pub v_hi: f64,
    pub v_samples: usize,
    pub third: ThirdSlot,
}

impl SamplingBox {
    /// A box whose third slot sweeps the same range as `v`.
    pub fn new(v_lo: f64, v_hi: f64) -> Self {
        Self {
            s_samples: 21,
            v_lo,
            v_hi,
            v_samples: 41,
            third: ThirdSlot::Sweep {
                lo: v_lo,
                hi: v_hi,
                samples: 21,
            },
        }
    }

    pub fn with_resolution(mut self, s_samples: usize, v_samples: usize, w_samples: usize) -> Self {
        self.s_samples = s_samples;
        self.v_samples = v_samples;
        if let ThirdSlot::Sweep { samples, .. } = &mut self.third {
            *samples = w_samples;
        }
        self
    }

    pub fn with_third(mut self, third: ThirdSlot) -> Self {
        self.third = third;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.v_lo < self.v_hi) || !self.v_lo.is_finite() || !self.v_hi.is_finite() {
            return Err(Error::Config(format!(
                "sampling box needs v_lo < v_hi, got [{}, {}]",
                self.v_lo, self.v_hi
            )));
        }
        if self.s_samples < 2 || self.v_samples < 2 {
            return Err(Error::Config("sampling box needs at least 2 samples per axis".into()));
        }
        if let ThirdSlot::Sweep { lo, hi, samples } = self.third {
            if !(lo <= hi) || samples < 1 {
                return Err(Error::Config("invalid sweep for the third slot".into()));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> BoxSummary {
        let (third, w_lo, w_hi, w_samples) = match &self.third {
            ThirdSlot::Sweep { lo, hi, samples } => ("sweep", *lo, *hi, *samples),
            ThirdSlot::Tied(_) => ("tied", self.v_lo, self.v_hi, self.v_samples),
        };
        BoxSummary {
            s_samples: self.s_samples,
            v_lo: self.v_lo,
            v_hi: self.v_hi,
            v_samples: self.v_samples,
            third_slot: third.into(),
            w_lo,
            w_hi,
            w_samples,
        }
    }
}

/// Serializable description of a [`SamplingBox`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSummary {
    pub s_samples: usize,
    pub v_lo: f64,
    pub v_hi: f64,
    pub v_samples: usize,
    pub third_slot: String,
    pub w_lo: f64,
    pub w_hi: f64,
    pub w_samples: usize,
}

/// Point attaining the worst violation: `v` and `z` are the two states
/// compared (for single-point checks `z` repeats `w`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub s: f64,
    pub v: f64,
    pub z: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub worst_violation: f64,
    pub witness: Witness,
    pub detail: String,
    /// Set when sweeping the third slot independently for each state flips the verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub third_slot_sensitive: Option<bool>,
}

impl HypothesisCheck {
    fn new(name: &str, worst: Worst, detail: String) -> Self {
        Self {
            name: name.into(),
            holds: worst.value <= 0.0,
            worst_violation: worst.value,
            witness: worst.witness,
            detail,
            third_slot_sensitive: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub schema: u32,
    pub sampling_box: BoxSummary,
    pub checks: Vec<HypothesisCheck>,
    pub all_hold: bool,
    /// `sup |ψ(s, 0, 0)|` over the sampled `s`.
    pub psi0: f64,
    pub theoretical_radius: f64,
    pub note: String,
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    witness: Witness,
}

impl Worst {
    fn none() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: Witness {
                s: f64::NAN,
                v: f64::NAN,
                z: f64::NAN,
                w: f64::NAN,
            },
        }
    }

    fn offer(&mut self, value: f64, witness: Witness) {
        if value > self.value {
            self.value = value;
            self.witness = witness;
        }
    }

    fn merge(mut self, other: Worst) -> Worst {
        self.offer(other.value, other.witness);
        self
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

struct Lattice {
    s: Vec<f64>,
    v: Vec<f64>,
    // Each context lists the third-slot value paired with every v sample.
    contexts: Vec<Vec<f64>>,
}

impl Lattice {
    fn new(p: &ProblemSpec, bx: &SamplingBox) -> Result<Self> {
        bx.validate()?;
        let s = lattice(p.s0, p.s0 + p.a, bx.s_samples);
        let v = lattice(bx.v_lo, bx.v_hi, bx.v_samples);
        let contexts = match &bx.third {
            ThirdSlot::Sweep { lo, hi, samples } => lattice(*lo, *hi, *samples)
                .into_iter()
                .map(|w| vec![w; v.len()])
                .collect(),
            ThirdSlot::Tied(c) => vec![v
                .iter()
                .map(|&x| eval_with_policy(c, x, DomainPolicy::Clamp).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?],
        };
        Ok(Self { s, v, contexts })
    }

    /// Runs `per_s` for every `s` sample in parallel and keeps the first worst.
    fn scan(&self, per_s: impl Fn(f64) -> Result<Worst> + Sync) -> Result<Worst> {
        let rows: Vec<Result<Worst>> = self.s.par_iter().map(|&s| per_s(s)).collect();
        rows.into_iter()
            .try_fold(Worst::none(), |acc, r| Ok(acc.merge(r?)))
    }
}

/// `v ↦ v - ψ(s, v, w)` is increasing (this also covers injectivity).
pub fn check_a1(p: &ProblemSpec, bx: &SamplingBox) -> Result<HypothesisCheck> {
    let lat = Lattice::new(p, bx)?;
    let worst = lat.scan(|s| {
        let mut worst = Worst::none();
        for ws in &lat.contexts {
            let phi: Vec<f64> = lat
                .v
                .iter()
                .zip(ws)
                .map(|(&v, &w)| Ok(v - p.psi.eval(s, v, w)?))
                .collect::<Result<_>>()?;
            for j in 0..phi.len() {
                for k in j + 1..phi.len() {
                    worst.offer(
                        -(phi[k] - phi[j]),
                        Witness { s, v: lat.v[j], z: lat.v[k], w: ws[j] },
                    );
                }
            }
        }
        Ok(worst)
    })?;
    let detail = format!("minimal increment of v - psi over sampled pairs: {:e}", -worst.value);
    Ok(HypothesisCheck::new("a1", worst, detail))
}

/// `|ψ(s, v, ·) - ψ(s, z, ·)| <= ℓ|v - z| / (M + |v - z|)`.
pub fn check_a2(p: &ProblemSpec, bx: &SamplingBox) -> Result<HypothesisCheck> {
    let lat = Lattice::new(p, bx)?;
    let bound = |d: f64| p.ell * d / (p.big_m + d);
    let tol = |x: f64, y: f64| 1e-12 * (1.0 + x.abs().max(y.abs()));
    let table = |s: f64, ws: &[f64]| -> Result<Vec<f64>> {
        lat.v.iter().zip(ws).map(|(&v, &w)| p.psi.eval(s, v, w)).collect()
    };

    let worst = lat.scan(|s| {
        let mut worst = Worst::none();
        for ws in &lat.contexts {
            let psi = table(s, ws)?;
            for j in 0..psi.len() {
                for k in j + 1..psi.len() {
                    let d = (lat.v[j] - lat.v[k]).abs();
                    let excess = (psi[j] - psi[k]).abs() - bound(d) - tol(psi[j], psi[k]);
                    worst.offer(excess, Witness { s, v: lat.v[j], z: lat.v[k], w: ws[j] });
                }
            }
        }
        Ok(worst)
    })?;

    // Cross-context comparison: the third slot differs between the two states.
    let sensitive = if lat.contexts.len() > 1 {
        let cross = lat.scan(|s| {
            let tables: Vec<Vec<f64>> =
                lat.contexts.iter().map(|ws| table(s, ws)).collect::<Result<_>>()?;
            let mut worst = Worst::none();
            for (l, tl) in tables.iter().enumerate() {
                for tm in &tables {
                    for j in 0..lat.v.len() {
                        for k in 0..lat.v.len() {
                            let d = (lat.v[j] - lat.v[k]).abs();
                            let excess = (tl[j] - tm[k]).abs() - bound(d) - tol(tl[j], tm[k]);
                            worst.offer(
                                excess,
                                Witness { s, v: lat.v[j], z: lat.v[k], w: lat.contexts[l][j] },
                            );
                        }
                    }
                }
            }
            Ok(worst)
        })?;
        Some((cross.value <= 0.0) != (worst.value <= 0.0))
    } else {
        None
    };

    let detail = format!(
        "max excess of |psi(v) - psi(z)| over ell*|v-z|/(M+|v-z|) with ell = {}, M = {}: {:e}",
        p.ell, p.big_m, worst.value
    );
    let mut check = HypothesisCheck::new("a2", worst, detail);
    check.third_slot_sensitive = sensitive;
    Ok(check)
}

/// `|ℵ₁ + ℵ₂| <= κ` (this also covers boundedness).
pub fn check_b1(p: &ProblemSpec, bx: &SamplingBox) -> Result<HypothesisCheck> {
    let lat = Lattice::new(p, bx)?;
    let worst = lat.scan(|s| {
        let mut worst = Worst::none();
        for ws in &lat.contexts {
            for (&v, &w) in lat.v.iter().zip(ws) {
                let mag = p.aleph(s, v, w)?.abs();
                worst.offer(mag, Witness { s, v, z: w, w });
            }
        }
        Ok(worst)
    })?;
    let max = worst.value;
    let shifted = Worst {
        value: max - p.kappa,
        witness: worst.witness,
    };
    let detail = format!("max |aleph| = {max:e} against kappa = {}", p.kappa);
    Ok(HypothesisCheck::new("b1", shifted, detail))
}

/// Monotonicity of the split: `ℵ₁` non-decreasing and `ℵ₂` non-increasing in `v`.
///
/// Returns one check per part, named `b2.aleph1` and `b2.aleph2`.
pub fn check_b2(p: &ProblemSpec, bx: &SamplingBox) -> Result<[HypothesisCheck; 2]> {
    let lat = Lattice::new(p, bx)?;
    let part = |expr: &super::NamedExpr, sign: f64| {
        lat.scan(|s| {
            let mut worst = Worst::none();
            for ws in &lat.contexts {
                let f: Vec<f64> = lat
                    .v
                    .iter()
                    .zip(ws)
                    .map(|(&v, &w)| expr.eval(s, v, w))
                    .collect::<Result<_>>()?;
                for j in 0..f.len() {
                    for k in j + 1..f.len() {
                        // Positive when the pair goes the wrong way.
                        worst.offer(
                            sign * (f[j] - f[k]),
                            Witness { s, v: lat.v[j], z: lat.v[k], w: ws[j] },
                        );
                    }
                }
            }
            Ok(worst)
        })
    };
    let up = part(&p.aleph1, 1.0)?;
    let down = part(&p.aleph2, -1.0)?;
    Ok([
        HypothesisCheck::new(
            "b2.aleph1",
            up,
            format!("largest decrease of aleph1 along increasing v: {:e}", up.value),
        ),
        HypothesisCheck::new(
            "b2.aleph2",
            down,
            format!("largest increase of aleph2 along increasing v: {:e}", down.value),
        ),
    ])
}

/// The initial pair is ordered and forms a mixed lower/upper pair of the given kind.
pub fn check_b3_b4(
    p: &ProblemSpec,
    sigma0: &GridFunction,
    rho0: &GridFunction,
    kind: MixedKind,
    cfg: &VerifyConfig,
) -> Result<HypothesisCheck> {
    sigma0.grid().ensure_same(rho0.grid())?;
    let mut order = Worst::none();
    for (i, s) in sigma0.grid().nodes().enumerate() {
        let (a, b) = (sigma0.values()[i], rho0.values()[i]);
        order.offer(a - b, Witness { s, v: a, z: b, w: f64::NAN });
    }
    let pair = verify_mixed_pair(p, sigma0, rho0, kind, cfg)?;
    let name = match kind {
        MixedKind::A => "b3",
        MixedKind::B => "b4",
    };
    let ordered = order.value <= 0.0;
    let (worst, detail) = if !ordered {
        (order, format!("sigma0 exceeds rho0 by {:e}", order.value))
    } else if !pair.passes {
        let node = pair.witness_node;
        let s = sigma0.grid().node(node);
        (
            Worst {
                value: pair.worst_violation.max(f64::MIN_POSITIVE),
                witness: Witness {
                    s,
                    v: sigma0.values()[node],
                    z: rho0.values()[node],
                    w: f64::NAN,
                },
            },
            format!("mixed pair conditions fail: {}", pair.summary()),
        )
    } else {
        (
            Worst {
                value: order.value.max(pair.worst_violation),
                witness: order.witness,
            },
            format!("ordered; {}", pair.summary()),
        )
    };
    Ok(HypothesisCheck::new(name, worst, detail))
}

/// `Ψ₀ = sup |ψ(s, 0, 0)|` on the sampled `s` and the existence radius built from it.
///
/// The integrable majorant of `ℵ` is taken to be the constant `κ`, so its
/// contribution is `κ a^α / Γ(α + 1)`.
pub fn theoretical_radius(p: &ProblemSpec, bx: &SamplingBox) -> Result<(f64, f64)> {
    let mut psi0 = 0.0_f64;
    for s in lattice(p.s0, p.s0 + p.a, bx.s_samples.max(2)) {
        psi0 = psi0.max(p.psi.eval(s, 0.0, 0.0)?.abs());
    }
    let anchor = (p.v0 - p.psi.eval(p.s0, p.v0, p.v0)?).abs();
    let load = p.kappa * p.a.powf(p.alpha) / gamma_unchecked(p.alpha + 1.0);
    Ok((psi0, anchor + p.ell + psi0 + load))
}

/// Runs (a1), (a2), (b1), (b2) and, when a bracket is supplied, (b3)/(b4).
pub fn check_all(
    p: &ProblemSpec,
    bx: &SamplingBox,
    bracket: Option<(&GridFunction, &GridFunction, MixedKind, &VerifyConfig)>,
) -> Result<HypothesisReport> {
    let mut checks = vec![check_a1(p, bx)?, check_a2(p, bx)?, check_b1(p, bx)?];
    checks.extend(check_b2(p, bx)?);
    if let Some((sigma0, rho0, kind, cfg)) = bracket {
        checks.push(check_b3_b4(p, sigma0, rho0, kind, cfg)?);
    }
    let (psi0, radius) = theoretical_radius(p, bx)?;
    Ok(HypothesisReport {
        schema: 1,
        sampling_box: bx.summary(),
        all_hold: checks.iter().all(|c| c.holds),
        checks,
        psi0,
        theoretical_radius: radius,
        note: "verdicts hold on the sampled lattice only".into(),
    })
}
