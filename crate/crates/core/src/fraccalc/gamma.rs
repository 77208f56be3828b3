use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler's Gamma function for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("gamma requires a finite positive argument, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

pub(crate) fn gamma_unchecked(x: f64) -> f64 {
    // Exact factorials keep Γ(k) bit-exact for small integers.
    if x == x.trunc() && x <= 21.0 {
        return (1..x as u64).map(|k| k as f64).product();
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// The Riemann–Liouville kernel `s^(γ-1) / Γ(γ)`, zero for `s <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    gamma_order: f64,
    inv_gamma: f64,
}

impl Kernel {
    pub fn new(gamma_order: f64) -> Result<Self> {
        if !(gamma_order > 0.0 && gamma_order < 2.0) {
            return Err(Error::Domain(format!("kernel order must lie in (0, 2), got {gamma_order}")));
        }
        Ok(Self {
            gamma_order,
            inv_gamma: 1.0 / gamma_unchecked(gamma_order),
        })
    }

    pub fn order(&self) -> f64 {
        self.gamma_order
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            s.powf(self.gamma_order - 1.0) * self.inv_gamma
        }
    }
}
