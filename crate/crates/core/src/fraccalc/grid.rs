use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[s0, s0 + a]` with `n` subintervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    s0: f64,
    a: f64,
    n: usize,
}

impl Grid {
    pub fn new(s0: f64, a: f64, n: usize) -> Result<Self> {
        if !s0.is_finite() || !a.is_finite() {
            return Err(Error::Domain(format!("grid bounds must be finite (s0 = {s0}, a = {a})")));
        }
        if a <= 0.0 {
            return Err(Error::Domain(format!("interval length must be positive, got {a}")));
        }
        if n == 0 {
            return Err(Error::Domain("grid needs at least one subinterval".into()));
        }
        Ok(Self { s0, a, n })
    }

    #[inline]
    pub fn s0(&self) -> f64 {
        self.s0
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.s0 + self.a
    }

    /// Number of subintervals.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.a / self.n as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.end()
        } else {
            self.s0 + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |i| self.node(i))
    }

    /// Slack used when deciding whether a point is inside the interval.
    #[inline]
    pub(crate) fn slack(&self) -> f64 {
        1e-12 * (1.0 + self.s0.abs() + self.a)
    }

    #[inline]
    pub fn contains(&self, s: f64) -> bool {
        s >= self.s0 - self.slack() && s <= self.end() + self.slack()
    }

    #[inline]
    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.s0, self.end())
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.s0 - other.s0).abs() <= self.slack()
            && (self.a - other.a).abs() <= self.slack()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}] with n = {} vs [{}, {}] with n = {}",
                self.s0,
                self.end(),
                self.n,
                other.s0,
                other.end(),
                other.n
            )))
        }
    }
}
