//! Problem definition: `D^α[v - ψ(s, v, v(v))] = ℵ₁(s, v, v(v)) + ℵ₂(s, v, v(v))`,
//! `v(s0) = v0` on `[s0, s0 + a]`, together with the constants that the
//! structural hypotheses are stated against.

mod hypotheses;

pub use hypotheses::{
    check_a1, check_a2, check_b1, check_b2, check_b3_b4, check_all, theoretical_radius,
    BoxSummary, HypothesisCheck, HypothesisReport, SamplingBox, ThirdSlot, Witness,
};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fraccalc::{DomainPolicy, Grid, Interp};

/// A parsed expression that remembers which role it plays.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedExpr {
    name: &'static str,
    expr: Expr,
}

impl NamedExpr {
    pub fn parse(name: &'static str, text: &str) -> Result<Self> {
        Ok(Self {
            name,
            expr: expr::parse(text)?,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    #[inline]
    pub fn eval(&self, s: f64, v: f64, w: f64) -> Result<f64> {
        self.expr.eval(s, v, w).map_err(|source| Error::EvalAt {
            name: self.name.to_string(),
            s,
            v,
            w,
            source,
        })
    }

    /// True if the expression is a literal constant.
    pub fn is_constant(&self) -> bool {
        matches!(self.expr, Expr::Num(_))
    }
}

/// A fully validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub(crate) alpha: f64,
    pub(crate) s0: f64,
    pub(crate) a: f64,
    pub(crate) v0: f64,
    pub(crate) psi: NamedExpr,
    pub(crate) aleph1: NamedExpr,
    pub(crate) aleph2: NamedExpr,
    pub(crate) ell: f64,
    pub(crate) big_m: f64,
    pub(crate) kappa: f64,
    pub(crate) n1: Option<f64>,
    pub(crate) n2: Option<f64>,
    pub(crate) domain_policy: DomainPolicy,
    pub(crate) interp: Interp,
}

impl ProblemSpec {
    pub fn builder(alpha: f64, s0: f64, a: f64, v0: f64) -> ProblemBuilder {
        ProblemBuilder {
            alpha,
            s0,
            a,
            v0,
            psi: "0".into(),
            aleph1: "0".into(),
            aleph2: "0".into(),
            ell: 1.0,
            big_m: 1.0,
            kappa: 1.0,
            n1: None,
            n2: None,
            domain_policy: DomainPolicy::default(),
            interp: Interp::default(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn length(&self) -> f64 {
        self.a
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn psi(&self) -> &NamedExpr {
        &self.psi
    }
    pub fn aleph1(&self) -> &NamedExpr {
        &self.aleph1
    }
    pub fn aleph2(&self) -> &NamedExpr {
        &self.aleph2
    }
    pub fn ell(&self) -> f64 {
        self.ell
    }
    pub fn big_m(&self) -> f64 {
        self.big_m
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn n1(&self) -> Option<f64> {
        self.n1
    }
    pub fn n2(&self) -> Option<f64> {
        self.n2
    }
    pub fn domain_policy(&self) -> DomainPolicy {
        self.domain_policy
    }
    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = self.clone();
        p.alpha = alpha;
        p.validate()?;
        Ok(p)
    }

    pub fn with_domain_policy(&self, policy: DomainPolicy) -> Self {
        let mut p = self.clone();
        p.domain_policy = policy;
        p
    }

    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::new(self.s0, self.a, n)
    }

    /// `ℵ = ℵ₁ + ℵ₂`.
    #[inline]
    pub fn aleph(&self, s: f64, v: f64, w: f64) -> Result<f64> {
        Ok(self.aleph1.eval(s, v, w)? + self.aleph2.eval(s, v, w)?)
    }

    /// The ratio `ℓ / M` that bounds the Lipschitz constant of the `ψ` term.
    pub fn contraction_bound(&self) -> f64 {
        self.ell / self.big_m
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.a > 0.0) || !self.a.is_finite() || !self.s0.is_finite() {
            return Err(Error::Config(format!(
                "interval must be finite with positive length (s0 = {}, a = {})",
                self.s0, self.a
            )));
        }
        if !self.v0.is_finite() {
            return Err(Error::Config("v0 must be finite".into()));
        }
        if !(self.ell > 0.0) || !(self.big_m > 0.0) {
            return Err(Error::Config("ell and M must be positive".into()));
        }
        if self.ell > self.big_m {
            return Err(Error::Config(format!(
                "ell = {} exceeds M = {}; the contraction bound needs ell <= M",
                self.ell, self.big_m
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config("kappa must be positive".into()));
        }
        for (name, n) in [("N1", self.n1), ("N2", self.n2)] {
            if let Some(x) = n {
                if !(x > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive, got {x}")));
                }
            }
        }
        Ok(())
    }
}

/// Collects problem data as text and validates it in one go.
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    alpha: f64,
    s0: f64,
    a: f64,
    v0: f64,
    psi: String,
    aleph1: String,
    aleph2: String,
    ell: f64,
    big_m: f64,
    kappa: f64,
    n1: Option<f64>,
    n2: Option<f64>,
    domain_policy: DomainPolicy,
    interp: Interp,
}

impl ProblemBuilder {
    pub fn psi(mut self, text: &str) -> Self {
        self.psi = text.into();
        self
    }
    pub fn aleph1(mut self, text: &str) -> Self {
        self.aleph1 = text.into();
        self
    }
    pub fn aleph2(mut self, text: &str) -> Self {
        self.aleph2 = text.into();
        self
    }
    /// `ℓ`, `M` of the `ψ` bound and `κ` of the `ℵ` bound.
    pub fn constants(mut self, ell: f64, big_m: f64, kappa: f64) -> Self {
        self.ell = ell;
        self.big_m = big_m;
        self.kappa = kappa;
        self
    }
    pub fn uniqueness(mut self, n1: f64, n2: f64) -> Self {
        self.n1 = Some(n1);
        self.n2 = Some(n2);
        self
    }
    pub fn domain_policy(mut self, policy: DomainPolicy) -> Self {
        self.domain_policy = policy;
        self
    }
    pub fn interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let p = ProblemSpec {
            alpha: self.alpha,
            s0: self.s0,
            a: self.a,
            v0: self.v0,
            psi: NamedExpr::parse("psi", &self.psi)?,
            aleph1: NamedExpr::parse("aleph1", &self.aleph1)?,
            aleph2: NamedExpr::parse("aleph2", &self.aleph2)?,
            ell: self.ell,
            big_m: self.big_m,
            kappa: self.kappa,
            n1: self.n1,
            n2: self.n2,
            domain_policy: self.domain_policy,
            interp: self.interp,
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_validates_invariants() {
        assert!(ProblemSpec::builder(0.5, 0.0, 1.0, 0.0).build().is_ok());
        assert!(ProblemSpec::builder(1.0, 0.0, 1.0, 0.0).build().is_err());
        assert!(ProblemSpec::builder(0.0, 0.0, 1.0, 0.0).build().is_err());
        assert!(ProblemSpec::builder(0.5, 0.0, 0.0, 0.0).build().is_err());
        assert!(ProblemSpec::builder(0.5, 0.0, 1.0, 0.0)
            .constants(2.0, 1.0, 1.0)
            .build()
            .is_err());
        assert!(ProblemSpec::builder(0.5, 0.0, 1.0, 0.0)
            .uniqueness(1.0, -1.0)
            .build()
            .is_err());
        assert!(matches!(
            ProblemSpec::builder(0.5, 0.0, 1.0, 0.0).psi("v +").build(),
            Err(Error::Expr(_))
        ));
    }

    #[test]
    fn aleph_is_the_sum_of_its_parts() {
        let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.0)
            .aleph1("v")
            .aleph2("-2*w + s")
            .build()
            .unwrap();
        assert_eq!(p.aleph(0.5, 1.0, 3.0).unwrap(), 1.0 - 6.0 + 0.5);
    }

    #[test]
    fn evaluation_faults_carry_the_point() {
        let p = ProblemSpec::builder(0.5, 0.0, 1.0, 0.0).psi("log(v)").build().unwrap();
        match p.psi().eval(0.25, -1.0, 2.0) {
            Err(Error::EvalAt { name, s, v, w, .. }) => {
                assert_eq!((name.as_str(), s, v, w), ("psi", 0.25, -1.0, 2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
