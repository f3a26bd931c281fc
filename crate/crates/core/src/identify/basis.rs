//! Time-dependent forcing terms `phi_j(t)`, evaluated at `t = k * dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent allowed before `exp` is considered overflow-unsafe.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisTerm {
    /// `sin(omega * t + phase)`
    Sinusoid { omega: f64, phase: f64 },
    /// `exp(rate * t)`
    Exponential { rate: f64 },
    /// `t^degree`
    Polynomial { degree: u32 },
    /// `c0 + c1 t + c2 t^2 + ...`
    PolynomialSeries { coefficients: Vec<f64> },
    Product { left: Box<BasisTerm>, right: Box<BasisTerm> },
    /// The inner term evaluated at `t^alpha` instead of `t`.
    PowerTime { alpha: f64, inner: Box<BasisTerm> },
}

impl BasisTerm {
    pub fn sinusoid(omega: f64, phase: f64) -> Self {
        BasisTerm::Sinusoid { omega, phase }
    }

    pub fn exponential(rate: f64) -> Self {
        BasisTerm::Exponential { rate }
    }

    pub fn polynomial(degree: u32) -> Self {
        BasisTerm::Polynomial { degree }
    }

    pub fn product(left: BasisTerm, right: BasisTerm) -> Self {
        BasisTerm::Product { left: Box::new(left), right: Box::new(right) }
    }

    pub fn power_time(alpha: f64, inner: BasisTerm) -> Self {
        BasisTerm::PowerTime { alpha, inner: Box::new(inner) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BasisTerm::Sinusoid { omega, phase } => (omega * t + phase).sin(),
            BasisTerm::Exponential { rate } => (rate * t).exp(),
            BasisTerm::Polynomial { degree } => t.powi(*degree as i32),
            BasisTerm::PolynomialSeries { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            BasisTerm::Product { left, right } => left.eval(t) * right.eval(t),
            BasisTerm::PowerTime { alpha, inner } => inner.eval(t.powf(*alpha)),
        }
    }

    /// Largest exponent reached by any exponential inside the term for
    /// `t` in `[0, t_max]`.
    fn max_exponent(&self, t_max: f64) -> f64 {
        match self {
            BasisTerm::Exponential { rate } => rate * t_max,
            BasisTerm::Product { left, right } => left.max_exponent(t_max).max(right.max_exponent(t_max)),
            BasisTerm::PowerTime { alpha, inner } => inner.max_exponent(t_max.powf(*alpha)),
            _ => 0.0,
        }
    }
}

/// Ordered list of forcing terms; `p` is the number of terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForcingBasis {
    pub terms: Vec<BasisTerm>,
}

impl ForcingBasis {
    pub fn new(terms: Vec<BasisTerm>) -> Self {
        Self { terms }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `{1, t, t^2}`
    pub fn polynomial(max_degree: u32) -> Self {
        Self::new((0..=max_degree).map(BasisTerm::polynomial).collect())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, term) in out.iter_mut().zip(&self.terms) {
            *o = term.eval(t);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.terms.iter().map(|term| term.eval(t)).collect()
    }

    /// Reject growing exponentials that would overflow over `horizon` steps.
    pub fn check_horizon(&self, dt: f64, horizon: usize) -> Result<()> {
        let t_max = dt * horizon as f64;
        for term in &self.terms {
            if term.max_exponent(t_max) > MAX_EXPONENT {
                let rate = match term {
                    BasisTerm::Exponential { rate } => *rate,
                    _ => term.max_exponent(1.0),
                };
                return Err(Error::OverflowUnsafe { rate, dt, horizon });
            }
        }
        Ok(())
    }
}
