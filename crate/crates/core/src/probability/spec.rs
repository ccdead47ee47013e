use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normal distribution used as a membership function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mu: f64,
    pub sigma: f64,
}

impl Gaussian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::Parameter(format!("gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(Gaussian { mu, sigma })
    }

    /// exp(-(x-mu)^2 / (2 sigma^2)); 1 at the mean.
    pub fn membership(&self, x: f64) -> f64 {
        let d = x - self.mu;
        (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// A conditional probability: a point value or a gaussian over the value of
/// the conditioned element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbSpec {
    Point(f64),
    Gaussian(Gaussian),
}

impl ProbSpec {
    pub fn point(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("probability {p} outside [0,1]")));
        }
        Ok(ProbSpec::Point(p))
    }

    /// The probability at `value`. A gaussian with nothing to evaluate at
    /// places no restriction and yields 1.
    pub fn evaluate(&self, value: Option<f64>) -> f64 {
        match self {
            ProbSpec::Point(p) => *p,
            ProbSpec::Gaussian(g) => value.map_or(1.0, |x| g.membership(x)),
        }
    }

    pub fn as_point(&self) -> Option<f64> {
        match *self {
            ProbSpec::Point(p) => Some(p),
            ProbSpec::Gaussian(_) => None,
        }
    }
}

/// P(B|A) and P(A|B) of a relation between A and B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalProbabilityPair {
    pub forward: ProbSpec,
    pub backward: ProbSpec,
}

impl ConditionalProbabilityPair {
    pub fn points(pba: f64, pab: f64) -> Self {
        ConditionalProbabilityPair { forward: ProbSpec::Point(pba), backward: ProbSpec::Point(pab) }
    }

    /// The spec for moving from A to B (`forward`) or from B to A.
    pub fn toward(&self, forward: bool) -> &ProbSpec {
        if forward {
            &self.forward
        } else {
            &self.backward
        }
    }
}
