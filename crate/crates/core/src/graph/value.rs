use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::Gaussian;

/// Payload of a value concept: a scalar or an open interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueTerm {
    Scalar(f64),
    Interval { lo: f64, hi: f64 },
}

impl ValueTerm {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Parameter(format!("interval needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(ValueTerm::Interval { lo, hi })
    }

    pub fn scalar(&self) -> Option<f64> {
        match *self {
            ValueTerm::Scalar(s) => Some(s),
            ValueTerm::Interval { .. } => None,
        }
    }

    /// Containment used by value belong-to. A scalar sits strictly inside an
    /// interval; an interval is contained in another when its bounds are.
    /// Equal scalars contain each other.
    pub fn contained_in(&self, other: &ValueTerm) -> bool {
        match (*self, *other) {
            (ValueTerm::Scalar(s), ValueTerm::Interval { lo, hi }) => lo < s && s < hi,
            (ValueTerm::Interval { lo: l1, hi: h1 }, ValueTerm::Interval { lo: l2, hi: h2 }) => {
                l2 <= l1 && h1 <= h2
            }
            (ValueTerm::Scalar(a), ValueTerm::Scalar(b)) => a == b,
            (ValueTerm::Interval { .. }, ValueTerm::Scalar(_)) => false,
        }
    }
}

/// A named parameter on a concept or relation.
///
/// Observed instances carry `Real`/`Text` values; base knowledge may instead
/// declare a distribution (`Gauss`) or an admissible range (`Interval`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Real(f64),
    Text(String),
    Gauss(Gaussian),
    Interval { lo: f64, hi: f64 },
}

impl Param {
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Param::Real(v) => Some(v),
            _ => None,
        }
    }

    /// Membership of an observation `self` under the specification `spec`.
    ///
    /// Only real and text observations count as evidence; a distribution or
    /// range on the instance side is a copied specification and scores 1.
    pub fn membership_under(&self, spec: &Param) -> f64 {
        match (self, spec) {
            (Param::Real(x), Param::Gauss(g)) => g.membership(*x),
            (Param::Real(x), Param::Interval { lo, hi }) => {
                if lo < x && x < hi {
                    1.0
                } else {
                    0.0
                }
            }
            (Param::Real(x), Param::Real(s)) => {
                if (x - s).abs() <= 1e-9 * s.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            (Param::Text(a), Param::Text(b)) => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 1.0,
        }
    }

    /// Whether a derived specification stays inside the base one.
    pub(crate) fn within(&self, base: &Param) -> bool {
        match (self, base) {
            (Param::Real(x), Param::Interval { lo, hi }) => lo < x && x < hi,
            (Param::Interval { lo: l1, hi: h1 }, Param::Interval { lo: l2, hi: h2 }) => {
                l2 <= l1 && h1 <= h2
            }
            (Param::Gauss(g), Param::Interval { lo, hi }) => *lo < g.mu && g.mu < *hi,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_in_interval_is_strict() {
        let i = ValueTerm::interval(20.0, 30.0).unwrap();
        assert!(ValueTerm::Scalar(25.0).contained_in(&i));
        assert!(!ValueTerm::Scalar(20.0).contained_in(&i));
        assert!(!ValueTerm::Scalar(30.0).contained_in(&i));
    }

    #[test]
    fn interval_containment_allows_shared_bounds() {
        let outer = ValueTerm::interval(0.0, 10.0).unwrap();
        let inner = ValueTerm::interval(0.0, 4.0).unwrap();
        assert!(inner.contained_in(&outer));
        assert!(!outer.contained_in(&inner));
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(ValueTerm::interval(3.0, 3.0).is_err());
        assert!(ValueTerm::interval(4.0, 3.0).is_err());
    }

    #[test]
    fn param_membership() {
        let spec = Param::Gauss(Gaussian::new(0.0, 10.0).unwrap());
        let m = Param::Real(10.0).membership_under(&spec);
        assert!((m - (-0.5f64).exp()).abs() < 1e-12);
        let range = Param::Interval { lo: 0.0, hi: 5.0 };
        assert_eq!(Param::Real(7.0).membership_under(&range), 0.0);
        assert_eq!(Param::Real(2.0).membership_under(&range), 1.0);
        assert_eq!(spec.membership_under(&range), 1.0);
    }
}
