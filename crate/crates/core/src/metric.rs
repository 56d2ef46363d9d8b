//! The one-parameter linear metric `a0 * TN + (1 - a0) * TP` and its
//! correspondence with the optimal threshold.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::confusion::ConfusionVector;
use crate::error::{Error, Result};

/// Linear performance metric with weight `a0` on TN and `1 - a0` on TP.
/// The weight vector is L1-normalized by construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "RawMetric")]
pub struct LinearMetric {
    a0: f64,
}

#[derive(Deserialize)]
struct RawMetric {
    a0: f64,
}

impl TryFrom<RawMetric> for LinearMetric {
    type Error = Error;

    fn try_from(raw: RawMetric) -> Result<Self> {
        LinearMetric::new(raw.a0)
    }
}

/// Outcome of comparing two confusion vectors under a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Left,
    Right,
    Tie,
}

impl LinearMetric {
    pub fn new(a0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a0) {
            return Err(Error::validation(format!("metric weight a0={a0} outside [0, 1]")));
        }
        Ok(Self { a0 })
    }

    /// Normalizes arbitrary nonnegative (TN, TP) weights to unit L1 norm.
    pub fn from_weights(tn_weight: f64, tp_weight: f64) -> Result<Self> {
        if !(tn_weight >= 0.0 && tp_weight >= 0.0 && tn_weight + tp_weight > 0.0) {
            return Err(Error::validation(format!(
                "weights ({tn_weight}, {tp_weight}) must be nonnegative and not both zero"
            )));
        }
        Self::new(tn_weight / (tn_weight + tp_weight))
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn tn_weight(&self) -> f64 {
        self.a0
    }

    pub fn tp_weight(&self) -> f64 {
        1.0 - self.a0
    }

    pub fn value(&self, c: &ConfusionVector) -> f64 {
        self.a0 * c.tn + (1.0 - self.a0) * c.tp
    }

    /// `Left` iff the left value exceeds the right by more than
    /// `tie_epsilon`, `Right` symmetrically, `Tie` otherwise.
    pub fn prefer(
        &self,
        left: &ConfusionVector,
        right: &ConfusionVector,
        tie_epsilon: f64,
    ) -> Result<Preference> {
        if left.pi != right.pi {
            return Err(Error::contract(format!(
                "compared confusions have different base rates ({} vs {})",
                left.pi, right.pi
            )));
        }
        let (l, r) = (self.value(left), self.value(right));
        Ok(if l > r + tie_epsilon {
            Preference::Left
        } else if r > l + tie_epsilon {
            Preference::Right
        } else {
            Preference::Tie
        })
    }

    /// The Bayes-optimal threshold on P(Y = 1 | x) for this metric, which is
    /// the TN weight itself.
    pub fn optimal_threshold(&self) -> f64 {
        self.a0
    }

    pub fn from_threshold(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

/// Renders as `"0.141 TN + 0.859 TP"`; the stored weight stays exact.
impl fmt::Display for LinearMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} TN + {:.3} TP", self.tn_weight(), self.tp_weight())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(tp: f64, tn: f64) -> ConfusionVector {
        ConfusionVector { tp, tn, pi: 0.6 }
    }

    #[test]
    fn value_arithmetic() {
        let m = LinearMetric::new(0.5).unwrap();
        assert!((m.value(&cv(0.3, 0.4)) - 0.35).abs() < 1e-15);
        let c = cv(0.3, 0.4);
        assert_eq!(LinearMetric::new(0.0).unwrap().value(&c), c.tp);
        let m = LinearMetric::new(0.875).unwrap();
        assert!((m.value(&cv(0.2, 0.6)) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn prefer_picks_larger_value() {
        let m = LinearMetric::new(0.125).unwrap();
        assert_eq!(m.prefer(&cv(0.6, 0.2), &cv(0.2, 0.6), 0.0).unwrap(), Preference::Left);
        assert_eq!(m.prefer(&cv(0.2, 0.6), &cv(0.6, 0.2), 0.0).unwrap(), Preference::Right);
        assert_eq!(m.prefer(&cv(0.2, 0.3), &cv(0.2, 0.3), 0.0).unwrap(), Preference::Tie);
    }

    #[test]
    fn zero_tie_epsilon_is_strict() {
        let m = LinearMetric::new(0.0).unwrap();
        let a = cv(0.5, 0.1);
        let b = cv(0.5 - 1e-15, 0.1);
        assert_eq!(m.prefer(&a, &b, 0.0).unwrap(), Preference::Left);
        assert_eq!(m.prefer(&a, &b, 1e-9).unwrap(), Preference::Tie);
    }

    #[test]
    fn prefer_rejects_mismatched_base_rates() {
        let m = LinearMetric::new(0.5).unwrap();
        let other = ConfusionVector { tp: 0.1, tn: 0.1, pi: 0.3 };
        assert!(matches!(m.prefer(&cv(0.1, 0.1), &other, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn threshold_correspondence() {
        for a0 in [0.0, 0.125, 1.0] {
            let m = LinearMetric::new(a0).unwrap();
            assert_eq!(m.optimal_threshold(), a0);
            assert_eq!(LinearMetric::from_threshold(m.optimal_threshold()).unwrap(), m);
        }
        assert!(LinearMetric::from_threshold(1.5).is_err());
    }

    #[test]
    fn display_rounds_to_three_decimals() {
        let show = |a0| LinearMetric::new(a0).unwrap().to_string();
        assert_eq!(show(0.140625), "0.141 TN + 0.859 TP");
        assert_eq!(show(0.125), "0.125 TN + 0.875 TP");
        assert_eq!(show(0.03125), "0.031 TN + 0.969 TP");
        assert_eq!(show(0.328125), "0.328 TN + 0.672 TP");
        assert_eq!(show(0.359375), "0.359 TN + 0.641 TP");
        assert_eq!(LinearMetric::new(0.140625).unwrap().a0(), 0.140625);
    }

    #[test]
    fn from_weights_normalizes() {
        let m = LinearMetric::from_weights(1.0, 7.0).unwrap();
        assert_eq!(m.a0(), 0.125);
        assert!(LinearMetric::from_weights(0.0, 0.0).is_err());
    }

    #[test]
    fn json_form() {
        let m = LinearMetric::new(0.25).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"a0":0.25}"#);
        assert!(serde_json::from_str::<LinearMetric>(r#"{"a0":2.0}"#).is_err());
    }
}
