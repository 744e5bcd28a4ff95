//! Dual-rail encoding of signed reals as pairs of nonnegative concentrations.

use std::fmt;

use crate::error::{Error, Result};

/// A signed value `plus − minus` carried by two nonnegative concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualRailValue {
    pub plus: f64,
    pub minus: f64,
}

impl DualRailValue {
    pub const ZERO: DualRailValue = DualRailValue {
        plus: 0.0,
        minus: 0.0,
    };

    /// Builds a pair from raw rails; both must be finite and nonnegative.
    pub fn new(plus: f64, minus: f64) -> Result<Self> {
        if !(plus.is_finite() && minus.is_finite()) || plus < 0.0 || minus < 0.0 {
            return Err(Error::InvalidInput(format!(
                "dual-rail components must be finite and nonnegative, got ({plus}, {minus})"
            )));
        }
        Ok(DualRailValue { plus, minus })
    }

    /// `(max(v, 0), max(−v, 0))`.
    pub fn encode(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("cannot encode {v}")));
        }
        Ok(if v > 0.0 {
            DualRailValue {
                plus: v,
                minus: 0.0,
            }
        } else if v < 0.0 {
            DualRailValue {
                plus: 0.0,
                minus: -v,
            }
        } else {
            DualRailValue::ZERO
        })
    }

    pub fn decode(&self) -> f64 {
        self.plus - self.minus
    }

    /// Subtracts `min(plus, minus)` from both rails, the limit of a fast
    /// annihilation `X⁺ + X⁻ → ∅`.
    pub fn canonicalize(&self) -> Self {
        if self.plus >= self.minus {
            DualRailValue {
                plus: self.plus - self.minus,
                minus: 0.0,
            }
        } else {
            DualRailValue {
                plus: 0.0,
                minus: self.minus - self.plus,
            }
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.plus == 0.0 || self.minus == 0.0
    }
}

impl fmt::Display for DualRailValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.plus, self.minus)
    }
}

/// Encodes every element of a slice.
pub fn encode_all(values: &[f64]) -> Result<Vec<DualRailValue>> {
    values.iter().map(|&v| DualRailValue::encode(v)).collect()
}

pub fn decode_all(values: &[DualRailValue]) -> Vec<f64> {
    values.iter().map(DualRailValue::decode).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(plus: f64, minus: f64) -> DualRailValue {
        DualRailValue::new(plus, minus).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(DualRailValue::encode(3.5).unwrap(), pair(3.5, 0.0));
        assert_eq!(DualRailValue::encode(-2.0).unwrap(), pair(0.0, 2.0));
        assert_eq!(DualRailValue::encode(0.0).unwrap(), pair(0.0, 0.0));
        assert!(DualRailValue::encode(f64::NAN).is_err());
        assert!(DualRailValue::encode(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(pair(3.5, 0.0).decode(), 3.5);
        assert_eq!(pair(1.0, 4.0).decode(), -3.0);
        assert_eq!(pair(2.0, 2.0).decode(), 0.0);
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(pair(5.0, 2.0).canonicalize(), pair(3.0, 0.0));
        assert_eq!(pair(2.0, 5.0).canonicalize(), pair(0.0, 3.0));
        assert_eq!(pair(0.0, 0.0).canonicalize(), pair(0.0, 0.0));
    }

    #[test]
    fn negative_rails_rejected() {
        assert!(DualRailValue::new(-1.0, 0.0).is_err());
        assert!(DualRailValue::new(0.0, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn decode_after_encode_is_identity(v in -1e6f64..1e6) {
            let d = DualRailValue::encode(v).unwrap();
            prop_assert!(d.is_canonical());
            prop_assert_eq!(d.decode(), v);
        }

        #[test]
        fn encode_after_decode_is_canonicalize(p in 0f64..1e3, m in 0f64..1e3) {
            let d = pair(p, m);
            prop_assert_eq!(DualRailValue::encode(d.decode()).unwrap(), d.canonicalize());
        }

        #[test]
        fn canonicalize_is_idempotent_and_preserves_value(p in 0f64..1e3, m in 0f64..1e3) {
            let d = pair(p, m);
            let c = d.canonicalize();
            prop_assert!(c.is_canonical());
            prop_assert_eq!(c.canonicalize(), c);
            prop_assert_eq!(c.decode(), d.decode());
        }
    }
}
