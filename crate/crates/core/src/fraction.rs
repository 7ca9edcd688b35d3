//! Exact counts-over-total values used for agreements and accuracies.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `num / den`, kept unreduced so the counts stay visible in traces.
/// A zero denominator reads as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 0 };

    pub fn new(num: u64, den: u64) -> Self {
        Fraction { num, den }
    }

    pub fn ratio(self) -> Ratio<u64> {
        if self.den == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(self.num, self.den)
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    pub fn percent(self) -> f64 {
        100.0 * self.to_f64()
    }

    /// Compares values, not representations: 2/4 equals 1/2.
    pub fn cmp_value(self, other: Fraction) -> Ordering {
        let lhs = self.num as u128 * other.den.max(1) as u128 * u128::from(self.den != 0);
        let rhs = other.num as u128 * self.den.max(1) as u128 * u128::from(other.den != 0);
        lhs.cmp(&rhs)
    }

    pub fn same_value(self, other: Fraction) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected a fraction like 8/10, got {0:?}")]
pub struct FractionParseError(String);

impl FromStr for Fraction {
    type Err = FractionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FractionParseError(s.to_string());
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        let num = n.trim().parse().map_err(|_| bad())?;
        let den = d.trim().parse().map_err(|_| bad())?;
        Ok(Fraction { num, den })
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_order() {
        assert!(Fraction::new(2, 4).same_value(Fraction::new(1, 2)));
        assert_eq!(Fraction::new(8, 10).cmp_value(Fraction::new(7, 10)), Ordering::Greater);
        assert!(Fraction::ZERO.same_value(Fraction::new(0, 5)));
        assert_eq!(Fraction::new(1, 5).cmp_value(Fraction::ZERO), Ordering::Greater);
    }

    #[test]
    fn text_form() {
        let f: Fraction = "8/10".parse().unwrap();
        assert_eq!(f, Fraction::new(8, 10));
        assert_eq!(serde_json::to_string(&f).unwrap(), "\"8/10\"");
        assert!("0.8".parse::<Fraction>().is_err());
    }
}
