//! Fixed-point decimals for report files.
//!
//! Values are stored as integers scaled by `10^SCALE` and written as decimal
//! strings, so a report parses back to exactly what was emitted.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal<const SCALE: u32>(pub i64);

/// Milliseconds with microsecond resolution.
pub type Millis = Decimal<3>;
/// Dimensionless ratio with six decimals.
pub type Ratio = Decimal<6>;

impl<const SCALE: u32> Decimal<SCALE> {
    const UNIT: i64 = 10i64.pow(SCALE);

    pub fn from_f64(v: f64) -> Self {
        Self((v * Self::UNIT as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::UNIT as f64
    }
}

impl<const SCALE: u32> From<f64> for Decimal<SCALE> {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl<const SCALE: u32> fmt::Display for Decimal<SCALE> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = Self::UNIT as u64;
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / unit,
            abs % unit,
            width = SCALE as usize
        )
    }
}

impl<const SCALE: u32> FromStr for Decimal<SCALE> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a decimal with at most {SCALE} fractional digits");
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int.is_empty() || frac.len() > SCALE as usize || !all_digits(int) || !all_digits(frac) {
            return Err(bad());
        }
        let int: i64 = int.parse().map_err(|_| bad())?;
        let frac: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse::<i64>().map_err(|_| bad())? * 10i64.pow(SCALE - frac.len() as u32)
        };
        let v = int
            .checked_mul(Self::UNIT)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Self(if neg { -v } else { v }))
    }
}

impl<const SCALE: u32> Serialize for Decimal<SCALE> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, const SCALE: u32> Deserialize<'de> for Decimal<SCALE> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(Millis::from_f64(10.0).to_string(), "10.000");
        assert_eq!(Millis::from_f64(0.0004).to_string(), "0.000");
        assert_eq!(Millis::from_f64(215.0005).to_string(), "215.001");
        assert_eq!(Millis::from_f64(-1.25).to_string(), "-1.250");
        assert_eq!(Ratio::from_f64(1.0740740740).to_string(), "1.074074");
    }

    #[test]
    fn parsing() {
        assert_eq!("12.5".parse::<Millis>(), Ok(Decimal(12_500)));
        assert_eq!("7".parse::<Millis>(), Ok(Decimal(7_000)));
        assert_eq!("-0.001".parse::<Millis>(), Ok(Decimal(-1)));
        for bad in ["", ".5", "1.2345", "1e3", "1.-2", "abc"] {
            assert!(bad.parse::<Millis>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_round_trip() {
        let v = vec![
            Millis::from_f64(3.1234),
            Decimal(i64::MAX / 2),
            Decimal(-42),
        ];
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vec<Millis>>(&json).unwrap(), v);
        assert!(json.starts_with("[\"3.123\""));
    }
}
