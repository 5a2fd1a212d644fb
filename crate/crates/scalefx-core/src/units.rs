//! Fixed-point quantities.
//!
//! The scale's wire format stores every body metric in 0.1 units (a weight
//! byte pair of 896 means 89.6 kg). Keeping that integer representation end
//! to end makes cross-source equality checks exact and report output
//! deterministic; floats only appear at the serialization boundary.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// A decimal with exactly one fractional digit, stored as integer tenths.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Deci(i32);

impl Deci {
    pub const ZERO: Deci = Deci(0);

    pub const fn from_tenths(tenths: i32) -> Self {
        Deci(tenths)
    }

    pub const fn tenths(self) -> i32 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    /// Nearest-tenth conversion, halves rounded away from zero.
    pub fn from_f64(value: f64) -> Self {
        Deci((value * 10.0).round() as i32)
    }

    /// |self - other| in tenths.
    pub fn abs_diff(self, other: Deci) -> u32 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Deci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl fmt::Debug for Deci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Deci({self})")
    }
}

impl FromStr for Deci {
    type Err = crate::Error;

    /// Accepts `89.6`, `-3.25` (rounded half away from zero), `90`, `+0.4`.
    fn from_str(s: &str) -> crate::Result<Self> {
        let t = s.trim();
        let bad = || crate::Error::InvalidInput(format!("not a decimal number: {s:?}"));
        let (neg, digits) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac = frac_part.as_bytes();
        let first = frac.first().map_or(0, |b| i64::from(b - b'0'));
        let carry = i64::from(frac.get(1).is_some_and(|&b| b >= b'5'));
        let tenths = whole * 10 + first + carry;
        let tenths = if neg { -tenths } else { tenths };
        i32::try_from(tenths)
            .map(Deci)
            .map_err(|_| crate::Error::InvalidInput(format!("decimal out of range: {s:?}")))
    }
}

impl Serialize for Deci {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Deci {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Ok(Deci::from_f64(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tenths_roundtrip() {
        let w = Deci::from_tenths(896);
        assert_eq!(w.tenths(), 896);
        assert_eq!(w.to_f64(), 89.6);
        assert_eq!(w.to_string(), "89.6");
    }

    #[test]
    fn negative_display() {
        assert_eq!(Deci::from_tenths(-7).to_string(), "-0.7");
        assert_eq!(Deci::from_tenths(-123).to_string(), "-12.3");
    }

    #[test]
    fn parse_accepts_common_forms() {
        assert_eq!("89.6".parse::<Deci>().unwrap(), Deci::from_tenths(896));
        assert_eq!("90".parse::<Deci>().unwrap(), Deci::from_tenths(900));
        assert_eq!("+0.4".parse::<Deci>().unwrap(), Deci::from_tenths(4));
        assert_eq!("-3.25".parse::<Deci>().unwrap(), Deci::from_tenths(-33));
        assert_eq!("0.249".parse::<Deci>().unwrap(), Deci::from_tenths(2));
        assert_eq!(".5".parse::<Deci>().unwrap(), Deci::from_tenths(5));
    }

    #[test]
    fn parse_rejects_junk() {
        for s in ["", ".", "abc", "1.2.3", "--1", "1e3"] {
            assert!(s.parse::<Deci>().is_err(), "{s:?} should not parse");
        }
    }

    #[test]
    fn json_is_plain_number() {
        let j = serde_json::to_string(&Deci::from_tenths(896)).unwrap();
        assert_eq!(j, "89.6");
        let back: Deci = serde_json::from_str(&j).unwrap();
        assert_eq!(back, Deci::from_tenths(896));
    }

    #[test]
    fn from_f64_rounds_half_away_from_zero() {
        assert_eq!(Deci::from_f64(1.25), Deci::from_tenths(13));
        assert_eq!(Deci::from_f64(-1.25), Deci::from_tenths(-13));
        assert_eq!(Deci::from_f64(89.6), Deci::from_tenths(896));
    }

    #[test]
    fn abs_diff_in_tenths() {
        assert_eq!(Deci::from_tenths(896).abs_diff(Deci::from_tenths(904)), 8);
        assert_eq!(Deci::from_tenths(-5).abs_diff(Deci::from_tenths(5)), 10);
    }
}
