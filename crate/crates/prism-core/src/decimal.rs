//! Exact base-10 numerals.
//!
//! Prism never computes with numbers; it only compares them. Literals are
//! kept as scaled integers so `20.5` and `23` compare exactly and `23.0`
//! equals `23`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// A non-negative decimal: `units * 10^-scale`, normalized so that either
/// `scale == 0` or `units % 10 != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    units: u128,
    scale: u32,
}

impl Decimal {
    pub fn from_int(n: u64) -> Self {
        Decimal {
            units: n as u128,
            scale: 0,
        }
    }

    fn normalize(mut units: u128, mut scale: u32) -> Self {
        while scale > 0 && units % 10 == 0 {
            units /= 10;
            scale -= 1;
        }
        Decimal { units, scale }
    }

    /// Compare by aligning scales. Widening to the larger scale cannot
    /// overflow because literals are capped at 30 digits when parsed.
    fn aligned(self, other: Decimal) -> (u128, u128) {
        let (mut a, mut b) = (self.units, other.units);
        match self.scale.cmp(&other.scale) {
            Ordering::Less => a *= 10u128.pow(other.scale - self.scale),
            Ordering::Greater => b *= 10u128.pow(self.scale - other.scale),
            Ordering::Equal => {}
        }
        (a, b)
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.aligned(*other);
        a.cmp(&b)
    }
}

/// Parse failure reason; the lexer maps this onto a positioned diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecimalError {
    Malformed,
    TooLarge,
}

impl FromStr for Decimal {
    type Err = DecimalError;

    /// Accepts `[0-9]+(\.[0-9]+)?`.
    fn from_str(s: &str) -> Result<Self, DecimalError> {
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty()
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || (s.contains('.') && frac_part.is_empty())
        {
            return Err(DecimalError::Malformed);
        }
        if int_part.len() + frac_part.len() > 30 {
            return Err(DecimalError::TooLarge);
        }
        let mut units: u128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            units = units * 10 + (b - b'0') as u128;
        }
        Ok(Decimal::normalize(units, frac_part.len() as u32))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.units);
        }
        let digits = self.units.to_string();
        let scale = self.scale as usize;
        if digits.len() > scale {
            let (int_part, frac_part) = digits.split_at(digits.len() - scale);
            write!(f, "{int_part}.{frac_part}")
        } else {
            write!(f, "0.{}{}", "0".repeat(scale - digits.len()), digits)
        }
    }
}
