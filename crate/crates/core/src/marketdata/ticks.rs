//! Exact fixed-point prices on the 0.01 currency-unit grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Price expressed as an integer number of 0.01 ticks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ticks(pub i64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub fn get(self) -> i64 {
        self.0
    }

    pub fn to_price(self) -> f64 {
        ticks_to_price(self)
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Ticks {
    type Err = Error;

    /// Parses a non-negative decimal string. Digits beyond the second decimal
    /// place are accepted only when they are zeros.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason| Error::Price {
            input: s.to_string(),
            reason,
        };
        let t = s.trim();
        if t.is_empty() {
            return Err(err("empty"));
        }
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("not a non-negative decimal"));
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("not a non-negative decimal"));
        }
        if frac_part.len() > 2 && frac_part[2..].bytes().any(|b| b != b'0') {
            return Err(err("more than 2 decimal places"));
        }
        let units: i64 = int_part.parse().map_err(|_| err("out of range"))?;
        let mut cents = 0i64;
        for (i, b) in frac_part.bytes().take(2).enumerate() {
            let d = (b - b'0') as i64;
            cents += if i == 0 { d * 10 } else { d };
        }
        units
            .checked_mul(100)
            .and_then(|v| v.checked_add(cents))
            .map(Ticks)
            .ok_or_else(|| err("out of range"))
    }
}

impl Serialize for Ticks {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ticks {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Converts a monetary amount to integer ticks, refusing to round away
/// information below the 0.01 grid.
pub fn price_to_ticks(price: f64) -> Result<Ticks> {
    let err = |reason| Error::Price {
        input: price.to_string(),
        reason,
    };
    if !price.is_finite() {
        return Err(err("not finite"));
    }
    if price < 0.0 {
        return Err(err("negative"));
    }
    let scaled = price * 100.0;
    if scaled > (i64::MAX / 2) as f64 {
        return Err(err("out of range"));
    }
    // Exact only if the candidate tick count maps back to the same double.
    let ticks = Ticks(scaled.round() as i64);
    if ticks_to_price(ticks) != price {
        return Err(err("more than 2 decimal places"));
    }
    Ok(ticks)
}

pub fn ticks_to_price(ticks: Ticks) -> f64 {
    ticks.0 as f64 / 100.0
}
