use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Edge weight of the arboreal gas. `Infinite` selects the uniform law on
/// maximal spanning forests.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn new(value: f64) -> Result<Self, Error> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {value}")));
        }
        Ok(if value.is_infinite() { Beta::Infinite } else { Beta::Finite(value) })
    }

    /// Probability that an unconstrained edge is open: `beta / (1 + beta)`.
    pub fn open_probability(self) -> f64 {
        match self {
            Beta::Finite(b) => b / (1.0 + b),
            Beta::Infinite => 1.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "INF" | "∞" => Ok(Beta::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse beta `{other}`")))
                .and_then(Beta::new),
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(b) => s.serialize_f64(*b),
            Beta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Beta::new(x),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}
