use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Neumaier-compensated sum; exact to within a couple of ulps of the true sum
/// for any ordering of the inputs.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    /// `ln(base)`, the divisor turning nats into this unit.
    pub fn ln_base(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::Ten => std::f64::consts::LN_10,
        }
    }

    pub fn log(self, x: f64) -> f64 {
        x.ln() / self.ln_base()
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Natural => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        })
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<LogBase> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "ln" | "natural" | "nat" | "nats" => Ok(LogBase::Natural),
            "2" | "bits" => Ok(LogBase::Two),
            "10" => Ok(LogBase::Ten),
            other => Err(Error::Config(format!("unsupported log base `{other}` (use e, 2 or 10)"))),
        }
    }
}

impl Serialize for LogBase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LogBase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A discrete probability distribution over labelled outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.is_empty() || labels.len() != probs.len() {
            return Err(Error::Validation(format!(
                "distribution needs matching nonempty labels and probabilities ({} vs {})",
                labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Validation("probabilities must be finite and non-negative".into()));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Distribution { labels, probs })
    }

    /// Normalises non-negative weights (counts or areas).
    pub fn from_weights(labels: Vec<String>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("weights must be finite and non-negative".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Degenerate("weights sum to zero".into()));
        }
        Distribution::new(labels, weights.iter().map(|w| w / total).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `-Σ p log p` with `0 log 0 = 0`, clamped to `[0, log |labels|]`.
pub fn shannon_entropy(d: &Distribution, base: LogBase) -> f64 {
    let h = compensated_sum(d.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()));
    let max = (d.probs.len() as f64).ln();
    h.clamp(0.0, max) / base.ln_base()
}

/// Entropy (nats) of the distribution proportional to `weights`; 0 when all
/// weights are zero.
pub(crate) fn entropy_of_weights(weights: &[f64]) -> f64 {
    let total = compensated_sum(weights.iter().copied());
    if !(total > 0.0) {
        return 0.0;
    }
    let h = compensated_sum(weights.iter().filter(|&&w| w > 0.0).map(|&w| {
        let p = w / total;
        -p * p.ln()
    }));
    h.clamp(0.0, (weights.len() as f64).ln())
}
