use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SamplerKind {
    Basic,
    Bernoulli,
    PseudoTyped,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Basic, SamplerKind::Bernoulli, SamplerKind::PseudoTyped];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossKind {
    MarginRanking,
    #[serde(rename = "BCE")]
    Bce,
    CrossEntropy,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::MarginRanking, LossKind::Bce, LossKind::CrossEntropy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn uses_margin(self) -> bool {
        self == LossKind::MarginRanking
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Bce => f.write_str("BCE"),
            other => fmt::Debug::fmt(other, f),
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "basic" => Ok(SamplerKind::Basic),
            "bernoulli" => Ok(SamplerKind::Bernoulli),
            "pseudotyped" => Ok(SamplerKind::PseudoTyped),
            _ => Err(format!("unknown negative sampler '{s}'")),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "marginranking" => Ok(LossKind::MarginRanking),
            "bce" | "binarycrossentropy" => Ok(LossKind::Bce),
            "crossentropy" => Ok(LossKind::CrossEntropy),
            _ => Err(format!("unknown loss '{s}'")),
        }
    }
}

/// One point of the ComplEx hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparamConfig {
    pub sampler: SamplerKind,
    pub negatives: u32,
    pub loss: LossKind,
    /// Present exactly when `loss` is margin ranking.
    pub margin: Option<f64>,
    pub learning_rate: f64,
    pub dimension: usize,
    pub reg_coefficient: f64,
    pub epochs: usize,
}

impl Default for HyperparamConfig {
    fn default() -> Self {
        HyperparamConfig {
            sampler: SamplerKind::Basic,
            negatives: 25,
            loss: LossKind::CrossEntropy,
            margin: None,
            learning_rate: 1e-2,
            dimension: 50,
            reg_coefficient: 1e-6,
            epochs: 100,
        }
    }
}

impl HyperparamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match (self.loss.uses_margin(), self.margin) {
            (true, None) => return bad("margin ranking loss requires a margin".into()),
            (false, Some(_)) => return bad(format!("{} loss takes no margin", self.loss)),
            (true, Some(m)) if !(m.is_finite() && m > 0.0) => return bad(format!("margin {m} must be positive")),
            _ => {}
        }
        if self.negatives == 0 {
            return bad("negatives per positive must be at least 1".into());
        }
        if self.dimension == 0 {
            return bad("embedding dimension must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.reg_coefficient.is_finite() && self.reg_coefficient >= 0.0) {
            return bad(format!(
                "regularisation coefficient {} must be non-negative",
                self.reg_coefficient
            ));
        }
        Ok(())
    }

    /// `key=value` pairs sorted by key; the basis of [`config_hash`](Self::config_hash).
    pub fn canonical_string(&self) -> String {
        let margin = self.margin.map_or_else(|| "none".to_owned(), |m| format!("{m:e}"));
        let mut fields = [
            ("dimension", self.dimension.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", format!("{:e}", self.learning_rate)),
            ("loss", self.loss.to_string()),
            ("margin", margin),
            ("negatives", self.negatives.to_string()),
            ("reg_coefficient", format!("{:e}", self.reg_coefficient)),
            ("sampler", self.sampler.to_string()),
        ];
        fields.sort_by(|a, b| a.0.cmp(b.0));
        fields
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Stable 16-hex-digit identity of this configuration.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
