use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Rnn,
    Gru,
    Lstm,
    Esn,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 4] = [BackboneKind::Rnn, BackboneKind::Gru, BackboneKind::Lstm, BackboneKind::Esn];

    /// Gate names in parameter order; empty for the untrained ESN reservoir.
    pub fn gates(&self) -> &'static [&'static str] {
        match self {
            BackboneKind::Rnn => &["cell"],
            BackboneKind::Gru => &["z", "r", "n"],
            BackboneKind::Lstm => &["i", "f", "g", "o"],
            BackboneKind::Esn => &[],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BackboneKind::Rnn => "rnn",
            BackboneKind::Gru => "gru",
            BackboneKind::Lstm => "lstm",
            BackboneKind::Esn => "esn",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(BackboneKind::Rnn),
            "gru" => Ok(BackboneKind::Gru),
            "lstm" => Ok(BackboneKind::Lstm),
            "esn" => Ok(BackboneKind::Esn),
            other => Err(Error::Config(format!("unknown backbone '{other}' (rnn, gru, lstm, esn)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: BackboneKind,
    pub hidden_dim: usize,
    pub layers: usize,
    pub input_dim: usize,
    /// Input and reservoir scaling of the ESN.
    pub esn_scaling: f64,
    /// Seed of the frozen ESN reservoir.
    pub esn_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { kind: BackboneKind::Gru, hidden_dim: 32, layers: 1, input_dim: 1, esn_scaling: 0.5, esn_seed: 0 }
    }
}

impl ModelConfig {
    pub fn new(kind: BackboneKind, hidden_dim: usize) -> Self {
        ModelConfig { kind, hidden_dim, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(Error::Config(format!("layers must be 1 or 2, got {}", self.layers)));
        }
        if self.kind == BackboneKind::Esn && self.layers != 1 {
            return Err(Error::Config("the ESN reservoir is single-layer".into()));
        }
        if self.input_dim != 1 {
            return Err(Error::Config("the filters consume the scalar record only (input_dim = 1)".into()));
        }
        Ok(())
    }

    /// Number of trainable backbone weights:
    /// `G · Σ_l (H·d_l + H² + H)` with `G` gates and `d_0 = input_dim`,
    /// `d_l = H` above; zero for the ESN.
    pub fn backbone_param_count(&self) -> usize {
        let h = self.hidden_dim;
        let g = self.kind.gates().len();
        (0..self.layers)
            .map(|l| {
                let d = if l == 0 { self.input_dim } else { h };
                g * (h * d + h * h + h)
            })
            .sum()
    }
}
