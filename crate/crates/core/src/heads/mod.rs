//! Output heads: a Kraus-structured CPTP update and an unconstrained
//! direct regression of the next state.

mod direct;
mod graph;
mod kraus;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use direct::{direct_from_outputs, direct_predict, DIRECT_TRACE_FLOOR};
pub use graph::{direct_step_tape, frobenius_loss_tape, kraus_step_tape, linear_tape, thin_qr_tape};
pub use kraus::{
    build_v, kraus_from_q, kraus_update, kraus_update_with, stiefel_error, thin_qr, CMat42,
    KRAUS_EPS, QR_RANK_TOL,
};

/// Number of raw outputs of the Kraus head (re and im of a 4×2 matrix).
pub const KRAUS_OUTPUTS: usize = 16;
/// Number of raw outputs of the direct head (re and im of a 2×2 matrix).
pub const DIRECT_OUTPUTS: usize = 8;
/// Standard deviation of the training-time jitter added to the Kraus outputs.
pub const JITTER_STD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Kraus,
    Direct,
}

impl HeadKind {
    pub fn outputs(&self) -> usize {
        match self {
            HeadKind::Kraus => KRAUS_OUTPUTS,
            HeadKind::Direct => DIRECT_OUTPUTS,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HeadKind::Kraus => "kraus",
            HeadKind::Direct => "direct",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kraus" => Ok(HeadKind::Kraus),
            "direct" => Ok(HeadKind::Direct),
            other => Err(Error::Config(format!("unknown head '{other}' (kraus, direct)"))),
        }
    }
}

/// `o = W h + b` with `W` stored row-major as `outputs × hidden`.
pub fn linear(w: &[f64], b: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| w[i * n..(i + 1) * n].iter().zip(h).map(|(a, x)| a * x).sum::<f64>() + bi)
        .collect()
}
