use serde::{Deserialize, Serialize};

use super::data::Sequence;
use super::fit::{batch_gradient, TrainRunConfig};
use crate::error::Result;
use crate::model::Model;

/// L2 norm of the loss gradient restricted to one named parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockNorm {
    pub name: String,
    pub norm: f64,
    /// Frozen blocks (the ESN reservoir) report exactly zero.
    pub frozen: bool,
}

/// Gradient norms per block from one jitter-free forward-backward pass over
/// `batch`.
pub fn layerwise_grad_norms(model: &Model, params: &[f64], seqs: &[Sequence], batch: &[usize]) -> Result<Vec<BlockNorm>> {
    let run = TrainRunConfig { jitter: false, validity_fraction: 0.0, ..Default::default() };
    let (_, grad, _, _) = batch_gradient(model, params, seqs, batch, &run, 0)?;
    let mut out = Vec::new();
    if model.backbone.reservoir.is_some() {
        for name in ["reservoir.w_in", "reservoir.w_res"] {
            out.push(BlockNorm { name: name.into(), norm: 0.0, frozen: true });
        }
    }
    for b in &model.layout.blocks {
        let norm = grad[b.range()].iter().map(|g| g * g).sum::<f64>().sqrt();
        out.push(BlockNorm { name: b.name.clone(), norm, frozen: false });
    }
    Ok(out)
}
