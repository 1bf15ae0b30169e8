use crate::error::{Error, Result};
use crate::qcore::CMat2;

/// `‖A − B‖_F²` over the eight real components.
pub fn frobenius_sq(a: &CMat2, b: &CMat2) -> f64 {
    (*a - *b).frobenius_norm_sqr()
}

/// Mean over time steps, then over batch members, of `‖ρ̂ − ρ‖_F²`.
pub fn frobenius_loss(pred: &[Vec<CMat2>], truth: &[Vec<CMat2>]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Shape(format!("{} predicted vs {} true sequences", pred.len(), truth.len())));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() || p.is_empty() {
            return Err(Error::Shape(format!("sequence lengths {} and {}", p.len(), t.len())));
        }
        total += p.iter().zip(t).map(|(a, b)| frobenius_sq(a, b)).sum::<f64>() / p.len() as f64;
    }
    Ok(total / pred.len() as f64)
}
