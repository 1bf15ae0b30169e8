use super::tape::{Tape, Var};
use crate::error::Result;

/// Magnitude below which discrepancies are judged in absolute terms.
pub const SMALL_GRADIENT: f64 = 1e-4;

/// Worst-case disagreement between reverse-mode and central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max `|a − f| / max(|a|, |f|)` over entries with magnitude ≥ 1e-4.
    pub max_rel_error: f64,
    /// Max `|a − f|` over entries with magnitude < 1e-4.
    pub max_abs_error: f64,
    /// Index of the worst relative entry.
    pub worst_index: Option<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheckReport {
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.max_rel_error <= rel_tol && self.max_abs_error <= abs_tol
    }
}

/// Compares the tape gradient of `f` at `params` with central differences
/// of step `step`. `f` must build a scalar on the supplied tape from the
/// supplied parameter values and be deterministic.
pub fn grad_check<F>(f: F, params: &[f64], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[f64]) -> Result<Var>,
{
    let mut tape = Tape::new(params.len());
    let loss = f(&mut tape, params)?;
    let analytic = tape.backward(loss)?;

    let mut probe = params.to_vec();
    let eval = |p: &[f64]| -> Result<f64> {
        let mut t = Tape::new(p.len());
        let v = f(&mut t, p)?;
        Ok(t.scalar(v))
    };
    let mut numeric = vec![0.0; params.len()];
    for i in 0..params.len() {
        let x = probe[i];
        probe[i] = x + step;
        let up = eval(&probe)?;
        probe[i] = x - step;
        let down = eval(&probe)?;
        probe[i] = x;
        numeric[i] = (up - down) / (2.0 * step);
    }

    let mut max_rel_error: f64 = 0.0;
    let mut max_abs_error: f64 = 0.0;
    let mut worst_index = None;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let scale = a.abs().max(n.abs());
        let diff = (a - n).abs();
        if !diff.is_finite() {
            max_rel_error = f64::INFINITY;
            worst_index = Some(i);
        } else if scale >= SMALL_GRADIENT {
            let rel = diff / scale;
            if rel > max_rel_error {
                max_rel_error = rel;
                worst_index = Some(i);
            }
        } else {
            max_abs_error = max_abs_error.max(diff);
        }
    }
    Ok(GradCheckReport { max_rel_error, max_abs_error, worst_index, analytic, numeric })
}
