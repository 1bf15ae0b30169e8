//! Value-level recurrent cells on flat row-major slices.

use crate::ad::sigmoid;

/// Weights of one gate: `W_x` (`H × d`), `W_h` (`H × H`), `b` (`H`).
#[derive(Clone, Copy, Debug)]
pub struct GateView<'a> {
    pub w_x: &'a [f64],
    pub w_h: &'a [f64],
    pub b: &'a [f64],
}

impl GateView<'_> {
    /// `W_x x + W_h h + b`
    pub fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let (hd, d) = (self.b.len(), x.len());
        (0..hd)
            .map(|i| {
                let wx: f64 = self.w_x[i * d..(i + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum();
                let wh: f64 = self.w_h[i * hd..(i + 1) * hd].iter().zip(h).map(|(w, v)| w * v).sum();
                wx + wh + self.b[i]
            })
            .collect()
    }
}

/// `h' = tanh(W_x x + W_h h + b)`
pub fn rnn_step(h: &[f64], x: &[f64], cell: &GateView<'_>) -> Vec<f64> {
    cell.preactivation(x, h).into_iter().map(f64::tanh).collect()
}

/// Gates in order update `z`, reset `r`, candidate `n`:
///
/// ```text
/// z = σ(W_xz x + W_hz h + b_z)
/// r = σ(W_xr x + W_hr h + b_r)
/// n = tanh(W_xn x + W_hn (r ⊙ h) + b_n)
/// h' = z ⊙ h + (1 − z) ⊙ n
/// ```
pub fn gru_step(h: &[f64], x: &[f64], gates: &[GateView<'_>; 3]) -> Vec<f64> {
    let z: Vec<f64> = gates[0].preactivation(x, h).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gates[1].preactivation(x, h).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n = gates[2].preactivation(x, &rh);
    (0..h.len()).map(|i| z[i] * h[i] + (1.0 - z[i]) * n[i].tanh()).collect()
}

/// Gates in order input `i`, forget `f`, cell candidate `g`, output `o`;
/// `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`. No peepholes.
pub fn lstm_step(h: &[f64], c: &[f64], x: &[f64], gates: &[GateView<'_>; 4]) -> (Vec<f64>, Vec<f64>) {
    let i: Vec<f64> = gates[0].preactivation(x, h).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gates[1].preactivation(x, h).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gates[2].preactivation(x, h).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = gates[3].preactivation(x, h).into_iter().map(sigmoid).collect();
    let c_next: Vec<f64> = (0..h.len()).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
    let h_next = (0..h.len()).map(|k| o[k] * c_next[k].tanh()).collect();
    (h_next, c_next)
}
