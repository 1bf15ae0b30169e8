use crate::rng::SplitMix64;

/// Frozen echo-state reservoir. Never part of the trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir {
    pub hidden: usize,
    pub scaling: f64,
    /// `H × 1`, entries uniform on [−1, 1].
    pub w_in: Vec<f64>,
    /// `H × H`, entries `N(0, 1)/√H` (spectral radius ≈ 1 by the circular law).
    pub w_res: Vec<f64>,
}

impl Reservoir {
    pub fn new(hidden: usize, scaling: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::child(seed, 0xE5);
        let w_in = (0..hidden).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let inv = 1.0 / (hidden as f64).sqrt();
        let w_res = (0..hidden * hidden).map(|_| rng.gaussian() * inv).collect();
        Reservoir { hidden, scaling, w_in, w_res }
    }
}

/// `h' = tanh(s·W_res h + s·W_in x)` with `s` the reservoir scaling.
pub fn esn_step(h: &[f64], x: f64, res: &Reservoir) -> Vec<f64> {
    let n = res.hidden;
    (0..n)
        .map(|i| {
            let rec: f64 = res.w_res[i * n..(i + 1) * n].iter().zip(h).map(|(w, v)| w * v).sum();
            (res.scaling * rec + res.scaling * res.w_in[i] * x).tanh()
        })
        .collect()
}
