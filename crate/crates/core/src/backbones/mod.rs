//! Recurrent encoders mapping the standardized record to hidden states.

mod cells;
mod config;
mod esn;
mod layout;

pub use cells::{gru_step, lstm_step, rnn_step, GateView};
pub use config::{BackboneKind, ModelConfig};
pub use esn::{esn_step, Reservoir};
pub use layout::{ParamBlock, ParamLayout};

use crate::ad::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Per-layer recurrent state. `c` is only used by the LSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn top(&self) -> &[f64] {
        self.h.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Backbone weights occupy the leading blocks of the flat parameter vector.
#[derive(Clone, Debug)]
pub struct Backbone {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub reservoir: Option<Reservoir>,
}

impl Backbone {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let mut layout = ParamLayout::default();
        for l in 0..config.layers {
            let d = if l == 0 { config.input_dim } else { h };
            for gate in config.kind.gates() {
                layout.push(format!("l{l}.{gate}.w_x"), h, d);
                layout.push(format!("l{l}.{gate}.w_h"), h, h);
                layout.push(format!("l{l}.{gate}.b"), h, 1);
            }
        }
        let reservoir = (config.kind == BackboneKind::Esn)
            .then(|| Reservoir::new(h, config.esn_scaling, config.esn_seed));
        Ok(Backbone { config, layout, reservoir })
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }

    /// Uniform on `±1/√H`, drawn block by block in layout order.
    pub fn init_params(&self, rng: &mut SplitMix64) -> Vec<f64> {
        let a = 1.0 / (self.config.hidden_dim as f64).sqrt();
        (0..self.param_count()).map(|_| rng.uniform(-a, a)).collect()
    }

    pub fn zero_state(&self) -> HiddenState {
        let h = self.config.hidden_dim;
        let n = self.config.layers;
        let cells = if self.config.kind == BackboneKind::Lstm { n } else { 0 };
        HiddenState { h: vec![vec![0.0; h]; n], c: vec![vec![0.0; h]; cells] }
    }

    fn gate<'a>(&self, params: &'a [f64], l: usize, gate: usize) -> GateView<'a> {
        let base = (l * self.config.kind.gates().len() + gate) * 3;
        let b = &self.layout.blocks;
        GateView { w_x: b[base].slice(params), w_h: b[base + 1].slice(params), b: b[base + 2].slice(params) }
    }

    /// Advances every layer by one input sample.
    pub fn step(&self, params: &[f64], state: &mut HiddenState, x: f64) {
        let mut input = vec![x];
        for l in 0..self.config.layers {
            let h = &state.h[l];
            let next = match self.config.kind {
                BackboneKind::Rnn => rnn_step(h, &input, &self.gate(params, l, 0)),
                BackboneKind::Gru => {
                    let g = [self.gate(params, l, 0), self.gate(params, l, 1), self.gate(params, l, 2)];
                    gru_step(h, &input, &g)
                }
                BackboneKind::Lstm => {
                    let g = [
                        self.gate(params, l, 0),
                        self.gate(params, l, 1),
                        self.gate(params, l, 2),
                        self.gate(params, l, 3),
                    ];
                    let (hn, cn) = lstm_step(h, &state.c[l], &input, &g);
                    state.c[l] = cn;
                    hn
                }
                BackboneKind::Esn => esn_step(h, input[0], self.reservoir.as_ref().expect("esn reservoir")),
            };
            state.h[l] = next;
            input = state.h[l].clone();
        }
    }

    /// Top-layer hidden state after each sample; `out[t]` has seen `x[0..=t]`.
    pub fn encode_sequence(&self, params: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut state = self.zero_state();
        let mut out = Vec::with_capacity(x.len());
        for (t, &xt) in x.iter().enumerate() {
            self.step(params, &mut state, xt);
            if state.top().iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: t, what: "non-finite hidden state".into() });
            }
            out.push(state.top().to_vec());
        }
        Ok(out)
    }

    /// Registers the backbone blocks on a tape.
    pub fn register(&self, tape: &mut Tape, params: &[f64]) -> Result<TapeBackbone> {
        let blocks = self
            .layout
            .blocks
            .iter()
            .map(|b| tape.param(b.offset, b.rows, b.cols, b.slice(params)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TapeBackbone { kind: self.config.kind, layers: self.config.layers, blocks, reservoir: self.reservoir.clone() })
    }
}

/// Hidden state living on a tape.
#[derive(Clone, Debug)]
pub struct TapeState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

impl TapeState {
    pub fn top(&self) -> Var {
        *self.h.last().expect("at least one layer")
    }

    /// Constant state, used to seed a truncated window from detached values.
    pub fn from_values(tape: &mut Tape, state: &HiddenState) -> TapeState {
        TapeState {
            h: state.h.iter().map(|h| tape.constant_vec(h)).collect(),
            c: state.c.iter().map(|c| tape.constant_vec(c)).collect(),
        }
    }

    pub fn to_values(&self, tape: &Tape) -> HiddenState {
        HiddenState {
            h: self.h.iter().map(|v| tape.value(*v).to_vec()).collect(),
            c: self.c.iter().map(|v| tape.value(*v).to_vec()).collect(),
        }
    }
}

/// Backbone parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct TapeBackbone {
    kind: BackboneKind,
    layers: usize,
    blocks: Vec<Var>,
    reservoir: Option<Reservoir>,
}

impl TapeBackbone {
    fn pre(&self, tape: &mut Tape, l: usize, gate: usize, x: Var, h: Var) -> Result<Var> {
        let base = (l * self.kind.gates().len() + gate) * 3;
        let wx = tape.matmul(self.blocks[base], x)?;
        let wh = tape.matmul(self.blocks[base + 1], h)?;
        let s = tape.add(wx, wh)?;
        tape.add(s, self.blocks[base + 2])
    }

    pub fn step(&self, tape: &mut Tape, state: &TapeState, x: Var) -> Result<TapeState> {
        let mut next = state.clone();
        let mut input = x;
        for l in 0..self.layers {
            let h = state.h[l];
            let hn = match self.kind {
                BackboneKind::Rnn => {
                    let a = self.pre(tape, l, 0, input, h)?;
                    tape.tanh(a)
                }
                BackboneKind::Gru => {
                    let az = self.pre(tape, l, 0, input, h)?;
                    let z = tape.sigmoid(az);
                    let ar = self.pre(tape, l, 1, input, h)?;
                    let r = tape.sigmoid(ar);
                    let rh = tape.mul(r, h)?;
                    let an = self.pre(tape, l, 2, input, rh)?;
                    let n = tape.tanh(an);
                    // z ⊙ h + (1 − z) ⊙ n = n + z ⊙ (h − n)
                    let d = tape.sub(h, n)?;
                    let zd = tape.mul(z, d)?;
                    tape.add(n, zd)?
                }
                BackboneKind::Lstm => {
                    let ai = self.pre(tape, l, 0, input, h)?;
                    let i = tape.sigmoid(ai);
                    let af = self.pre(tape, l, 1, input, h)?;
                    let f = tape.sigmoid(af);
                    let ag = self.pre(tape, l, 2, input, h)?;
                    let g = tape.tanh(ag);
                    let ao = self.pre(tape, l, 3, input, h)?;
                    let o = tape.sigmoid(ao);
                    let fc = tape.mul(f, state.c[l])?;
                    let ig = tape.mul(i, g)?;
                    let c = tape.add(fc, ig)?;
                    next.c[l] = c;
                    let tc = tape.tanh(c);
                    tape.mul(o, tc)?
                }
                BackboneKind::Esn => {
                    // The reservoir is frozen; its output enters as a constant.
                    let res = self.reservoir.as_ref().expect("esn reservoir");
                    let v = esn_step(tape.value(h), tape.value(input)[0], res);
                    tape.constant_vec(&v)
                }
            };
            next.h[l] = hn;
            input = hn;
        }
        Ok(next)
    }
}
