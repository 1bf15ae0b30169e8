//! A backbone plus one output head over a single flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::ad::{CVar, Tape, Var};
use crate::backbones::{Backbone, HiddenState, ModelConfig, ParamLayout, TapeState};
use crate::error::{Error, Result};
use crate::heads::{
    build_v, direct_from_outputs, direct_step_tape, frobenius_loss_tape, kraus_from_q, kraus_step_tape,
    kraus_update, linear, linear_tape, thin_qr, HeadKind, JITTER_STD,
};
use crate::qcore::{kraus_completeness_error, CMat2, DensityMatrix, RawPrediction};
use crate::rng::SplitMix64;

/// Architecture description stored alongside parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub backbone: ModelConfig,
    pub head: HeadKind,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub arch: Architecture,
    pub backbone: Backbone,
    /// Backbone blocks followed by `head.w` (`outputs × hidden`) and `head.b`.
    pub layout: ParamLayout,
}

/// Predictions of a full rollout. `preds[t]` is compared with the state
/// reached after record increment `t`.
#[derive(Clone, Debug, Default)]
pub struct Rollout {
    pub preds: Vec<RawPrediction>,
    /// Per-step completeness error of the emitted Kraus pair (Kraus head only).
    pub kraus_completeness: Vec<f64>,
    /// Steps where the direct head fell back to the maximally mixed state.
    pub fallbacks: usize,
}

/// Recurrent state carried across truncated windows.
#[derive(Clone, Debug)]
pub struct Carry {
    pub hidden: HiddenState,
    pub rho: DensityMatrix,
}

/// Result of building one window on a tape.
#[derive(Clone, Debug)]
pub struct WindowOutput {
    /// Sum of per-step squared Frobenius errors.
    pub loss: Var,
    pub carry: Carry,
    pub preds: Vec<CMat2>,
}

impl Model {
    pub fn new(backbone: ModelConfig, head: HeadKind) -> Result<Self> {
        let bb = Backbone::new(backbone.clone())?;
        let mut layout = bb.layout.clone();
        layout.push("head.w", head.outputs(), backbone.hidden_dim);
        layout.push("head.b", head.outputs(), 1);
        Ok(Model { arch: Architecture { backbone, head }, backbone: bb, layout })
    }

    pub fn from_arch(arch: &Architecture) -> Result<Self> {
        Model::new(arch.backbone.clone(), arch.head)
    }

    pub fn head(&self) -> HeadKind {
        self.arch.head
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }

    /// Backbone weights from stream 0 and head weights from stream 1 of
    /// `seed`, both uniform on `±1/√H`. Models that differ only in the head
    /// therefore share their backbone initialization.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut p = self.backbone.init_params(&mut SplitMix64::child(seed, 0));
        let mut rng = SplitMix64::child(seed, 1);
        let a = 1.0 / (self.arch.backbone.hidden_dim as f64).sqrt();
        p.extend((p.len()..self.param_count()).map(|_| rng.uniform(-a, a)));
        p
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!("{} parameters for a model of {}", params.len(), self.param_count())));
        }
        Ok(())
    }

    fn head_blocks<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let n = self.layout.blocks.len();
        (self.layout.blocks[n - 2].slice(params), self.layout.blocks[n - 1].slice(params))
    }

    pub fn initial_carry(&self, rho0: DensityMatrix) -> Carry {
        Carry { hidden: self.backbone.zero_state(), rho: rho0 }
    }

    /// Deterministic evaluation rollout over a standardized record.
    pub fn rollout(&self, params: &[f64], x: &[f64], rho0: DensityMatrix) -> Result<Rollout> {
        self.check_params(params)?;
        let hs = self.backbone.encode_sequence(params, x)?;
        let (w, b) = self.head_blocks(params);
        let mut out = Rollout { preds: Vec::with_capacity(x.len()), ..Default::default() };
        let mut rho = rho0;
        for h in &hs {
            let o = linear(w, b, h);
            match self.head() {
                HeadKind::Kraus => {
                    let k = kraus_from_q(&thin_qr(&build_v(&o)?)?);
                    out.kraus_completeness.push(kraus_completeness_error(&k));
                    rho = kraus_update(&rho, &k);
                    out.preds.push(rho.into());
                }
                HeadKind::Direct => {
                    let p = direct_from_outputs(&o)?;
                    out.fallbacks += p.fallback as usize;
                    out.preds.push(p);
                }
            }
        }
        Ok(out)
    }

    /// Builds the loss of one window on `tape`, starting from `carry`.
    /// The carry enters as a constant, which truncates backpropagation at
    /// the window boundary. `jitter` perturbs the Kraus outputs.
    pub fn window(
        &self,
        tape: &mut Tape,
        params: &[f64],
        x: &[f64],
        targets: &[CMat2],
        carry: &Carry,
        mut jitter: Option<&mut SplitMix64>,
    ) -> Result<WindowOutput> {
        self.check_params(params)?;
        if x.len() != targets.len() || x.is_empty() {
            return Err(Error::Shape(format!("window of {} inputs and {} targets", x.len(), targets.len())));
        }
        let tb = self.backbone.register(tape, params)?;
        let n = self.layout.blocks.len();
        let reg = |tape: &mut Tape, i: usize| {
            let blk = &self.layout.blocks[i];
            tape.param(blk.offset, blk.rows, blk.cols, blk.slice(params))
        };
        let w = reg(tape, n - 2)?;
        let b = reg(tape, n - 1)?;

        let mut state = TapeState::from_values(tape, &carry.hidden);
        let mut rho = CVar::constant(tape, carry.rho.mat());
        let mut loss: Option<Var> = None;
        let mut preds = Vec::with_capacity(x.len());
        for (&xt, target) in x.iter().zip(targets) {
            let xv = tape.constant_scalar(xt);
            state = tb.step(tape, &state, xv)?;
            let mut o = linear_tape(tape, w, b, state.top())?;
            let pred = match self.head() {
                HeadKind::Kraus => {
                    if let Some(rng) = jitter.as_deref_mut() {
                        let noise: Vec<f64> = (0..o.len()).map(|_| JITTER_STD * rng.gaussian()).collect();
                        let nv = tape.constant_vec(&noise);
                        o = tape.add(o, nv)?;
                    }
                    rho = kraus_step_tape(tape, o, rho)?;
                    rho
                }
                HeadKind::Direct => direct_step_tape(tape, o)?.0,
            };
            let l = frobenius_loss_tape(tape, pred, target)?;
            loss = Some(match loss {
                Some(acc) => tape.add(acc, l)?,
                None => l,
            });
            preds.push(pred.value(tape));
        }
        let next_rho = match self.head() {
            HeadKind::Kraus => DensityMatrix::new(rho.value(tape))?,
            HeadKind::Direct => carry.rho,
        };
        Ok(WindowOutput {
            loss: loss.expect("non-empty window"),
            carry: Carry { hidden: state.to_values(tape), rho: next_rho },
            preds,
        })
    }
}
