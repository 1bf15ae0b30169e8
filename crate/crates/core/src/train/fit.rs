use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointHeader};
use super::data::Sequence;
use super::loss::frobenius_sq;
use super::optim::AdamW;
use super::sched::Plateau;
use crate::ad::Tape;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::qcore::{bures_from_fidelity, raw_fidelities, DensityMatrix};
use crate::rng::{mix64, SplitMix64};
use crate::sim::StandardizationStats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Truncation window in steps; 0 backpropagates through the full record.
    pub tbptt: usize,
    pub weight_decay: f64,
    pub patience: usize,
    pub plateau_factor: f64,
    pub plateau_threshold: f64,
    /// Share of training trajectories held out for model selection.
    pub selection_fraction: f64,
    /// Global gradient-norm clip; off unless set.
    pub grad_clip: Option<f64>,
    /// Gaussian jitter on the Kraus outputs during training.
    pub jitter: bool,
    /// Share of training rollout steps checked for state validity.
    pub validity_fraction: f64,
    /// Parallel batch members. Results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            epochs: 100,
            batch_size: 16,
            lr: 5e-4,
            seed: 0,
            tbptt: 0,
            weight_decay: 0.01,
            patience: 3,
            plateau_factor: 0.5,
            plateau_threshold: 1e-4,
            selection_fraction: 0.1,
            grad_clip: None,
            jitter: true,
            validity_fraction: 0.01,
            workers: 1,
        }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.selection_fraction) {
            return bad("selection fraction must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.validity_fraction) {
            return bad("validity fraction must lie in [0, 1]".into());
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("gradient clip must be positive".into());
        }
        Ok(())
    }
}

/// One line of the per-epoch log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    pub selection_bures: f64,
    pub selection_fidelity: f64,
    /// Rate used during the epoch.
    pub lr: f64,
    pub validity_checked: usize,
    pub validity_failures: usize,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Checkpoint at the epoch of minimum selection Bures distance.
    pub best: Checkpoint,
    /// Parameters after the last completed update.
    pub last: Checkpoint,
    pub log: Vec<EpochRecord>,
    /// Training loss of the initial parameters, without jitter.
    pub initial_loss: f64,
    /// Training loss of the final parameters, without jitter.
    pub final_loss: f64,
    pub train_indices: Vec<usize>,
    pub selection_indices: Vec<usize>,
    /// Set when training stopped on a non-finite loss or gradient.
    pub diverged: Option<String>,
}

/// Fixed split of `0..n` into (training, selection) index lists, both sorted.
pub fn selection_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut k = (fraction * n as f64).round() as usize;
    if fraction > 0.0 && n >= 2 {
        k = k.clamp(1, n - 1);
    } else {
        k = 0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::child(seed, 2).shuffle(&mut idx);
    let mut sel = idx[..k].to_vec();
    let mut train = idx[k..].to_vec();
    sel.sort_unstable();
    train.sort_unstable();
    (train, sel)
}

struct MemberResult {
    loss: f64,
    grad: Vec<f64>,
    checked: usize,
    invalid: usize,
}

fn member_gradient(
    model: &Model,
    params: &[f64],
    seq: &Sequence,
    run: &TrainRunConfig,
    jitter_seed: Option<u64>,
    validity_seed: u64,
) -> Result<MemberResult> {
    let t_total = seq.len();
    if t_total == 0 {
        return Err(Error::Shape("empty training sequence".into()));
    }
    let window = if run.tbptt == 0 { t_total } else { run.tbptt };
    let mut tape = Tape::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut carry = model.initial_carry(DensityMatrix::ground());
    let mut jitter = jitter_seed.map(SplitMix64::new);
    let mut check_rng = SplitMix64::new(validity_seed);
    let (mut loss, mut checked, mut invalid) = (0.0, 0, 0);
    let mut start = 0;
    while start < t_total {
        let end = (start + window).min(t_total);
        tape.clear();
        let out =
            model.window(&mut tape, params, &seq.x[start..end], &seq.targets[start..end], &carry, jitter.as_mut())?;
        loss += tape.scalar(out.loss);
        let mean = tape.scale(out.loss, 1.0 / t_total as f64);
        tape.backward_into(mean, &mut grad)?;
        for p in &out.preds {
            if check_rng.next_f64() < run.validity_fraction {
                checked += 1;
                invalid += DensityMatrix::new(*p).is_err() as usize;
            }
        }
        carry = out.carry;
        start = end;
    }
    Ok(MemberResult { loss: loss / t_total as f64, grad, checked, invalid })
}

/// Mean loss and gradient over a batch. Members are processed in parallel
/// on the current rayon pool and reduced in index order.
pub fn batch_gradient(
    model: &Model,
    params: &[f64],
    seqs: &[Sequence],
    batch: &[usize],
    run: &TrainRunConfig,
    epoch: usize,
) -> Result<(f64, Vec<f64>, usize, usize)> {
    let jitter_base = mix64(mix64(run.seed, 5), epoch as u64);
    let check_base = mix64(mix64(run.seed, 4), epoch as u64);
    let results: Vec<Result<MemberResult>> = batch
        .par_iter()
        .map(|&i| {
            let js = (run.jitter).then(|| mix64(jitter_base, i as u64));
            member_gradient(model, params, &seqs[i], run, js, mix64(check_base, i as u64))
        })
        .collect();
    let mut grad = vec![0.0; params.len()];
    let (mut loss, mut checked, mut invalid) = (0.0, 0, 0);
    for r in results {
        let r = r?;
        loss += r.loss;
        checked += r.checked;
        invalid += r.invalid;
        for (g, x) in grad.iter_mut().zip(&r.grad) {
            *g += x;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, grad, checked, invalid))
}

/// Mean jitter-free loss and mean proxy Bures distance of full rollouts.
fn rollout_metrics(model: &Model, params: &[f64], seqs: &[Sequence], idx: &[usize]) -> Result<(f64, f64, f64)> {
    let rows: Vec<Result<(f64, f64, f64)>> = idx
        .par_iter()
        .map(|&i| {
            let s = &seqs[i];
            let r = model.rollout(params, &s.x, DensityMatrix::ground())?;
            let (mut l, mut b, mut f) = (0.0, 0.0, 0.0);
            for (p, t) in r.preds.iter().zip(&s.targets) {
                l += frobenius_sq(&p.mat, t);
                let (fp, _) = raw_fidelities(p, &DensityMatrix::new(*t)?);
                f += fp;
                b += bures_from_fidelity(fp);
            }
            let n = s.len() as f64;
            Ok((l / n, b / n, f / n))
        })
        .collect();
    let (mut l, mut b, mut f) = (0.0, 0.0, 0.0);
    for r in rows {
        let (a, c, d) = r?;
        l += a;
        b += c;
        f += d;
    }
    let n = idx.len().max(1) as f64;
    Ok((l / n, b / n, f / n))
}

fn global_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trains `model` on `seqs`, holding out a selection slice, and returns the
/// checkpoint of minimum selection Bures distance.
pub fn fit(
    model: &Model,
    run: &TrainRunConfig,
    seqs: &[Sequence],
    stats: Option<&StandardizationStats>,
    train_sha256: Option<&str>,
) -> Result<FitOutcome> {
    run.validate()?;
    if seqs.is_empty() {
        return Err(Error::Config("no training sequences".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| fit_inner(model, run, seqs, stats, train_sha256))
}

fn fit_inner(
    model: &Model,
    run: &TrainRunConfig,
    seqs: &[Sequence],
    stats: Option<&StandardizationStats>,
    train_sha256: Option<&str>,
) -> Result<FitOutcome> {
    let (train_idx, sel_idx) = selection_split(seqs.len(), run.selection_fraction, run.seed);
    // Without a held-out slice, selection falls back to the training set.
    let monitor = if sel_idx.is_empty() { train_idx.clone() } else { sel_idx.clone() };

    let mut params = model.init_params(run.seed);
    let mut opt = AdamW::new(params.len(), run.lr, run.weight_decay);
    let mut sched = Plateau::new(run.plateau_factor, run.patience, run.plateau_threshold);
    let (initial_loss, _, _) = rollout_metrics(model, &params, seqs, &train_idx)?;

    let header = |epoch: usize, bures: Option<f64>| CheckpointHeader {
        arch: model.arch.clone(),
        run: run.clone(),
        seed: run.seed,
        epoch,
        selection_bures: bures,
        param_count: model.param_count(),
        stats: stats.cloned(),
        train_sha256: train_sha256.map(str::to_string),
    };
    let mut best: Option<Checkpoint> = None;
    let mut log = Vec::with_capacity(run.epochs);
    let mut diverged = None;
    let mut last_epoch = 0;

    'epochs: for epoch in 1..=run.epochs {
        let mut order = train_idx.clone();
        SplitMix64::child(mix64(run.seed, 3), epoch as u64).shuffle(&mut order);
        let lr = opt.lr;
        let (mut sum, mut checked, mut invalid) = (0.0, 0, 0);
        for batch in order.chunks(run.batch_size) {
            let step = batch_gradient(model, &params, seqs, batch, run, epoch).and_then(|(l, mut g, c, i)| {
                if !l.is_finite() {
                    return Err(Error::Divergence { step: opt.t as usize, what: "non-finite loss".into() });
                }
                if let Some(clip) = run.grad_clip {
                    let n = global_norm(&g);
                    if n > clip {
                        g.iter_mut().for_each(|x| *x *= clip / n);
                    }
                }
                let before = params.clone();
                opt.step(&mut params, &g)?;
                if params.iter().any(|p| !p.is_finite()) {
                    params = before;
                    return Err(Error::Divergence { step: opt.t as usize, what: "non-finite parameters".into() });
                }
                Ok((l, c, i))
            });
            match step {
                Ok((l, c, i)) => {
                    sum += l * batch.len() as f64;
                    checked += c;
                    invalid += i;
                }
                Err(Error::Divergence { step, what }) => {
                    diverged = Some(format!("epoch {epoch}, update {step}: {what}"));
                    break 'epochs;
                }
                Err(Error::Singular(what)) => {
                    diverged = Some(format!("epoch {epoch}: {what}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let train_loss = sum / train_idx.len() as f64;
        let (_, sel_bures, sel_fid) = match rollout_metrics(model, &params, seqs, &monitor) {
            Ok(m) => m,
            Err(Error::Divergence { what, .. }) | Err(Error::Singular(what)) => {
                diverged = Some(format!("epoch {epoch}: selection rollout: {what}"));
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        opt.lr = sched.step(train_loss, lr);
        log.push(EpochRecord {
            epoch,
            train_loss,
            selection_bures: sel_bures,
            selection_fidelity: sel_fid,
            lr,
            validity_checked: checked,
            validity_failures: invalid,
        });
        last_epoch = epoch;
        if best.as_ref().map_or(true, |b| sel_bures < b.header.selection_bures.unwrap_or(f64::INFINITY)) {
            best = Some(Checkpoint {
                header: header(epoch, Some(sel_bures)),
                params: params.clone(),
                optimizer: Some(opt.clone()),
            });
        }
    }

    let last = Checkpoint {
        header: header(last_epoch, log.last().map(|r| r.selection_bures)),
        params: params.clone(),
        optimizer: Some(opt.clone()),
    };
    let final_loss = if diverged.is_none() { rollout_metrics(model, &params, seqs, &train_idx)?.0 } else { f64::NAN };
    Ok(FitOutcome {
        best: best.unwrap_or_else(|| last.clone()),
        last,
        log,
        initial_loss,
        final_loss,
        train_indices: train_idx,
        selection_indices: sel_idx,
        diverged,
    })
}

/// One JSON object per line.
pub fn epoch_log_lines(log: &[EpochRecord]) -> Result<String> {
    let mut s = String::new();
    for r in log {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_epoch_log(path: impl AsRef<Path>, log: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(epoch_log_lines(log)?.as_bytes()).map_err(|e| Error::io(path, e))
}
