use super::*;
use crate::backbones::{BackboneKind, ModelConfig};
use crate::heads::HeadKind;
use crate::model::Model;
use crate::qcore::{CMat2, DensityMatrix};
use crate::sim::{simulate_trajectory, DatasetSpec, StandardizationStats};

fn sequences(n: usize, steps: usize) -> (Vec<Sequence>, StandardizationStats) {
    let spec = DatasetSpec::default().with_steps(steps);
    let trajs: Vec<_> = (0..n).map(|i| simulate_trajectory(&spec.sample_params(77, i)).unwrap()).collect();
    let stats = StandardizationStats::from_trajectories(&trajs).unwrap();
    (trajs.iter().map(|t| Sequence::from_trajectory(t, &stats)).collect(), stats)
}

fn model(kind: BackboneKind, head: HeadKind, hidden: usize) -> Model {
    Model::new(ModelConfig::new(kind, hidden), head).unwrap()
}

#[test]
fn frobenius_examples() {
    let a = vec![vec![CMat2::identity().scale(0.5)]];
    let b = vec![vec![*DensityMatrix::ground().mat()]];
    assert!((frobenius_loss(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(frobenius_loss(&b, &b).unwrap(), 0.0);
    assert!(frobenius_loss(&a, &[]).is_err());
}

#[test]
fn frobenius_matches_scalar_loop() {
    let mut rng = crate::rng::SplitMix64::new(3);
    let mut mk = || -> Vec<CMat2> {
        (0..7).map(|_| CMat2::from_reals(&(0..8).map(|_| rng.gaussian()).collect::<Vec<_>>())).collect()
    };
    let p = vec![mk(), mk()];
    let t = vec![mk(), mk()];
    let mut oracle = 0.0;
    for b in 0..2 {
        let mut s = 0.0;
        for k in 0..7 {
            let (x, y) = (p[b][k].to_reals(), t[b][k].to_reals());
            for i in 0..8 {
                s += (x[i] - y[i]) * (x[i] - y[i]);
            }
        }
        oracle += s / 7.0;
    }
    oracle /= 2.0;
    assert!((frobenius_loss(&p, &t).unwrap() - oracle).abs() < 1e-13);
}

#[test]
fn adamw_pure_decay() {
    let mut o = AdamW::new(3, 1e-3, 0.01);
    let mut p = vec![1.0, -2.0, 0.5];
    o.step(&mut p, &[0.0; 3]).unwrap();
    for (a, b) in p.iter().zip([1.0, -2.0, 0.5]) {
        assert!((a - b * (1.0 - 1e-5)).abs() < 1e-16);
    }
}

#[test]
fn adamw_first_step_is_sign_like() {
    let mut o = AdamW::new(2, 1e-3, 0.0);
    let mut p = vec![0.0, 0.0];
    o.step(&mut p, &[3.0, -0.2]).unwrap();
    assert!((p[0] + 1e-3 * 3.0 / (3.0 + 1e-8)).abs() < 1e-18);
    assert!((p[1] - 1e-3 * 0.2 / (0.2 + 1e-8)).abs() < 1e-18);
}

/// Second implementation written per parameter with `powf`.
fn reference_adamw(p0: &[f64], grad: impl Fn(&[f64]) -> Vec<f64>, steps: usize) -> Vec<f64> {
    let (lr, b1, b2, eps, wd) = (1e-2f64, 0.9f64, 0.999f64, 1e-8f64, 0.01f64);
    let mut p = p0.to_vec();
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    for t in 1..=steps {
        let g = grad(&p);
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i].powi(2);
            let mh = m[i] / (1.0 - b1.powf(t as f64));
            let vh = v[i] / (1.0 - b2.powf(t as f64));
            p[i] = p[i] - lr * mh / (vh.sqrt() + eps) - lr * wd * p[i];
        }
    }
    p
}

#[test]
fn adamw_matches_reference_on_quadratic() {
    let scales = [1.0, 4.0, 0.3, 10.0];
    let grad = |p: &[f64]| p.iter().zip(&scales).map(|(x, s)| s * (x - 1.0)).collect::<Vec<_>>();
    let p0 = vec![3.0, -1.0, 0.5, 2.0];
    let want = reference_adamw(&p0, grad, 100);
    let mut o = AdamW::new(4, 1e-2, 0.01);
    let mut p = p0.clone();
    for _ in 0..100 {
        let g = grad(&p);
        o.step(&mut p, &g).unwrap();
    }
    for (a, b) in p.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    let back = AdamW::from_blob(&o.to_blob(), 0.01).unwrap();
    assert_eq!(back, o);
}

#[test]
fn adamw_rejects_non_finite_gradients() {
    let mut o = AdamW::new(1, 1e-3, 0.0);
    let mut p = vec![1.0];
    assert!(matches!(o.step(&mut p, &[f64::NAN]), Err(crate::Error::Divergence { .. })));
    assert_eq!(p, vec![1.0]);
}

#[test]
fn plateau_rules() {
    let mut s = Plateau::default();
    let mut lr = 1.0;
    for l in [1.0, 0.9, 0.8, 0.7, 0.6] {
        lr = s.step(l, lr);
    }
    assert_eq!(lr, 1.0);

    let mut s = Plateau::default();
    let mut rates = Vec::new();
    let mut lr = 1.0;
    for _ in 0..7 {
        lr = s.step(1.0, lr);
        rates.push(lr);
    }
    assert_eq!(rates, vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.25]);
}

#[test]
fn selection_split_partitions() {
    let (t, s) = selection_split(20, 0.1, 4);
    assert_eq!(s.len(), 2);
    let mut all: Vec<_> = t.iter().chain(&s).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..20).collect::<Vec<_>>());
    assert_eq!(selection_split(20, 0.1, 4), (t, s));
    assert!(selection_split(5, 0.0, 1).1.is_empty());
}

#[test]
fn truncated_windows_cover_the_full_record() {
    let (seqs, _) = sequences(2, 30);
    let m = model(BackboneKind::Gru, HeadKind::Kraus, 4);
    let p = m.init_params(1);
    let full = TrainRunConfig { jitter: false, tbptt: 0, ..Default::default() };
    let same = TrainRunConfig { tbptt: 30, ..full.clone() };
    let cut = TrainRunConfig { tbptt: 7, ..full.clone() };
    let a = batch_gradient(&m, &p, &seqs, &[0, 1], &full, 1).unwrap();
    let b = batch_gradient(&m, &p, &seqs, &[0, 1], &same, 1).unwrap();
    let c = batch_gradient(&m, &p, &seqs, &[0, 1], &cut, 1).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    // Truncation changes gradients but not the forward loss.
    assert!((a.0 - c.0).abs() < 1e-12);
    assert_ne!(a.1, c.1);
}

#[test]
fn one_epoch_fit_and_checkpoint_round_trip() {
    let (seqs, stats) = sequences(6, 40);
    let m = model(BackboneKind::Lstm, HeadKind::Kraus, 4);
    let run = TrainRunConfig { epochs: 1, batch_size: 2, lr: 1e-3, validity_fraction: 1.0, ..Default::default() };
    let out = fit(&m, &run, &seqs, Some(&stats), Some("abc")).unwrap();
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.best.header.epoch, 1);
    assert!(out.diverged.is_none());
    assert_eq!(out.log[0].validity_failures, 0);
    assert_eq!(out.log[0].validity_checked, 5 * 40);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.qckp");
    write_checkpoint(&path, &out.best).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back, out.best);
    assert_eq!(back.model().unwrap().param_count(), m.param_count());

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(0);
    std::fs::write(&path, &bytes).unwrap();
    assert!(read_checkpoint(&path).is_err());
}

#[test]
fn fit_is_deterministic_across_worker_counts() {
    let (seqs, _) = sequences(5, 30);
    let m = model(BackboneKind::Gru, HeadKind::Kraus, 4);
    let run = TrainRunConfig { epochs: 3, batch_size: 2, lr: 1e-2, ..Default::default() };
    let a = fit(&m, &run, &seqs, None, None).unwrap();
    let b = fit(&m, &run, &seqs, None, None).unwrap();
    let c = fit(&m, &TrainRunConfig { workers: 3, ..run.clone() }, &seqs, None, None).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.last.params, c.last.params);
    assert_eq!(a.log, c.log);
}

#[test]
fn selection_picks_the_argmin_epoch() {
    let (seqs, _) = sequences(10, 30);
    let m = model(BackboneKind::Rnn, HeadKind::Direct, 6);
    let run = TrainRunConfig { epochs: 6, batch_size: 3, lr: 2e-2, ..Default::default() };
    let out = fit(&m, &run, &seqs, None, None).unwrap();
    let argmin = out
        .log
        .iter()
        .min_by(|a, b| a.selection_bures.partial_cmp(&b.selection_bures).unwrap())
        .unwrap();
    assert_eq!(out.best.header.epoch, argmin.epoch);
    assert_eq!(out.best.header.selection_bures, Some(argmin.selection_bures));
}

#[test]
fn esn_reservoir_reports_zero_gradient() {
    let (seqs, _) = sequences(2, 20);
    let m = model(BackboneKind::Esn, HeadKind::Kraus, 5);
    let p = m.init_params(2);
    let norms = layerwise_grad_norms(&m, &p, &seqs, &[0, 1]).unwrap();
    let frozen: Vec<_> = norms.iter().filter(|b| b.frozen).collect();
    assert_eq!(frozen.len(), 2);
    assert!(frozen.iter().all(|b| b.norm == 0.0));
    assert!(norms.iter().any(|b| b.name == "head.w" && b.norm > 0.0));
}

#[test]
fn perfect_predictions_have_zero_gradient() {
    let (mut seqs, _) = sequences(2, 20);
    let m = model(BackboneKind::Gru, HeadKind::Direct, 4);
    let p = m.init_params(9);
    for s in &mut seqs {
        let mut tape = crate::ad::Tape::new(p.len());
        let carry = m.initial_carry(DensityMatrix::ground());
        s.targets = m.window(&mut tape, &p, &s.x, &s.targets, &carry, None).unwrap().preds;
    }
    let norms = layerwise_grad_norms(&m, &p, &seqs, &[0, 1]).unwrap();
    assert!(norms.iter().all(|b| b.norm == 0.0), "{norms:?}");
}
