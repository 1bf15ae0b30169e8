use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use qtw_core::backbones::BackboneKind;
use qtw_core::baseline::{adaptive_filter, exact_filter, FilterEvent};
use qtw_core::digest::sha256_file;
use qtw_core::eval::{evaluate_model, evaluate_states, merge_reports, read_report, write_csv, write_report, EvalReport};
use qtw_core::heads::HeadKind;
use qtw_core::invariants::{ensemble_oracle, exact_filter_fidelities, model_grad_check, rabi_errors, stiefel_suite};
use qtw_core::model::Model;
use qtw_core::sim::{
    generate_dataset, read_trajectories, write_json, DatasetManifest, DatasetSpec, LoadedDataset, TrajectorySet,
    MANIFEST_FILE,
};
use qtw_core::train::{fit, layerwise_grad_norms, read_checkpoint, write_checkpoint, write_epoch_log, Sequence};
use qtw_core::Error;

use crate::config::{resolve, set, Config, Overrides};
use crate::exit::{ConfigError, Diverged};
use crate::manifest::RunManifest;
use crate::{BaselineArgs, BaselineMode, CheckArgs, Common, EvalArgs, GenArgs, ReportArgs, ReportFormat, TrainArgs};

fn load_config(common: &Common, mut flags: Overrides) -> anyhow::Result<Config> {
    if let Some(s) = common.seed {
        let s = i64::try_from(s).map_err(|_| ConfigError(format!("seed {s} does not fit a signed 64-bit integer")))?;
        set(&mut flags, "seed", s);
    }
    if let Some(w) = common.workers {
        set(&mut flags, "workers", w as i64);
    }
    resolve(common.config.as_deref(), std::env::vars(), &flags)
}

fn pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    Ok(())
}

/// Test set plus the file it came from. A dataset directory is verified
/// against its manifest; a bare file is verified when a manifest sits next
/// to it and lists it.
fn load_test(data: &Path) -> anyhow::Result<(TrajectorySet, PathBuf, String)> {
    if data.is_dir() {
        let ds = LoadedDataset::load(data)?;
        let path = data.join(&ds.manifest.test.name);
        return Ok((ds.test, path, ds.manifest.test.sha256));
    }
    let sha = sha256_file(data)?;
    if let Some(dir) = data.parent() {
        let mpath = dir.join(MANIFEST_FILE);
        if mpath.is_file() {
            let m = DatasetManifest::load(&mpath)?;
            let name = data.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let listed = [&m.train, &m.test].into_iter().find(|e| e.name == name).map(|e| e.sha256.clone());
            if let Some(expected) = listed {
                if expected != sha {
                    return Err(Error::Digest(format!("{} does not match {}", data.display(), mpath.display())).into());
                }
            }
        }
    }
    Ok((read_trajectories(data)?, data.to_path_buf(), sha))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub fn gen(a: GenArgs) -> anyhow::Result<()> {
    let mut f = Overrides::new();
    if let Some(v) = a.n_train {
        set(&mut f, "gen.n_train", v as i64);
    }
    if let Some(v) = a.n_test {
        set(&mut f, "gen.n_test", v as i64);
    }
    if let Some(v) = a.steps {
        set(&mut f, "gen.steps", v as i64);
    }
    if let Some(v) = a.dt {
        set(&mut f, "gen.dt", v);
    }
    if let Some(v) = a.eta {
        set(&mut f, "gen.eta", v);
    }
    if a.resample_gamma {
        set(&mut f, "gen.resample_gamma_at_switch", true);
    }
    let cfg = load_config(&a.common, f)?;
    let mut run = RunManifest::start("gen", &cfg.gen)?;
    run.seed("train", cfg.gen.base_seed_train);
    run.seed("test", cfg.gen.base_seed_test);
    let manifest = generate_dataset(&cfg.gen, &a.out, cfg.workers)?;
    let projections = manifest.train.psd_projections + manifest.test.psd_projections;
    if projections > 0 {
        eprintln!("note: {projections} steps needed a positivity projection");
    }
    for name in [&manifest.train.name, &manifest.test.name] {
        run.output(&a.out.join(name))?;
    }
    run.output(&a.out.join(qtw_core::sim::STATS_FILE))?;
    run.output(&a.out.join(MANIFEST_FILE))?;
    run.finish(&a.out.join("gen.run.json"))
}

pub fn train(a: TrainArgs) -> anyhow::Result<()> {
    let mut f = Overrides::new();
    if let Some(v) = &a.model {
        v.parse::<BackboneKind>()?;
        set(&mut f, "train.model", v.as_str());
    }
    if let Some(v) = &a.head {
        v.parse::<HeadKind>()?;
        set(&mut f, "train.head", v.as_str());
    }
    for (key, v) in [
        ("train.hidden", a.hidden),
        ("train.layers", a.layers),
        ("train.epochs", a.epochs),
        ("train.batch_size", a.batch),
        ("train.tbptt", a.tbptt),
    ] {
        if let Some(v) = v {
            set(&mut f, key, v as i64);
        }
    }
    for (key, v) in [("train.lr", a.lr), ("train.weight_decay", a.weight_decay), ("train.grad_clip", a.grad_clip)] {
        if let Some(v) = v {
            set(&mut f, key, v);
        }
    }
    if a.no_jitter {
        set(&mut f, "train.jitter", false);
    }
    let cfg = load_config(&a.common, f)?;
    let ds = LoadedDataset::load(&a.data)?;
    let mut run = RunManifest::start("train", &cfg.train)?;
    run.input(&a.data.join(&ds.manifest.train.name))?;
    run.seed("train", cfg.train.run.seed);

    let stats = &ds.manifest.stats;
    let seqs: Vec<Sequence> = ds.train.trajectories.iter().map(|t| Sequence::from_trajectory(t, stats)).collect();
    let model = Model::from_arch(&cfg.train.architecture())?;
    eprintln!(
        "training {}-{} ({} parameters) on {} trajectories",
        model.arch.backbone.kind.as_str(),
        model.head().as_str(),
        model.param_count(),
        seqs.len()
    );
    let out = fit(&model, &cfg.train.run, &seqs, Some(stats), Some(&ds.manifest.train.sha256))?;

    create_dir(&a.out)?;
    let log = a.out.join("epochs.jsonl");
    write_epoch_log(&log, &out.log)?;
    run.output(&log)?;
    let last = a.out.join("last.qckp");
    write_checkpoint(&last, &out.last)?;
    run.output(&last)?;
    if let Some(reason) = out.diverged {
        run.finish(&a.out.join("run.json"))?;
        return Err(Diverged(reason).into());
    }
    let best = a.out.join("model.qckp");
    write_checkpoint(&best, &out.best)?;
    run.output(&best)?;
    eprintln!(
        "loss {:.5} -> {:.5}; selected epoch {} (Bures {:.5})",
        out.initial_loss,
        out.final_loss,
        out.best.header.epoch,
        out.best.header.selection_bures.unwrap_or(f64::NAN)
    );
    run.finish(&a.out.join("run.json"))
}

fn write_outputs(report: &EvalReport, out: &Path, csv: Option<&Path>, run: &mut RunManifest) -> anyhow::Result<()> {
    let a = &report.aggregate;
    eprintln!(
        "{}-{}: proxy {:.4} ± {:.4}, full {:.4}, phases {:.4}/{:.4}, physical {}",
        report.model, report.head, a.fid_proxy, a.fid_proxy_se, a.fid_full, a.fid_p1, a.fid_p2, a.physical
    );
    write_report(out, report)?;
    run.output(out)?;
    if let Some(c) = csv {
        write_csv(c, std::slice::from_ref(report))?;
        run.output(c)?;
    }
    Ok(())
}

const GRAD_NORM_BATCH: usize = 16;

pub fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let cfg = load_config(&a.common, Overrides::new())?;
    let ck = read_checkpoint(&a.ckpt)?;
    let model = ck.model()?;
    let stats = ck.header.stats.clone().ok_or_else(|| ConfigError("checkpoint carries no standardization".into()))?;
    let (test, path, sha) = load_test(&a.data)?;
    if ck.header.train_sha256.as_deref() == Some(sha.as_str()) {
        return Err(Error::Digest(format!("{} is the file the checkpoint was trained on", path.display())).into());
    }
    let mut run = RunManifest::start("eval", &ck.header)?;
    run.input(&a.ckpt)?;
    run.input(&path)?;
    run.seed("train", ck.header.seed);
    let workers = pool(cfg.workers)?;
    let report = workers.install(|| evaluate_model(&model, &ck.params, &stats, &test, &sha))?;
    write_outputs(&report, &a.out, a.csv.as_deref(), &mut run)?;
    if let Some(g) = &a.grad_norms {
        let seqs: Vec<Sequence> = test.trajectories.iter().map(|t| Sequence::from_trajectory(t, &stats)).collect();
        let batch: Vec<usize> = (0..seqs.len().min(GRAD_NORM_BATCH)).collect();
        let norms = workers.install(|| layerwise_grad_norms(&model, &ck.params, &seqs, &batch))?;
        write_json(g, &norms)?;
        run.output(g)?;
    }
    run.finish(&sidecar(&a.out))
}

#[derive(Serialize)]
struct TaggedEvent<'a> {
    traj: usize,
    #[serde(flatten)]
    event: &'a FilterEvent,
}

pub fn baseline(a: BaselineArgs) -> anyhow::Result<()> {
    let cfg = load_config(&a.common, Overrides::new())?;
    if a.events.is_some() && a.mode == BaselineMode::Known {
        return Err(ConfigError("--events needs --mode adaptive".into()).into());
    }
    let (test, path, sha) = load_test(&a.data)?;
    let mut run = RunManifest::start("baseline", &cfg.baseline)?;
    run.input(&path)?;
    let trajs = &test.trajectories;
    let mut events = String::new();
    let (name, states, notes) = pool(cfg.workers)?.install(|| -> anyhow::Result<_> {
        Ok(match a.mode {
            BaselineMode::Known => {
                let s = trajs.par_iter().map(exact_filter).collect::<qtw_core::Result<Vec<_>>>()?;
                ("sme-known", s, vec!["true parameters read from the trajectory file".to_string()])
            }
            BaselineMode::Adaptive => {
                let runs = trajs
                    .par_iter()
                    .map(|t| adaptive_filter(&t.record, t.params.dt, t.params.eta, &cfg.baseline, None))
                    .collect::<qtw_core::Result<Vec<_>>>()?;
                let detections: usize = runs.iter().map(|r| r.detections.len()).sum();
                let notes = vec![cfg.baseline.policy(), format!("switch detections: {detections}")];
                if a.events.is_some() {
                    for (i, r) in runs.iter().enumerate() {
                        for e in &r.events {
                            events.push_str(&serde_json::to_string(&TaggedEvent { traj: i, event: e })?);
                            events.push('\n');
                        }
                    }
                }
                ("sme-adaptive", runs.into_iter().map(|r| r.states).collect(), notes)
            }
        })
    })?;
    let mut report = evaluate_states(name, "filter", &states, &test, &sha)?;
    report.notes = notes;
    write_outputs(&report, &a.out, a.csv.as_deref(), &mut run)?;
    if let Some(e) = &a.events {
        std::fs::write(e, events).map_err(|err| Error::Io { path: e.clone(), source: err })?;
        run.output(e)?;
    }
    run.finish(&sidecar(&a.out))
}

pub fn report(a: ReportArgs) -> anyhow::Result<()> {
    let cfg = load_config(&a.common, Overrides::new())?;
    let mut run = RunManifest::start("report", &cfg.seed)?;
    let mut reports = Vec::new();
    for p in &a.inputs {
        reports.push(read_report(p).with_context(|| format!("reading {}", p.display()))?);
        run.input(p)?;
    }
    let table = merge_reports(&reports)?;
    for d in &table.deltas {
        eprintln!("{}: kraus {:.4} vs direct {:.4}, Δ = {:+.4}", d.model, d.kraus_fid_proxy, d.baseline_fid_proxy, d.delta_fid_proxy);
    }
    match a.format {
        ReportFormat::Json => write_json(&a.out, &table)?,
        ReportFormat::Csv => {
            std::fs::write(&a.out, table.to_csv()).map_err(|e| Error::Io { path: a.out.clone(), source: e })?
        }
    }
    run.output(&a.out)?;
    run.finish(&sidecar(&a.out))
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    passed: bool,
    detail: String,
}

pub fn check(a: CheckArgs) -> anyhow::Result<()> {
    let cfg = load_config(&a.common, Overrides::new())?;
    let seed = cfg.seed.unwrap_or(0);
    let mut lines = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        eprintln!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        lines.push(CheckLine { name: name.to_string(), passed, detail });
    };

    let s = stiefel_suite(10_000, 32, seed)?;
    let ok = s.max_stiefel <= 1e-12
        && s.max_completeness <= 1e-12
        && s.max_trace_error <= 1e-12
        && s.min_lambda >= -1e-12
        && s.max_hermiticity <= 1e-13;
    push("stiefel", ok, format!("{s:?}"));

    for kind in BackboneKind::ALL {
        for head in [HeadKind::Kraus, HeadKind::Direct] {
            let r = model_grad_check(kind, head, 8, 20, seed)?;
            push(
                &format!("gradient {}-{}", kind.as_str(), head.as_str()),
                r.passes(1e-5, 1e-8),
                format!("rel {:.2e}, abs {:.2e}", r.max_rel_error, r.max_abs_error),
            );
        }
    }

    let e = rabi_errors(2.0, 1.0, &[0.004, 0.002, 0.001])?;
    let ratios = [e[0] / e[1], e[1] / e[2]];
    push("euler order", ratios.iter().all(|r| (r - 2.0).abs() <= 0.3), format!("error ratios {ratios:?}"));

    let pts = pool(cfg.workers)?.install(|| ensemble_oracle(2000, 0.5, 2.0, 0.005, 400, 10, seed))?;
    let worst = pts.iter().map(|p| (p.mean - p.lindblad).abs() / p.std_error).fold(0.0, f64::max);
    push("ensemble mean", worst <= 3.0, format!("worst deviation {worst:.2} standard errors"));

    let spec = DatasetSpec::default().with_steps(500);
    let fids = pool(cfg.workers)?.install(|| exact_filter_fidelities(&spec, 50, spec.base_seed_test))?;
    let mean = fids.iter().sum::<f64>() / fids.len() as f64;
    push("exact filter", mean >= 0.999, format!("mean full fidelity {mean:.6}"));

    let failed = lines.iter().filter(|l| !l.passed).count();
    if let Some(out) = &a.out {
        write_json(out, &lines)?;
        println!("{}", out.display());
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", lines.len());
    }
    Ok(())
}

