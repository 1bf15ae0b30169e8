use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::qcore::{
    bloch_to_rho, bures_from_fidelity, mat_to_bloch, physicality_metrics, raw_fidelities, DensityMatrix,
    RawPrediction,
};
use crate::sim::{standardize, StandardizationStats, TrajectorySet};

/// A model is physical only if every step has trace error below this ...
pub const VTR_LIMIT: f64 = 1e-4;
/// ... and smallest eigenvalue at least this.
pub const LAMBDA_MIN_LIMIT: f64 = -1e-6;
/// Eigenvalues are only meaningful for Hermitian output, so anything above
/// rounding level also fails the classification.
pub const VHERM_LIMIT: f64 = 1e-10;

pub const CSV_HEADER: &str = "model,head,n_traj,fid_proxy,fid_full,bures,fid_p1,fid_p2,vtr_mean,vtr_max,\
vpsd_mean,vpsd_max,vherm_mean,kraus_comp_max,bloch_err,physical";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub index: usize,
    pub tau: usize,
    pub fid_proxy: f64,
    pub fid_full: f64,
    pub bures: f64,
    /// Mean proxy fidelity over steps `t < τ`.
    pub fid_p1: f64,
    /// Mean proxy fidelity over steps `t ≥ τ`.
    pub fid_p2: f64,
    pub vtr_mean: f64,
    pub vtr_max: f64,
    pub vpsd_mean: f64,
    pub vpsd_max: f64,
    pub vherm_mean: f64,
    pub vherm_max: f64,
    pub lambda_min: f64,
    pub kraus_comp_max: f64,
    pub bloch_err: f64,
    pub fallbacks: usize,
}

/// Means of per-trajectory values (maxima and minima for the extreme fields).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_traj: usize,
    pub fid_proxy: f64,
    pub fid_full: f64,
    pub bures: f64,
    pub fid_p1: f64,
    pub fid_p2: f64,
    pub vtr_mean: f64,
    pub vtr_max: f64,
    pub vpsd_mean: f64,
    pub vpsd_max: f64,
    pub vherm_mean: f64,
    pub vherm_max: f64,
    pub kraus_comp_max: f64,
    pub bloch_err: f64,
    pub lambda_min: f64,
    pub fallbacks: usize,
    /// Standard error of the per-trajectory proxy fidelity.
    pub fid_proxy_se: f64,
    pub physical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub head: String,
    pub test_sha256: String,
    /// Free-form provenance, e.g. the adaptive filter's knowledge policy.
    #[serde(default)]
    pub notes: Vec<String>,
    pub aggregate: Aggregate,
    pub trajectories: Vec<TrajectoryRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn row(index: usize, tau: usize, preds: &[RawPrediction], comp: &[f64], set: &TrajectorySet) -> Result<TrajectoryRow> {
    let traj = &set.trajectories[index];
    if preds.len() != traj.len() {
        return Err(Error::Shape(format!("{} predictions for trajectory {index} of {} steps", preds.len(), traj.len())));
    }
    let n = preds.len() as f64;
    let (mut fp, mut ff, mut b, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut vtr, mut vtr_max, mut vpsd, mut vpsd_max) = (0.0, 0.0f64, 0.0, 0.0f64);
    let (mut vherm, mut vherm_max) = (0.0, 0.0f64);
    let (mut lmin, mut berr, mut fallbacks) = (f64::INFINITY, 0.0, 0);
    for (t, (p, truth)) in preds.iter().zip(&traj.states).enumerate() {
        let truth_rho = bloch_to_rho(*truth)?;
        let (proxy, full) = raw_fidelities(p, &truth_rho);
        fp += proxy;
        ff += full;
        b += bures_from_fidelity(proxy);
        if t < tau {
            p1 += proxy;
        } else {
            p2 += proxy;
        }
        let ph = physicality_metrics(&p.mat);
        vtr += ph.v_tr;
        vtr_max = vtr_max.max(ph.v_tr);
        vpsd += ph.v_psd;
        vpsd_max = vpsd_max.max(ph.v_psd);
        vherm += ph.v_herm;
        vherm_max = vherm_max.max(ph.v_herm);
        lmin = lmin.min(ph.lambda_min);
        berr += mat_to_bloch(&p.mat).distance(truth);
        fallbacks += p.fallback as usize;
    }
    let n1 = tau.min(preds.len());
    let n2 = preds.len() - n1;
    Ok(TrajectoryRow {
        index,
        tau,
        fid_proxy: fp / n,
        fid_full: ff / n,
        bures: b / n,
        fid_p1: if n1 > 0 { p1 / n1 as f64 } else { 0.0 },
        fid_p2: if n2 > 0 { p2 / n2 as f64 } else { 0.0 },
        vtr_mean: vtr / n,
        vtr_max,
        vpsd_mean: vpsd / n,
        vpsd_max,
        vherm_mean: vherm / n,
        vherm_max,
        lambda_min: lmin,
        kraus_comp_max: comp.iter().copied().fold(0.0, f64::max),
        bloch_err: berr / n,
        fallbacks,
    })
}

fn aggregate(rows: &[TrajectoryRow]) -> Aggregate {
    let m = |f: fn(&TrajectoryRow) -> f64| mean(rows.iter().map(f));
    let fid_proxy = m(|r| r.fid_proxy);
    let n = rows.len();
    let se = if n > 1 {
        let var = rows.iter().map(|r| (r.fid_proxy - fid_proxy).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let vtr_max = rows.iter().map(|r| r.vtr_max).fold(0.0, f64::max);
    let lambda_min = rows.iter().map(|r| r.lambda_min).fold(f64::INFINITY, f64::min);
    let vherm_max = rows.iter().map(|r| r.vherm_max).fold(0.0, f64::max);
    Aggregate {
        n_traj: n,
        fid_proxy,
        fid_full: m(|r| r.fid_full),
        bures: m(|r| r.bures),
        fid_p1: m(|r| r.fid_p1),
        fid_p2: m(|r| r.fid_p2),
        vtr_mean: m(|r| r.vtr_mean),
        vtr_max,
        vpsd_mean: m(|r| r.vpsd_mean),
        vpsd_max: rows.iter().map(|r| r.vpsd_max).fold(0.0, f64::max),
        vherm_mean: m(|r| r.vherm_mean),
        vherm_max,
        kraus_comp_max: rows.iter().map(|r| r.kraus_comp_max).fold(0.0, f64::max),
        bloch_err: m(|r| r.bloch_err),
        lambda_min,
        fallbacks: rows.iter().map(|r| r.fallbacks).sum(),
        fid_proxy_se: se,
        physical: vtr_max < VTR_LIMIT && lambda_min >= LAMBDA_MIN_LIMIT && vherm_max <= VHERM_LIMIT,
    }
}

/// Scores per-trajectory predictions against a test set. `kraus_comp` may
/// be empty per trajectory when no Kraus pair was emitted.
pub fn evaluate_predictions(
    model: &str,
    head: &str,
    preds: &[Vec<RawPrediction>],
    kraus_comp: &[Vec<f64>],
    set: &TrajectorySet,
    test_sha256: &str,
) -> Result<EvalReport> {
    if preds.len() != set.len() || kraus_comp.len() != set.len() {
        return Err(Error::Shape(format!("{} prediction sequences for {} trajectories", preds.len(), set.len())));
    }
    let rows = (0..set.len())
        .into_par_iter()
        .map(|i| row(i, set.trajectories[i].tau(), &preds[i], &kraus_comp[i], set))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        model: model.to_string(),
        head: head.to_string(),
        test_sha256: test_sha256.to_string(),
        notes: Vec::new(),
        aggregate: aggregate(&rows),
        trajectories: rows,
    })
}

/// Scores filter outputs, which are valid states by construction.
pub fn evaluate_states(
    model: &str,
    head: &str,
    states: &[Vec<DensityMatrix>],
    set: &TrajectorySet,
    test_sha256: &str,
) -> Result<EvalReport> {
    let preds: Vec<Vec<RawPrediction>> = states.iter().map(|s| s.iter().map(|d| (*d).into()).collect()).collect();
    let comp = vec![Vec::new(); states.len()];
    evaluate_predictions(model, head, &preds, &comp, set, test_sha256)
}

/// Rolls a trained model over every test record (standardized with the
/// training statistics) and scores it.
pub fn evaluate_model(
    model: &Model,
    params: &[f64],
    stats: &StandardizationStats,
    set: &TrajectorySet,
    test_sha256: &str,
) -> Result<EvalReport> {
    let rolls = set
        .trajectories
        .par_iter()
        .map(|t| model.rollout(params, &standardize(&t.record, stats), DensityMatrix::ground()))
        .collect::<Result<Vec<_>>>()?;
    let (preds, comp): (Vec<_>, Vec<_>) = rolls.into_iter().map(|r| (r.preds, r.kraus_completeness)).unzip();
    let name = model.arch.backbone.kind.as_str();
    evaluate_predictions(name, model.head().as_str(), &preds, &comp, set, test_sha256)
}

/// Kraus-minus-baseline differences for one backbone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model: String,
    pub kraus_head: String,
    pub baseline_head: String,
    pub kraus_fid_proxy: f64,
    pub baseline_fid_proxy: f64,
    pub delta_fid_proxy: f64,
    pub delta_fid_full: f64,
    pub delta_bures: f64,
}

pub fn ablation_delta(kraus: &EvalReport, baseline: &EvalReport) -> Result<DeltaRow> {
    if kraus.test_sha256 != baseline.test_sha256 {
        return Err(Error::Digest(format!(
            "reports were computed on different test sets ({} vs {})",
            kraus.test_sha256, baseline.test_sha256
        )));
    }
    let (a, b) = (&kraus.aggregate, &baseline.aggregate);
    Ok(DeltaRow {
        model: kraus.model.clone(),
        kraus_head: kraus.head.clone(),
        baseline_head: baseline.head.clone(),
        kraus_fid_proxy: a.fid_proxy,
        baseline_fid_proxy: b.fid_proxy,
        delta_fid_proxy: a.fid_proxy - b.fid_proxy,
        delta_fid_full: a.fid_full - b.fid_full,
        delta_bures: a.bures - b.bures,
    })
}

pub fn write_report(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    crate::sim::write_json(path.as_ref(), report)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_row(r: &EvalReport) -> String {
    let a = &r.aggregate;
    format!(
        "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
        r.model,
        r.head,
        a.n_traj,
        a.fid_proxy,
        a.fid_full,
        a.bures,
        a.fid_p1,
        a.fid_p2,
        a.vtr_mean,
        a.vtr_max,
        a.vpsd_mean,
        a.vpsd_max,
        a.vherm_mean,
        a.kraus_comp_max,
        a.bloch_err,
        a.physical
    )
}

/// One aggregate row per report under [`CSV_HEADER`].
pub fn report_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&csv_row(r));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_csv(reports)).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_csv`] into `(model, head, values, physical)`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String, Vec<f64>, bool)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::format(path, "unexpected CSV header"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 16 {
                return Err(Error::format(path, "row does not have 16 fields"));
            }
            let nums = f[2..15]
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| Error::format(path, "bad number")))
                .collect::<Result<Vec<_>>>()?;
            let physical = f[15].parse::<bool>().map_err(|_| Error::format(path, "bad flag"))?;
            Ok((f[0].to_string(), f[1].to_string(), nums, physical))
        })
        .collect()
}

/// Several reports on one test set, with a Kraus-minus-direct delta for
/// every backbone that has both heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedTable {
    pub test_sha256: String,
    pub rows: Vec<MergedRow>,
    pub deltas: Vec<DeltaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedRow {
    pub model: String,
    pub head: String,
    pub aggregate: Aggregate,
}

pub fn merge_reports(reports: &[EvalReport]) -> Result<MergedTable> {
    let first = reports.first().ok_or_else(|| Error::Config("no reports to merge".into()))?;
    if let Some(r) = reports.iter().find(|r| r.test_sha256 != first.test_sha256) {
        return Err(Error::Digest(format!(
            "{}/{} was computed on test set {}, expected {}",
            r.model, r.head, r.test_sha256, first.test_sha256
        )));
    }
    let mut deltas = Vec::new();
    for k in reports.iter().filter(|r| r.head == "kraus") {
        if let Some(d) = reports.iter().find(|r| r.model == k.model && r.head == "direct") {
            deltas.push(ablation_delta(k, d)?);
        }
    }
    let rows = reports
        .iter()
        .map(|r| MergedRow { model: r.model.clone(), head: r.head.clone(), aggregate: r.aggregate.clone() })
        .collect();
    Ok(MergedTable { test_sha256: first.test_sha256.clone(), rows, deltas })
}

impl MergedTable {
    /// [`CSV_HEADER`] plus a trailing `delta_fid_proxy` column, filled on
    /// Kraus rows that have a direct-head counterpart.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER},delta_fid_proxy\n");
        for r in &self.rows {
            let report = EvalReport {
                model: r.model.clone(),
                head: r.head.clone(),
                test_sha256: String::new(),
                notes: Vec::new(),
                aggregate: r.aggregate.clone(),
                trajectories: Vec::new(),
            };
            let delta = self
                .deltas
                .iter()
                .find(|d| r.head == "kraus" && d.model == r.model)
                .map(|d| format!("{:?}", d.delta_fid_proxy))
                .unwrap_or_default();
            s.push_str(&csv_row(&report));
            s.push(',');
            s.push_str(&delta);
            s.push('\n');
        }
        s
    }
}
