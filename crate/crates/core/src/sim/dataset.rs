use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{read_trajectories, write_trajectories, TrajectorySet};
use super::trajectory::{simulate_trajectory, SimParams, Trajectory};
use crate::digest::sha256_file;
use crate::error::{Error, Result};
use crate::rng::{mix64, SplitMix64};

pub const TRAIN_FILE: &str = "train.qtrj";
pub const TEST_FILE: &str = "test.qtrj";
pub const STATS_FILE: &str = "stats.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Guard added to σ when standardizing.
pub const STANDARDIZE_EPS: f64 = 1e-8;

/// Generation recipe for a train/test pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub gamma_range: (f64, f64),
    pub omega_range: (f64, f64),
    pub tau_range: (usize, usize),
    pub dt: f64,
    pub steps: usize,
    pub eta: f64,
    pub base_seed_train: u64,
    pub base_seed_test: u64,
    /// Draw a fresh γ for phase 2 instead of holding it constant.
    #[serde(default)]
    pub resample_gamma_at_switch: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_train: 2000,
            n_test: 300,
            gamma_range: (0.3, 0.8),
            omega_range: (0.5, 4.0),
            tau_range: (400, 1600),
            dt: 0.005,
            steps: 2000,
            eta: 1.0,
            base_seed_train: 45,
            base_seed_test: 9999,
            resample_gamma_at_switch: false,
        }
    }
}

impl DatasetSpec {
    /// Defaults with a different length; the switch window keeps the same
    /// relative position `[T/5, 4T/5]`.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self.tau_range = scaled_tau_range(steps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (g0, g1) = self.gamma_range;
        let (w0, w1) = self.omega_range;
        let (t0, t1) = self.tau_range;
        let problems = [
            (self.n_train == 0, "n_train must be positive"),
            (!(g0 > 0.0 && g0 <= g1), "gamma range must satisfy 0 < lo <= hi"),
            (!(w0 <= w1), "omega range must satisfy lo <= hi"),
            (!(t0 > 0 && t0 <= t1 && t1 < self.steps), "tau range must satisfy 0 < lo <= hi < T"),
            (!(self.dt > 0.0), "dt must be positive"),
            (!(self.eta > 0.0 && self.eta <= 1.0), "eta must lie in (0, 1]"),
            (self.base_seed_train == self.base_seed_test, "train and test seeds must differ"),
        ];
        match problems.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::Config((*msg).to_string())),
            None => Ok(()),
        }
    }

    /// Parameters of trajectory `index` drawn from `base_seed`.
    ///
    /// Trajectory seed `s = mix64(base, index)`; parameters come from stream
    /// `mix64(s, 0)` in the order γ, ω₁, ω₂, τ (then γ₂ when resampling),
    /// Wiener increments from stream `mix64(s, 1)`.
    pub fn sample_params(&self, base_seed: u64, index: usize) -> SimParams {
        let seed = mix64(base_seed, index as u64);
        let mut rng = SplitMix64::child(seed, 0);
        let gamma = rng.uniform(self.gamma_range.0, self.gamma_range.1);
        let omega1 = rng.uniform(self.omega_range.0, self.omega_range.1);
        let omega2 = rng.uniform(self.omega_range.0, self.omega_range.1);
        let tau = rng.uniform_int(self.tau_range.0 as u64, self.tau_range.1 as u64) as usize;
        let gamma2 = if self.resample_gamma_at_switch {
            rng.uniform(self.gamma_range.0, self.gamma_range.1)
        } else {
            gamma
        };
        SimParams { gamma, gamma2, omega1, omega2, tau, eta: self.eta, dt: self.dt, steps: self.steps, seed }
    }
}

pub fn scaled_tau_range(steps: usize) -> (usize, usize) {
    let lo = ((steps as f64) * 0.2).round().max(1.0) as usize;
    let hi = ((steps as f64) * 0.8).round() as usize;
    (lo, hi.clamp(lo, steps.saturating_sub(1)))
}

/// Training-set mean and standard deviation of the raw record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mu: f64,
    pub sigma: f64,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub source_sha256: String,
}

impl StandardizationStats {
    /// Population statistics over every increment of every trajectory, summed
    /// in trajectory order.
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        let n: usize = trajs.iter().map(|t| t.record.len()).sum();
        if n == 0 {
            return Err(Error::Domain("no records to standardize".into()));
        }
        let mu = trajs.iter().flat_map(|t| &t.record).sum::<f64>() / n as f64;
        let var = trajs.iter().flat_map(|t| &t.record).map(|y| (y - mu).powi(2)).sum::<f64>() / n as f64;
        let sigma = var.sqrt();
        if !(sigma > 0.0) {
            return Err(Error::Domain("degenerate record: zero variance".into()));
        }
        Ok(StandardizationStats { mu, sigma, source: String::new(), source_sha256: String::new() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: Self = serde_json::from_str(&text)?;
        if !(stats.sigma > 0.0) {
            return Err(Error::format(path, "sigma must be positive"));
        }
        Ok(stats)
    }
}

/// `y' = (y − μ)/(σ + 1e-8)`
pub fn standardize(record: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    let inv = 1.0 / (stats.sigma + STANDARDIZE_EPS);
    record.iter().map(|y| (y - stats.mu) * inv).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub trajectories: usize,
    pub psd_projections: usize,
}

/// Machine-readable description of a generated dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub spec: DatasetSpec,
    pub train: FileEntry,
    pub test: FileEntry,
    pub stats: StandardizationStats,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Simulates trajectories `0..n` of `base_seed` on `workers` threads.
/// Output order is index order regardless of the worker count.
pub fn simulate_split(spec: &DatasetSpec, base_seed: u64, n: usize, workers: usize) -> Result<Vec<Trajectory>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| simulate_trajectory(&spec.sample_params(base_seed, i)))
            .collect()
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates the train and test files, the standardization sidecar and the
/// manifest under `out_dir`.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: impl AsRef<Path>, workers: usize) -> Result<DatasetManifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let train = simulate_split(spec, spec.base_seed_train, spec.n_train, workers)?;
    let test = simulate_split(spec, spec.base_seed_test, spec.n_test, workers)?;

    let mut entries = Vec::new();
    for (name, trajs) in [(TRAIN_FILE, &train), (TEST_FILE, &test)] {
        let path = out_dir.join(name);
        let set = TrajectorySet { steps: spec.steps, dt: spec.dt, eta: spec.eta, trajectories: trajs.clone() };
        write_trajectories(&path, &set)?;
        entries.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_file(&path)?,
            trajectories: trajs.len(),
            psd_projections: trajs.iter().map(|t| t.psd_projections).sum(),
        });
    }
    let test_entry = entries.pop().expect("two entries");
    let train_entry = entries.pop().expect("two entries");

    let mut stats = StandardizationStats::from_trajectories(&train)?;
    stats.source = TRAIN_FILE.to_string();
    stats.source_sha256 = train_entry.sha256.clone();
    write_json(&out_dir.join(STATS_FILE), &stats)?;

    let manifest = DatasetManifest {
        format: "qtw-dataset/1".to_string(),
        spec: spec.clone(),
        train: train_entry,
        test: test_entry,
        stats,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A dataset directory loaded back into memory.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub train: TrajectorySet,
    pub test: TrajectorySet,
}

impl LoadedDataset {
    /// Loads and verifies digests against the manifest.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest = DatasetManifest::load(dir.join(MANIFEST_FILE))?;
        verify_disjoint(&manifest)?;
        for entry in [&manifest.train, &manifest.test] {
            let actual = sha256_file(dir.join(&entry.name))?;
            if actual != entry.sha256 {
                return Err(Error::Digest(format!("{} does not match its manifest digest", entry.name)));
            }
        }
        let train = read_trajectories(dir.join(&manifest.train.name))?;
        let test = read_trajectories(dir.join(&manifest.test.name))?;
        Ok(LoadedDataset { dir, manifest, train, test })
    }
}

/// Train and test files must be distinct artifacts.
pub fn verify_disjoint(manifest: &DatasetManifest) -> Result<()> {
    if manifest.train.sha256 == manifest.test.sha256 {
        return Err(Error::Digest("train and test files share a digest".into()));
    }
    if manifest.spec.base_seed_train == manifest.spec.base_seed_test {
        return Err(Error::Digest("train and test splits share a base seed".into()));
    }
    Ok(())
}
