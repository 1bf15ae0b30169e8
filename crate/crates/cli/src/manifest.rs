use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use qtw_core::digest::sha256_file;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> qtw_core::Result<Self> {
        Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Provenance of one invocation. Kept apart from the artifacts it describes
/// because the wall-clock field differs between otherwise identical runs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub wall_clock_s: f64,
    pub outputs: Vec<FileDigest>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(subcommand: &str, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            wall_clock_s: 0.0,
            outputs: Vec::new(),
            started: Some(Instant::now()),
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    /// Records an output and prints its path on stdout.
    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        println!("{}", path.display());
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> anyhow::Result<()> {
        self.wall_clock_s = self.started.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0);
        qtw_core::sim::write_json(path, &self)?;
        println!("{}", path.display());
        Ok(())
    }
}
