//! `QCKP` checkpoint files: magic, `u32` version, `u64`-length-prefixed JSON
//! header, then `u64`-counted `f64` blobs for parameters and optimizer state
//! (count 0 when absent). All little-endian.

use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::TrainRunConfig;
use super::optim::AdamW;
use crate::error::{Error, Result};
use crate::model::{Architecture, Model};
use crate::sim::StandardizationStats;

pub const CKPT_MAGIC: &[u8; 4] = b"QCKP";
pub const CKPT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Architecture,
    pub run: TrainRunConfig,
    pub seed: u64,
    pub epoch: usize,
    /// Mean selection-slice Bures distance at `epoch`, when measured.
    pub selection_bures: Option<f64>,
    pub param_count: usize,
    /// Standardization applied to the training records.
    pub stats: Option<StandardizationStats>,
    pub train_sha256: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
    pub optimizer: Option<AdamW>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        let m = Model::from_arch(&self.header.arch)?;
        m.check_params(&self.params)?;
        Ok(m)
    }
}

fn put_blob(buf: &mut Vec<u8>, v: &[f64]) {
    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&ck.header)?;
    let mut buf = Vec::with_capacity(32 + header.len() + 8 * ck.params.len());
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    put_blob(&mut buf, &ck.params);
    put_blob(&mut buf, &ck.optimizer.as_ref().map(AdamW::to_blob).unwrap_or_default());
    Ok(buf)
}

pub fn write_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ck)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::format(path, why);
    let mut cur = Cursor::new(bytes.as_slice());
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];

    cur.read_exact(&mut u32b).map_err(|_| bad("truncated magic"))?;
    if &u32b != CKPT_MAGIC {
        return Err(bad("not a QCKP checkpoint"));
    }
    cur.read_exact(&mut u32b).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(u32b);
    if version != CKPT_VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    cur.read_exact(&mut u64b).map_err(|_| bad("truncated header length"))?;
    let hlen = u64::from_le_bytes(u64b) as usize;
    if hlen > bytes.len() {
        return Err(bad("header length exceeds file"));
    }
    let mut hbuf = vec![0u8; hlen];
    cur.read_exact(&mut hbuf).map_err(|_| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&hbuf)?;

    let mut blob = |what: &str| -> Result<Vec<f64>> {
        cur.read_exact(&mut u64b).map_err(|_| bad(&format!("truncated {what} count")))?;
        let n = u64::from_le_bytes(u64b) as usize;
        if n.saturating_mul(8) > bytes.len() {
            return Err(bad(&format!("{what} count exceeds file")));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            cur.read_exact(&mut u64b).map_err(|_| bad(&format!("truncated {what}")))?;
            out.push(f64::from_le_bytes(u64b));
        }
        Ok(out)
    };
    let params = blob("parameter")?;
    let opt = blob("optimizer")?;
    if (cur.position() as usize) != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if params.len() != header.param_count {
        return Err(bad(&format!("{} parameters, header says {}", params.len(), header.param_count)));
    }
    let expected = Model::from_arch(&header.arch)?.param_count();
    if expected != params.len() {
        return Err(bad(&format!("architecture needs {expected} parameters, file has {}", params.len())));
    }
    let optimizer = if opt.is_empty() { None } else { Some(AdamW::from_blob(&opt, header.run.weight_decay)?) };
    Ok(Checkpoint { header, params, optimizer })
}
