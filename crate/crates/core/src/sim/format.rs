//! Little-endian trajectory container.
//!
//! ```text
//! "QTRJ" | version u32 | d u32 = 2 | T u64 | dt f64 | eta f64 | count u64
//! per trajectory:
//!   gamma f64 | [gamma2 f64, version 2 only] | omega1 f64 | omega2 f64
//!   tau u64 | seed u64 | record f64[T] | bloch f64[3T] (x, y, z interleaved)
//! ```
//!
//! Version 1 is written whenever γ is constant across the switch, which is
//! the default protocol. Version 2 carries the phase-2 γ explicitly.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::trajectory::{SimParams, Trajectory};
use crate::error::{Error, Result};
use crate::qcore::{BlochVector, BLOCH_TOL};

pub const TRAJ_MAGIC: &[u8; 4] = b"QTRJ";
pub const TRAJ_VERSION: u32 = 1;
pub const TRAJ_VERSION_GAMMA2: u32 = 2;

/// Contents of one trajectory file.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub steps: usize,
    pub dt: f64,
    pub eta: f64,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

pub fn encode_trajectories(set: &TrajectorySet) -> Result<Vec<u8>> {
    let version = if set.trajectories.iter().all(|t| t.params.gamma2 == t.params.gamma) {
        TRAJ_VERSION
    } else {
        TRAJ_VERSION_GAMMA2
    };
    let per = 8 * (6 + 4 * set.steps);
    let mut out = Vec::with_capacity(40 + per * set.len());
    out.extend_from_slice(TRAJ_MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(set.steps as u64).to_le_bytes());
    out.extend_from_slice(&set.dt.to_le_bytes());
    out.extend_from_slice(&set.eta.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for tr in &set.trajectories {
        let p = &tr.params;
        if tr.record.len() != set.steps || tr.states.len() != set.steps {
            return Err(Error::Shape(format!(
                "trajectory with seed {} has {} steps, file header says {}",
                p.seed,
                tr.record.len(),
                set.steps
            )));
        }
        out.extend_from_slice(&p.gamma.to_le_bytes());
        if version == TRAJ_VERSION_GAMMA2 {
            out.extend_from_slice(&p.gamma2.to_le_bytes());
        }
        out.extend_from_slice(&p.omega1.to_le_bytes());
        out.extend_from_slice(&p.omega2.to_le_bytes());
        out.extend_from_slice(&(p.tau as u64).to_le_bytes());
        out.extend_from_slice(&p.seed.to_le_bytes());
        for y in &tr.record {
            out.extend_from_slice(&y.to_le_bytes());
        }
        for b in &tr.states {
            out.extend_from_slice(&b.x.to_le_bytes());
            out.extend_from_slice(&b.y.to_le_bytes());
            out.extend_from_slice(&b.z.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_trajectories(path: impl AsRef<Path>, set: &TrajectorySet) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_trajectories(set)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    path: &'a Path,
    inner: BufReader<std::fs::File>,
}

impl Cursor<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::format(self.path, "truncated file"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { path, inner: BufReader::new(file) };
    if &c.bytes::<4>()? != TRAJ_MAGIC {
        return Err(Error::format(path, "bad magic, expected QTRJ"));
    }
    let version = c.u32()?;
    if version != TRAJ_VERSION && version != TRAJ_VERSION_GAMMA2 {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let d = c.u32()?;
    if d != 2 {
        return Err(Error::format(path, format!("unsupported dimension {d}")));
    }
    let steps = c.u64()? as usize;
    let dt = c.f64()?;
    let eta = c.f64()?;
    let count = c.u64()? as usize;
    let mut trajectories = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let gamma = c.f64()?;
        let gamma2 = if version == TRAJ_VERSION_GAMMA2 { c.f64()? } else { gamma };
        let omega1 = c.f64()?;
        let omega2 = c.f64()?;
        let tau = c.u64()? as usize;
        let seed = c.u64()?;
        let record = (0..steps).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        let mut states = Vec::with_capacity(steps);
        for _ in 0..steps {
            let b = BlochVector::new(c.f64()?, c.f64()?, c.f64()?);
            if !(b.norm() <= 1.0 + BLOCH_TOL) {
                return Err(Error::format(path, format!("unphysical stored state in trajectory {seed}")));
            }
            states.push(b);
        }
        let params = SimParams { gamma, gamma2, omega1, omega2, tau, eta, dt, steps, seed };
        trajectories.push(Trajectory { params, record, states, psd_projections: 0 });
    }
    let mut probe = [0u8; 1];
    if c.inner.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes"));
    }
    Ok(TrajectorySet { steps, dt, eta, trajectories })
}
