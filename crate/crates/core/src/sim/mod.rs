//! Euler–Maruyama simulation of the σz-monitored stochastic master equation
//! with an orthogonal Hamiltonian switch, plus dataset assembly and I/O.

mod dataset;
mod format;
mod sme;
mod trajectory;

pub use dataset::{
    generate_dataset, scaled_tau_range, simulate_split, standardize, verify_disjoint, write_json,
    DatasetManifest, DatasetSpec, FileEntry, LoadedDataset, StandardizationStats, MANIFEST_FILE,
    STANDARDIZE_EPS, STATS_FILE, TEST_FILE, TRAIN_FILE,
};
pub use format::{
    encode_trajectories, read_trajectories, write_trajectories, TrajectorySet, TRAJ_MAGIC,
    TRAJ_VERSION, TRAJ_VERSION_GAMMA2,
};
pub use sme::{backaction, dissipator, em_step, em_step_raw, record_drift, StepOutcome, PSD_REPORT_THRESHOLD};
pub use trajectory::{simulate_trajectory, simulate_with, SimParams, Trajectory};

