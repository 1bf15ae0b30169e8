use crate::qcore::{bloch_matrix, CMat2};
use crate::sim::{standardize, StandardizationStats, Trajectory};

/// A standardized record paired with its target states.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub x: Vec<f64>,
    /// `targets[t]` is the state after increment `t`.
    pub targets: Vec<CMat2>,
    /// Switch index of the source trajectory.
    pub tau: usize,
}

impl Sequence {
    pub fn from_trajectory(traj: &Trajectory, stats: &StandardizationStats) -> Self {
        Sequence {
            x: standardize(&traj.record, stats),
            targets: traj.states.iter().map(|b| bloch_matrix(*b)).collect(),
            tau: traj.tau(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}
