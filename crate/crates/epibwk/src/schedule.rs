//! Episode index schedules splitting data between the context-distribution
//! store and the conversion-model store.

use crate::model::ContextId;
use crate::oracles::LabeledDataset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("alpha {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("default schedule requires zero initial arrays, got {0}")]
    DefaultWithInitialArrays(usize),
    #[error("expected {expected} initial arrays, got {got}")]
    InitialArrayCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Arithmetic progression starting at episode 1.
    Default,
    /// Progression shifted past `m` pre-loaded unlabeled arrays.
    Unlabeled,
}

/// The arithmetic-progression membership rule.
///
/// The progression starts at `1 + m * n_alpha` with stride
/// `n_alpha = ceil(2/alpha - 1)`. With a stride in `[2/alpha - 1, 2/alpha]`
/// the prefix count over `1..=t` is `k+1` for `t` in `[k*n+1, (k+1)*n]`,
/// which stays inside `[alpha*t/2, alpha*t]` for every `t >= 1/alpha`; a
/// stride of `ceil(1/alpha)` overshoots the upper bound on odd prefixes
/// whenever `1/alpha` is an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub alpha: f64,
    pub n_alpha: usize,
    pub m: usize,
    pub kind: ScheduleKind,
}

impl Schedule {
    pub fn new(alpha: f64, m: usize, kind: ScheduleKind) -> Result<Self, ScheduleError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ScheduleError::InvalidAlpha(alpha));
        }
        if kind == ScheduleKind::Default && m != 0 {
            return Err(ScheduleError::DefaultWithInitialArrays(m));
        }
        let n_alpha = (2.0 / alpha - 1.0).ceil() as usize;
        Ok(Schedule {
            alpha,
            n_alpha,
            m,
            kind,
        })
    }

    fn start(&self) -> usize {
        1 + self.m * self.n_alpha
    }

    /// Whether episode `t` feeds the unlabeled store.
    pub fn contains(&self, t: usize) -> bool {
        t >= self.start() && (t - self.start()) % self.n_alpha == 0
    }

    /// Number of member episodes in `1..=t`.
    pub fn count_through(&self, t: usize) -> usize {
        if t < self.start() {
            0
        } else {
            (t - self.start()) / self.n_alpha + 1
        }
    }
}

/// The schedule rule plus the two data stores it partitions episodes into.
#[derive(Debug, Clone)]
pub struct ScheduleState {
    pub schedule: Schedule,
    /// Conversion observations from non-member episodes.
    pub labeled: LabeledDataset,
    /// Per-episode context arrays `(theta_1, ..., theta_H)` from member
    /// episodes, preceded by the `m` pre-loaded arrays.
    pub unlabeled: Vec<Vec<ContextId>>,
}

/// Fresh state with empty stores. Pre-loaded arrays are attached with
/// [`ScheduleState::with_initial_arrays`].
pub fn make_schedule(
    alpha: f64,
    m: usize,
    kind: ScheduleKind,
) -> Result<ScheduleState, ScheduleError> {
    Ok(ScheduleState {
        schedule: Schedule::new(alpha, m, kind)?,
        labeled: LabeledDataset::new(),
        unlabeled: Vec::new(),
    })
}

impl ScheduleState {
    pub fn with_initial_arrays(
        mut self,
        arrays: Vec<Vec<ContextId>>,
    ) -> Result<Self, ScheduleError> {
        if arrays.len() != self.schedule.m {
            return Err(ScheduleError::InitialArrayCount {
                expected: self.schedule.m,
                got: arrays.len(),
            });
        }
        self.unlabeled = arrays;
        Ok(self)
    }
}
