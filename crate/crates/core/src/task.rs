//! Prediction task selection: raw future values or mean loads over
//! exponentially growing segments.

use std::fmt;
use std::str::FromStr;

use crate::esp::SegmentScheme;

/// What the network is asked to predict for each history window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// The next `horizon` raw load values (5-minute steps).
    Actual { horizon: usize },
    /// Mean loads over `segments` exponentially growing segments with the
    /// given baseline length in steps.
    MeanLoad { segments: usize, baseline_steps: usize },
}

impl Task {
    pub fn actual(horizon: usize) -> Self {
        Task::Actual { horizon }
    }

    /// Mean-load task with the default 1-step (5-minute) baseline segment.
    pub fn mean_load(segments: usize) -> Self {
        Task::MeanLoad { segments, baseline_steps: 1 }
    }

    /// Number of future steps a target consumes.
    pub fn horizon_steps(&self) -> usize {
        match self {
            Task::Actual { horizon } => *horizon,
            Task::MeanLoad { segments, baseline_steps } => {
                SegmentScheme::total_steps(*segments, *baseline_steps)
            }
        }
    }

    /// Model output dimension for this task.
    pub fn output_size(&self) -> usize {
        match self {
            Task::Actual { horizon } => *horizon,
            Task::MeanLoad { segments, .. } => *segments,
        }
    }

    pub fn scheme(&self) -> Option<SegmentScheme> {
        match self {
            Task::Actual { .. } => None,
            Task::MeanLoad { segments, baseline_steps } => {
                Some(SegmentScheme::new(*segments, *baseline_steps).expect("segments >= 1"))
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Actual { horizon } => write!(f, "actual:{horizon}"),
            Task::MeanLoad { segments, .. } => write!(f, "esp:{segments}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid task spec {0:?}: expected actual:<m> or esp:<n>")]
pub struct TaskParseError(pub String);

impl FromStr for Task {
    type Err = TaskParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, num) = s.split_once(':').ok_or_else(|| TaskParseError(s.to_string()))?;
        let n: usize = num.parse().map_err(|_| TaskParseError(s.to_string()))?;
        if n == 0 {
            return Err(TaskParseError(s.to_string()));
        }
        match kind {
            "actual" => Ok(Task::actual(n)),
            "esp" => Ok(Task::mean_load(n)),
            _ => Err(TaskParseError(s.to_string())),
        }
    }
}
