use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    #[default]
    Superposed,
    Collapsed,
    Suppressed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Superposed => "superposed",
            Status::Collapsed => "collapsed",
            Status::Suppressed => "suppressed",
        }
    }
}

/// Input and result probability of an element.
///
/// A suppressed element keeps its last result for reporting; suppression
/// only blocks propagation into it and growth from it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbabilityState {
    pub input: f64,
    pub result: f64,
    pub status: Status,
    /// The element's input has been propagated.
    pub launched: bool,
}

impl ProbabilityState {
    pub fn observed(p: f64) -> Self {
        ProbabilityState { input: p, result: p, ..Default::default() }
    }

    pub fn is_collapsed(&self) -> bool {
        self.status == Status::Collapsed
    }

    pub fn is_suppressed(&self) -> bool {
        self.status == Status::Suppressed
    }
}
