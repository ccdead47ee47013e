//! Conditional probabilities, superposition, propagation and collapse.

mod algebra;
mod collapse;
mod config;
mod ledger;
mod pps;
mod spec;
mod state;

pub use algebra::{gaussian_membership, relational_membership, superpose, superpose_n, unsuperpose};
pub(crate) use algebra::params_membership;
pub(crate) use collapse::revert_entries;
pub use collapse::{collapse_element, settle, suppress, undo_contributions};
pub use config::{EngineConfig, Mode};
pub use ledger::{ContributionLedger, LaunchRecord, LedgerEntry};
pub use pps::{conditional_toward, pps_launch, pps_launch_with, Launch, NoStop, StopRule};
pub use spec::{ConditionalProbabilityPair, Gaussian, ProbSpec};
pub use state::{ProbabilityState, Status};

/// Unweighted mean of result probabilities; 0 for an empty set.
pub fn mean_result<'a>(states: impl IntoIterator<Item = &'a ProbabilityState>) -> f64 {
    let (sum, n) = states.into_iter().fold((0.0, 0usize), |(s, n), st| (s + st.result, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
