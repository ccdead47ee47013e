//! Probabilistic cognitive-network inference.
//!
//! Knowledge is stored as a heterogeneous graph of concepts and bidirectional
//! relations ([`graph`]). Each relation carries a pair of conditional
//! probabilities; evidence spreads over the graph by probability passing and
//! superposition and elements that become near-certain collapse to certainty
//! ([`probability`]). On top of that sit tree matching ([`matching`]), scene
//! fitting by growth ([`growth`]), reduction, reasoning and sessions
//! ([`lifecycle`]), template queries ([`query`]) and structure learning
//! ([`learning`]). [`io`] holds the line-oriented text formats.

pub mod error;
pub mod graph;
pub mod growth;
pub mod io;
pub mod learning;
pub mod lifecycle;
pub mod matching;
pub mod probability;
pub mod query;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{
    BasicRelationKind, CognitiveNetwork, Concept, DerivedMapping, Element, ElementId,
    NetworkFragment, NetworkRole, Param, Relation, TreeNetworkView, ValueTerm,
};
pub use probability::{
    ConditionalProbabilityPair, ContributionLedger, EngineConfig, Mode, ProbSpec,
    ProbabilityState, Status,
};
pub use trace::{EventKind, Trace, TraceEvent};
