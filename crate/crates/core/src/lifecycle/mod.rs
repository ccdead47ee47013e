//! Reduction, reasoning chains, iteration and session persistence.

mod prune;
mod reason;
mod session;

pub use prune::{prune, PrunePolicy, PruneReport};
pub use reason::{iterate_step, reason_chain, ChainStep, Direction};
pub use session::{session_load, session_save, Session, SESSION_HEADER};
