//! Line-oriented text formats: knowledge bases, scenarios and traces.
//!
//! Every statement sits on one line of whitespace-separated tokens; `#`
//! starts a comment when it begins a token. Values may be double-quoted.

mod kb;
mod lex;
mod scenario;
mod trace;

pub use kb::{parse_kb, serialize_kb};
pub use scenario::{parse_open_scenario, parse_scenario, Expectation, Scenario};
pub use trace::{emit_trace, format_event, format_real, format_trace, trace_precision, PRECISION_ENV, TRACE_PRECISION};

pub use crate::lifecycle::{session_load, session_save};
