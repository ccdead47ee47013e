//! Ordered record of everything the engine does.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::ElementId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Launch,
    Contribute,
    Superpose,
    Collapse,
    Suppress,
    Grow,
    Prune,
    Match,
    Learn,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::Launch,
        EventKind::Contribute,
        EventKind::Superpose,
        EventKind::Collapse,
        EventKind::Suppress,
        EventKind::Grow,
        EventKind::Prune,
        EventKind::Match,
        EventKind::Learn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Launch => "launch",
            EventKind::Contribute => "contribute",
            EventKind::Superpose => "superpose",
            EventKind::Collapse => "collapse",
            EventKind::Suppress => "suppress",
            EventKind::Grow => "grow",
            EventKind::Prune => "prune",
            EventKind::Match => "match",
            EventKind::Learn => "learn",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub event: EventKind,
    pub src: ElementId,
    pub dst: ElementId,
    pub value: f64,
    pub result: f64,
}

/// Event log plus the current step number.
///
/// Only the step counter is persisted with a session; events belong to the
/// run that produced them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    step: u64,
    #[serde(skip)]
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn next_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    pub fn push(&mut self, event: EventKind, src: &ElementId, dst: &ElementId, value: f64, result: f64) {
        self.events.push(TraceEvent {
            step: self.step,
            event,
            src: src.clone(),
            dst: dst.clone(),
            value,
            result,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
