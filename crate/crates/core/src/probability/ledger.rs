use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use crate::graph::ElementId;

/// One contribution delivered by a launch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub launch: u64,
    pub source: ElementId,
    pub target: ElementId,
    pub via: ElementId,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchRecord {
    pub id: u64,
    pub origin: ElementId,
    pub delta: f64,
}

/// Every contribution made by propagation, so that any of them can be
/// cancelled later.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContributionLedger {
    entries: Vec<LedgerEntry>,
    launches: Vec<LaunchRecord>,
    next_launch: u64,
    sealed: BTreeSet<ElementId>,
}

impl ContributionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin_launch(&mut self, origin: &ElementId, delta: f64) -> u64 {
        let id = self.next_launch;
        self.next_launch += 1;
        self.launches.push(LaunchRecord { id, origin: origin.clone(), delta });
        id
    }

    pub fn record(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn launches(&self) -> &[LaunchRecord] {
        &self.launches
    }

    pub fn entries_for<'a>(&'a self, target: &'a ElementId) -> impl Iterator<Item = &'a LedgerEntry> {
        self.entries.iter().filter(move |e| &e.target == target)
    }

    /// Removes and returns, in ledger order, every entry matching `pred`.
    pub fn take_where(&mut self, mut pred: impl FnMut(&LedgerEntry) -> bool) -> Vec<LedgerEntry> {
        let (taken, kept) = std::mem::take(&mut self.entries).into_iter().partition(|e| pred(e));
        self.entries = kept;
        taken
    }

    pub fn forget_launch(&mut self, id: u64) {
        self.launches.retain(|l| l.id != id);
    }

    /// Marks an element as gone: its entries are dropped and no future
    /// operation may replay a launch that started from it.
    pub fn seal(&mut self, id: &ElementId) {
        self.entries.retain(|e| &e.target != id);
        self.sealed.insert(id.clone());
    }

    pub fn is_sealed(&self, id: &ElementId) -> bool {
        self.sealed.contains(id)
    }

    /// Folds every recorded contribution for `target` over `input`.
    pub fn replay(&self, target: &ElementId, input: f64, mode: Mode) -> f64 {
        self.entries_for(target).fold(input, |acc, e| match mode {
            Mode::Exact => acc + e.contribution - acc * e.contribution,
            Mode::Simplified => acc + e.contribution,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_and_take() {
        let mut ledger = ContributionLedger::new();
        let t = ElementId::from("t");
        let l = ledger.begin_launch(&"s".into(), 1.0);
        for c in [0.5, 0.5] {
            ledger.record(LedgerEntry {
                launch: l,
                source: "s".into(),
                target: t.clone(),
                via: "r".into(),
                contribution: c,
            });
        }
        assert_eq!(ledger.replay(&t, 0.0, Mode::Exact), 0.75);
        assert_eq!(ledger.replay(&t, 0.0, Mode::Simplified), 1.0);
        let taken = ledger.take_where(|e| e.target == t);
        assert_eq!(taken.len(), 2);
        assert!(ledger.entries().is_empty());
    }
}
