//! Probability collapse, suppression and ledger-based undo.

use std::collections::BTreeMap;

use super::algebra::unsuperpose;
use super::config::{EngineConfig, Mode};
use super::ledger::{ContributionLedger, LedgerEntry};
use super::pps::pps_launch;
use super::state::Status;
use crate::error::{Error, Result};
use crate::graph::{BasicRelationKind, CognitiveNetwork, ElementId};
use crate::trace::{EventKind, Trace};

/// Slack tolerated between a value and the contribution being removed from
/// it before the ledger is declared corrupt.
const UNDO_SLACK: f64 = 1e-9;

/// Reverts the effect of `removed` (already taken out of `ledger`) on every
/// element they targeted. Collapsed and suppressed targets keep their values.
///
/// Contributions are removed newest first by inverse superposition. When one
/// of them was a certainty the inverse does not exist, so the value is
/// rebuilt from the element's input and the entries still in the ledger.
/// A target left without any contribution gets its input back exactly.
pub(crate) fn revert_entries(
    net: &mut CognitiveNetwork,
    ledger: &ContributionLedger,
    removed: &[LedgerEntry],
    mode: Mode,
) -> Result<()> {
    let mut by_target: BTreeMap<&ElementId, Vec<f64>> = BTreeMap::new();
    for e in removed {
        by_target.entry(&e.target).or_default().push(e.contribution);
    }
    for (target, contributions) in by_target {
        let Ok(el) = net.get_mut(target) else { continue };
        if el.state.status != Status::Superposed {
            continue;
        }
        let untouched = ledger.entries_for(target).next().is_none();
        el.state.result = match mode {
            _ if untouched => el.state.input,
            Mode::Simplified => contributions.iter().rev().fold(el.state.result, |acc, c| acc - c),
            Mode::Exact if contributions.iter().any(|&c| c >= 1.0) => {
                ledger.replay(target, el.state.input, mode)
            }
            Mode::Exact => {
                let mut p = el.state.result;
                for &c in contributions.iter().rev() {
                    p = match unsuperpose(p, c) {
                        Err(Error::LedgerCorruption { value, .. }) if c - value <= UNDO_SLACK => 0.0,
                        other => other?,
                    };
                }
                p
            }
        };
    }
    Ok(())
}

/// Cancels every contribution received by `x` and returns the restored value.
pub fn undo_contributions(
    net: &mut CognitiveNetwork,
    ledger: &mut ContributionLedger,
    x: &ElementId,
    mode: Mode,
) -> Result<f64> {
    net.get(x)?;
    let removed = ledger.take_where(|e| &e.target == x);
    revert_entries(net, ledger, &removed, mode)?;
    Ok(net.state(x)?.result)
}

fn collapse_one(
    net: &mut CognitiveNetwork,
    x: &ElementId,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<()> {
    match net.state(x)?.status {
        Status::Suppressed => return Err(Error::Conflict(x.clone())),
        Status::Collapsed => return Ok(()),
        Status::Superposed => {}
    }
    undo_contributions(net, ledger, x, cfg.mode)?;
    let st = net.state_mut(x)?;
    st.input = 1.0;
    st.result = 1.0;
    st.status = Status::Collapsed;
    st.launched = true;
    trace.push(EventKind::Collapse, x, x, 1.0, 1.0);

    let partners: Vec<ElementId> = net
        .incident(x)
        .into_iter()
        .filter_map(|rid| {
            let r = net.relation(rid)?;
            (r.kind == BasicRelationKind::Xor).then(|| r.other_end(x).cloned()).flatten()
        })
        .collect();
    for y in partners {
        let st = net.state_mut(&y)?;
        if st.status == Status::Superposed {
            st.status = Status::Suppressed;
            let kept = st.result;
            trace.push(EventKind::Suppress, x, &y, 0.0, kept);
        }
    }
    pps_launch(net, x, 1.0, cfg, ledger, trace)?;
    Ok(())
}

/// Collapses every element at or above the collapse threshold, repeating
/// until nothing more reaches it. Each round is one trace step; within a
/// round the strongest elements go first.
pub fn settle(
    net: &mut CognitiveNetwork,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<Vec<ElementId>> {
    let mut collapsed = Vec::new();
    loop {
        let mut wave: Vec<(f64, usize, ElementId)> = net
            .elements()
            .enumerate()
            .filter(|(_, e)| e.state.status == Status::Superposed && cfg.collapse_reached(e.state.result))
            .map(|(i, e)| (e.state.result, i, e.id.clone()))
            .collect();
        if wave.is_empty() {
            return Ok(collapsed);
        }
        wave.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        trace.next_step();
        for (_, _, x) in wave {
            if net.state(&x)?.status == Status::Superposed {
                collapse_one(net, &x, cfg, ledger, trace)?;
                collapsed.push(x);
            }
        }
    }
}

/// Collapses `x` (a threshold crossing or a known fact) and settles the
/// cascade it causes.
pub fn collapse_element(
    net: &mut CognitiveNetwork,
    x: &ElementId,
    cfg: &EngineConfig,
    ledger: &mut ContributionLedger,
    trace: &mut Trace,
) -> Result<Vec<ElementId>> {
    collapse_one(net, x, cfg, ledger, trace)?;
    let mut all = vec![x.clone()];
    all.extend(settle(net, cfg, ledger, trace)?);
    Ok(all)
}

/// Marks `x` suppressed without touching its values.
pub fn suppress(net: &mut CognitiveNetwork, x: &ElementId, by: &ElementId, trace: &mut Trace) -> Result<()> {
    let st = net.state_mut(x)?;
    if st.status == Status::Collapsed {
        return Err(Error::Conflict(x.clone()));
    }
    if st.status == Status::Superposed {
        st.status = Status::Suppressed;
        let kept = st.result;
        trace.push(EventKind::Suppress, by, x, 0.0, kept);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Concept, Relation};
    use crate::probability::ProbabilityState;

    fn id(s: &str) -> ElementId {
        ElementId::from(s)
    }

    fn chain() -> CognitiveNetwork {
        let mut net = CognitiveNetwork::instance();
        for c in ["a", "b", "c"] {
            net.add_concept(c, Concept::named(c)).unwrap();
        }
        net.add_relation("ab", Relation::new(BasicRelationKind::Causality, "a", "b")).unwrap();
        net.add_relation("bc", Relation::new(BasicRelationKind::Causality, "b", "c")).unwrap();
        net
    }

    #[test]
    fn cascade_over_chain() {
        let mut net = chain();
        let mut ledger = ContributionLedger::new();
        let mut trace = Trace::new();
        let cfg = EngineConfig::default();
        let got = collapse_element(&mut net, &id("a"), &cfg, &mut ledger, &mut trace).unwrap();
        assert_eq!(got, vec![id("a"), id("b"), id("c")]);
        for c in ["a", "b", "c"] {
            let st = net.state(&id(c)).unwrap();
            assert_eq!((st.input, st.result, st.status), (1.0, 1.0, Status::Collapsed));
        }
        // a's launch lifts both b and c to 1, so they collapse in one round,
        // b first.
        assert_eq!(trace.step(), 1);
    }

    #[test]
    fn isolated_collapse() {
        let mut net = CognitiveNetwork::instance();
        net.add_concept("solo", Concept::named("solo")).unwrap();
        let mut ledger = ContributionLedger::new();
        let mut trace = Trace::new();
        collapse_element(&mut net, &id("solo"), &EngineConfig::default(), &mut ledger, &mut trace).unwrap();
        assert!(net.state(&id("solo")).unwrap().is_collapsed());
        assert!(ledger.entries().is_empty());
    }

    #[test]
    fn xor_partner_suppressed_and_keeps_value() {
        let mut net = chain();
        net.add_concept("rival", Concept::named("rival")).unwrap();
        net.get_mut(&id("rival")).unwrap().state = ProbabilityState::observed(0.5);
        net.add_relation("x", Relation::new(BasicRelationKind::Xor, "a", "rival")).unwrap();
        let mut ledger = ContributionLedger::new();
        let mut trace = Trace::new();
        collapse_element(&mut net, &id("a"), &EngineConfig::default(), &mut ledger, &mut trace).unwrap();
        let st = net.state(&id("rival")).unwrap();
        assert_eq!((st.status, st.result), (Status::Suppressed, 0.5));
        let err = collapse_element(&mut net, &id("rival"), &EngineConfig::default(), &mut ledger, &mut trace);
        assert_eq!(err, Err(Error::Conflict(id("rival"))));
    }

    #[test]
    fn undo_restores_input() {
        let mut net = chain();
        net.get_mut(&id("b")).unwrap().state = ProbabilityState::observed(0.3);
        net.get_mut(&id("c")).unwrap().state = ProbabilityState::observed(0.2);
        let mut ledger = ContributionLedger::new();
        let mut trace = Trace::new();
        let cfg = EngineConfig { collapse_threshold: 1.0, ..Default::default() };
        pps_launch(&mut net, &id("c"), 0.2, &cfg, &mut ledger, &mut trace).unwrap();
        pps_launch(&mut net, &id("a"), 0.4, &cfg, &mut ledger, &mut trace).unwrap();
        let restored = undo_contributions(&mut net, &mut ledger, &id("b"), cfg.mode).unwrap();
        assert!((restored - 0.3).abs() < 1e-12);
    }

    #[test]
    fn certain_contribution_undone_by_replay() {
        let mut net = chain();
        net.get_mut(&id("b")).unwrap().state = ProbabilityState::observed(0.3);
        let mut ledger = ContributionLedger::new();
        let mut trace = Trace::new();
        let cfg = EngineConfig { collapse_threshold: 1.0, ..Default::default() };
        pps_launch(&mut net, &id("a"), 1.0, &cfg, &mut ledger, &mut trace).unwrap();
        assert_eq!(net.state(&id("b")).unwrap().result, 1.0);
        let restored = undo_contributions(&mut net, &mut ledger, &id("b"), cfg.mode).unwrap();
        assert_eq!(restored, 0.3);
    }
}
