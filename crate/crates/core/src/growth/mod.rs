//! Instance growth from knowledge templates and the scene-fitting loop.

mod basic;
mod fit;
mod tree;

pub use basic::{component_of, exchange, grow_concept, grow_concept_as, grow_link, growth_blocked};
pub use fit::{fit_run, ingest, rank_networks, FitInput, FitReport, FitTask, ObservedRelation, RankedNetwork, SceneInputs};
pub use tree::{extend_tree, grow_tree, GrownTree};

use crate::error::Result;
use crate::graph::{BasicRelationKind, CognitiveNetwork, Derivation, Element, ElementId, Layered, Payload};
use crate::probability::{suppress, ProbabilityState, Status};
use crate::trace::{EventKind, Trace};

/// Adds Xor links between `inst` and every instance whose knowledge is
/// mutually exclusive with it. If such a partner has already collapsed,
/// `inst` is suppressed on the spot.
pub(crate) fn link_conflicts(
    net: &mut CognitiveNetwork,
    kb: &CognitiveNetwork,
    inst: &ElementId,
    trace: &mut Trace,
) -> Result<()> {
    let xors: Vec<(ElementId, ElementId, ElementId)> = kb
        .relations()
        .filter(|(_, r)| r.kind == BasicRelationKind::Xor)
        .map(|(id, r)| (id.clone(), r.a.clone(), r.b.clone()))
        .collect();
    for (xid, xa, xb) in xors {
        let layered = Layered { instance: net, kb };
        let mut links = Vec::new();
        for (mine, theirs, inst_is_a) in [(&xa, &xb, true), (&xb, &xa, false)] {
            if !layered.derives(inst, mine) {
                continue;
            }
            for other in net.elements().filter(|e| !e.is_relation() && &e.id != inst) {
                if layered.derives(&other.id, theirs) {
                    let (a, b) = if inst_is_a { (inst.clone(), other.id.clone()) } else { (other.id.clone(), inst.clone()) };
                    links.push((a, b));
                }
            }
        }
        for (a, b) in links {
            let exists = net.relations().any(|(_, r)| {
                r.kind == BasicRelationKind::Xor && ((r.a == a && r.b == b) || (r.a == b && r.b == a))
            });
            if exists {
                continue;
            }
            let template = kb.relation(&xid).expect("xor relation").clone();
            let id = net.fresh_id(xid.as_str());
            net.insert(Element {
                id: id.clone(),
                bases: vec![xid.clone()],
                state: ProbabilityState::default(),
                payload: Payload::Relation(crate::graph::Relation { a: a.clone(), b: b.clone(), ..template }),
            })?;
            trace.push(EventKind::Grow, &xid, &id, 0.0, 0.0);
            let other = if &a == inst { &b } else { &a };
            if net.state(other)?.status == Status::Collapsed && net.state(inst)?.status == Status::Superposed {
                suppress(net, inst, other, trace)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{Concept, Relation};
    use crate::probability::EngineConfig;
    use BasicRelationKind::*;

    fn id(s: &str) -> ElementId {
        ElementId::from(s)
    }

    /// The face / egg / cup knowledge base with unit conditionals.
    pub(crate) fn faces_kb() -> CognitiveNetwork {
        let mut kb = CognitiveNetwork::knowledge();
        for c in ["face", "eye", "nose", "mouth", "ear", "egg", "cup-handle", "cup"] {
            kb.add_concept(c, Concept::named(c)).unwrap();
        }
        for m in ["eye", "nose", "mouth", "ear"] {
            kb.add_relation(format!("face-has-{m}"), Relation::new(HasComponent, "face", m)).unwrap();
        }
        kb.add_relation("cup-has-handle", Relation::new(HasComponent, "cup", "cup-handle")).unwrap();
        kb.add_relation("face-xor-egg", Relation::new(Xor, "face", "egg")).unwrap();
        kb.add_relation("ear-xor-handle", Relation::new(Xor, "ear", "cup-handle")).unwrap();
        kb
    }

    fn faces_scene() -> SceneInputs {
        let inputs = [
            ("eye", 0.6),
            ("nose", 0.5),
            ("mouth", 0.4),
            ("ear", 0.1),
            ("face", 0.3),
            ("egg", 0.5),
            ("cup-handle", 0.4),
        ]
        .into_iter()
        .map(|(b, p)| FitInput::new(b, p).named(b))
        .collect();
        SceneInputs { inputs, relations: Vec::new() }
    }

    #[test]
    fn faces_final_state() {
        let kb = faces_kb();
        let report = fit_run(&kb, EngineConfig::default(), &faces_scene()).unwrap();
        for c in ["eye", "nose", "mouth", "ear", "face"] {
            let st = report.state(&id(c)).unwrap();
            assert_eq!((st.result, st.status), (1.0, Status::Collapsed), "{c}");
        }
        assert_eq!(report.state(&id("egg")).unwrap().status, Status::Suppressed);
        assert_eq!(report.state(&id("egg")).unwrap().result, 0.5);
        assert_eq!(report.state(&id("cup-handle")).unwrap().result, 0.4);
        assert!(!report.instance.elements().any(|e| e.bases.contains(&id("cup"))));
        assert!(report.absolute);
        assert_eq!(report.steps, 5);
    }

    #[test]
    fn deferred_member_grows_after_collapse() {
        let mut kb = faces_kb();
        kb.get_mut(&id("face-has-ear")).unwrap().relation_mut().unwrap().cond =
            crate::probability::ConditionalProbabilityPair::points(0.35, 1.0);
        let scene = SceneInputs {
            inputs: vec![
                FitInput::new("eye", 0.6).named("eye"),
                FitInput::new("nose", 0.5).named("nose"),
                FitInput::new("mouth", 0.4).named("mouth"),
            ],
            relations: Vec::new(),
        };
        let mut task = FitTask::new(&kb, EngineConfig::default(), &scene).unwrap();
        task.step(&kb).unwrap();
        // face at 0.6 projects only 0.21 onto the ear
        assert!(task.grown[0].deferred().contains(&id("ear")));
        let report = task.run(&kb).unwrap();
        let ear = report.grown[0].mapping.get(&id("ear")).cloned().expect("ear grown");
        // Grown once the face passes 0.3 / 0.35; the earlier launches are
        // then exchanged onto it.
        let expect = 1.0 - (1.0 - 0.6 * 0.35) * (1.0 - 0.5 * 0.35) * (1.0 - 0.4 * 0.35);
        assert!((report.state(&ear).unwrap().result - expect).abs() < 1e-12);
    }

    #[test]
    fn single_fragment_single_tree() {
        let mut kb = CognitiveNetwork::knowledge();
        kb.add_concept("r", Concept::named("r")).unwrap();
        kb.add_concept("m", Concept::named("m")).unwrap();
        kb.add_relation("r-m", Relation::new(HasPart, "r", "m")).unwrap();
        let scene = SceneInputs { inputs: vec![FitInput::new("m", 0.5).named("m1")], relations: vec![] };
        let report = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        assert_eq!(report.grown.len(), 1);
        let root = report.grown[0].root().unwrap();
        assert_eq!(report.state(root).unwrap().result, 0.5);
        assert!(!report.learning_triggered);
    }

    #[test]
    fn exclusive_interpretations_tie() {
        let mut kb = CognitiveNetwork::knowledge();
        kb.add_concept("face", Concept::named("face")).unwrap();
        kb.add_concept("egg", Concept::named("egg")).unwrap();
        kb.add_relation("x", Relation::new(Xor, "face", "egg")).unwrap();
        let scene = SceneInputs {
            inputs: vec![FitInput::new("face", 0.5), FitInput::new("egg", 0.5)],
            relations: vec![],
        };
        let report = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        assert_eq!(report.networks.len(), 2);
        assert!(report.networks.iter().all(|n| !n.all_collapsed && n.mean == 0.5));
        assert!(!report.absolute && report.tie);
    }

    #[test]
    fn nothing_matches_triggers_learning() {
        let mut kb = CognitiveNetwork::knowledge();
        kb.add_concept("p", Concept::named("p")).unwrap();
        let scene = SceneInputs { inputs: vec![FitInput::new("p", 1.0)], relations: vec![] };
        let report = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        assert!(report.grown.is_empty());
        assert!(report.learning_triggered);
    }

    #[test]
    fn pure_generation_from_collapsed_root() {
        let kb = faces_kb();
        let scene = SceneInputs { inputs: vec![FitInput::new("face", 1.0).named("f")], relations: vec![] };
        let report = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        let g = &report.grown[0];
        assert!(g.deferred().is_empty());
        for m in ["eye", "nose", "mouth", "ear"] {
            let inst = g.mapping.get(&id(m)).unwrap();
            assert!(report.state(inst).unwrap().is_collapsed());
        }
    }

    #[test]
    fn collapsed_conflict_suppresses_late_fragment() {
        let kb = faces_kb();
        let mut net = CognitiveNetwork::instance();
        let mut trace = Trace::new();
        let face = grow_concept(&mut net, &kb, &id("face"), &mut trace).unwrap();
        net.state_mut(&face).unwrap().status = Status::Collapsed;
        let egg = grow_concept(&mut net, &kb, &id("egg"), &mut trace).unwrap();
        link_conflicts(&mut net, &kb, &egg, &mut trace).unwrap();
        assert!(net.state(&egg).unwrap().is_suppressed());
    }
}
