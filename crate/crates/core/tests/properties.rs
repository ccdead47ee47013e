use std::collections::BTreeSet;

use dcnet_core::graph::{check_derived_network, Layered, NetworkFragment};
use dcnet_core::growth::{fit_run, FitInput, FitTask, ObservedRelation, SceneInputs};
use dcnet_core::io::{format_trace, parse_kb, serialize_kb, session_load, TRACE_PRECISION};
use dcnet_core::learning::{cnl_run, gaussian_overlap, pool_gaussians, LearnConfig, Priors};
use dcnet_core::lifecycle::Session;
use dcnet_core::probability::{pps_launch, superpose, superpose_n, unsuperpose, Gaussian};
use dcnet_core::{
    BasicRelationKind, CognitiveNetwork, Concept, ContributionLedger, ElementId, EngineConfig, ProbabilityState,
    Relation, Trace,
};
use proptest::prelude::*;

const FACES_KB: &str = include_str!("data/faces.kb");

fn faces_scene(order: &[usize]) -> SceneInputs {
    let all = [("eye", 0.6), ("nose", 0.5), ("mouth", 0.4), ("ear", 0.1), ("face", 0.3), ("egg", 0.5), ("cup-handle", 0.4)];
    SceneInputs {
        inputs: order.iter().map(|&i| FitInput::new(all[i].0, all[i].1).named(all[i].0)).collect(),
        relations: vec![],
    }
}

const KINDS: [BasicRelationKind; 4] =
    [BasicRelationKind::HasComponent, BasicRelationKind::Adjoining, BasicRelationKind::Causality, BasicRelationKind::HasAttribute];

/// Concepts `c0..cn` plus relations given as (a, b, kind, pba, pab).
fn network(n: usize, rels: &[(usize, usize, usize, f64, f64)], role_kb: bool) -> CognitiveNetwork {
    let mut net = if role_kb { CognitiveNetwork::knowledge() } else { CognitiveNetwork::instance() };
    for i in 0..n {
        net.add_concept(format!("c{i}"), Concept::named(format!("c{i}"))).unwrap();
    }
    for (k, &(a, b, kind, pba, pab)) in rels.iter().enumerate() {
        let (a, b) = (a % n, b % n);
        if a == b {
            continue;
        }
        let rel = Relation::new(KINDS[kind % KINDS.len()], format!("c{a}"), format!("c{b}")).with_cond(pba, pab);
        net.add_relation(format!("r{k}"), rel).unwrap();
    }
    net
}

fn rel_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, f64, f64)>> {
    prop::collection::vec((0usize..10, 0usize..10, 0usize..4, 0.05f64..1.0, 0.05f64..1.0), 0..14)
}

fn adjacent_scene(parts: &[String]) -> SceneInputs {
    let inputs = parts.iter().map(|p| FitInput::new(p.as_str(), 1.0).named(format!("{p}-seen"))).collect();
    let mut relations = Vec::new();
    for (i, a) in parts.iter().enumerate() {
        for b in &parts[i + 1..] {
            relations.push(ObservedRelation::new(
                format!("{a}-{b}"),
                BasicRelationKind::Adjoining,
                format!("{a}-seen"),
                format!("{b}-seen"),
            ));
        }
    }
    SceneInputs { inputs, relations }
}

proptest! {
    #[test]
    fn superpose_stays_in_unit_interval_and_grows(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let s = superpose(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(s + 1e-15 >= a.max(b));
    }

    #[test]
    fn unsuperpose_inverts(a in 0.0f64..=1.0, b in 0.0f64..0.99) {
        let back = unsuperpose(superpose(a, b).unwrap(), b).unwrap();
        prop_assert!((back - a).abs() <= 1e-12);
    }

    #[test]
    fn superpose_n_ignores_order(mut ps in prop::collection::vec(0.0f64..=1.0, 0..10)) {
        let forward = superpose_n(&ps).unwrap();
        ps.reverse();
        prop_assert!((forward - superpose_n(&ps).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn kb_text_round_trip(n in 2usize..10, rels in rel_strategy()) {
        let net = network(n, &rels, true);
        let text = serialize_kb(&net);
        let again = parse_kb(&text).unwrap();
        prop_assert_eq!(serialize_kb(&again), text);
        prop_assert_eq!(again.element_count(), net.element_count());
    }

    #[test]
    fn ledger_replay_matches_results(
        n in 2usize..10,
        rels in rel_strategy(),
        inputs in prop::collection::vec(0.0f64..0.5, 10),
        launches in prop::collection::vec((0usize..10, 0.05f64..0.5), 1..6),
    ) {
        let rels: Vec<_> = rels.into_iter().map(|(a, b, k, x, y)| (a, b, k, x * 0.6, y * 0.6)).collect();
        let mut net = network(n, &rels, false);
        for i in 0..n {
            *net.state_mut(&ElementId::from(format!("c{i}").as_str())).unwrap() = ProbabilityState::observed(inputs[i]);
        }
        let cfg = EngineConfig { collapse_threshold: 1.0, ..EngineConfig::default() };
        let mut ledger = ContributionLedger::new();
        for (src, delta) in launches {
            let src = ElementId::from(format!("c{}", src % n).as_str());
            pps_launch(&mut net, &src, delta, &cfg, &mut ledger, &mut Trace::new()).unwrap();
        }
        let ids: Vec<ElementId> = net.ids().cloned().collect();
        for x in ids {
            let st = *net.state(&x).unwrap();
            prop_assert!((ledger.replay(&x, st.input, cfg.mode) - st.result).abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&st.result));
        }
    }

    #[test]
    fn derivation_is_injective_and_sound(n in 2usize..7, rels in rel_strategy()) {
        let kb = network(n, &rels, true);
        let mut inst = CognitiveNetwork::instance();
        for e in kb.elements() {
            let mut copy = e.clone();
            copy.id = ElementId::from(format!("{}'", e.id).as_str());
            if let Some(r) = copy.relation_mut() {
                r.a = ElementId::from(format!("{}'", r.a).as_str());
                r.b = ElementId::from(format!("{}'", r.b).as_str());
            }
            copy.bases = vec![e.id.clone()];
            inst.insert(copy).unwrap();
        }
        let layered = Layered { instance: &inst, kb: &kb };
        let m = check_derived_network(&NetworkFragment::whole(&inst), &NetworkFragment::whole(&kb), &layered);
        let m = m.expect("a copy derives from its original");
        let images: BTreeSet<&ElementId> = m.iter().map(|(_, d)| d).collect();
        prop_assert_eq!(images.len(), m.len());
        prop_assert_eq!(m.len(), kb.element_count());
    }

    #[test]
    fn fit_trace_is_deterministic(order in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
        let kb = parse_kb(FACES_KB).unwrap();
        let scene = faces_scene(&order);
        let a = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        let b = fit_run(&kb, EngineConfig::default(), &scene).unwrap();
        prop_assert_eq!(format_trace(&a.events, TRACE_PRECISION), format_trace(&b.events, TRACE_PRECISION));
    }

    #[test]
    fn session_round_trip_at_any_step(stop in 0usize..6) {
        let kb = parse_kb(FACES_KB).unwrap();
        let mut task = FitTask::new(&kb, EngineConfig::default(), &faces_scene(&[0, 1, 2, 3, 4, 5, 6])).unwrap();
        for _ in 0..stop {
            task.step(&kb).unwrap();
        }
        let bytes = Session::new(task).to_bytes();
        let loaded = session_load(bytes.as_slice()).unwrap();
        prop_assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn learning_counts_stay_consistent(present in prop::collection::vec(any::<bool>(), 1..8)) {
        let scenes: Vec<SceneInputs> = present
            .iter()
            .map(|&with_third| {
                let mut parts = vec!["p1".to_owned(), "p2".to_owned()];
                if with_third {
                    parts.push("p3".to_owned());
                }
                adjacent_scene(&parts)
            })
            .collect();
        let mut kb = CognitiveNetwork::knowledge();
        let report = cnl_run(&mut kb, &scenes, &Priors::default(), &LearnConfig::default()).unwrap();
        for (root, decl) in kb.trees() {
            let Some(stats) = decl.stats else { continue };
            prop_assert!(stats.trials as usize <= scenes.len());
            prop_assert!(stats.success <= stats.trials);
            for e in report.estimates.iter().filter(|e| kb.relation(&e.relation).is_some_and(|r| &r.a == root)) {
                let rs = kb.relation_stats(&e.relation).unwrap();
                prop_assert_eq!(e.forward, rs.cooccur as f64 / stats.trials as f64);
                prop_assert_eq!(e.backward, rs.cooccur as f64 / rs.seen as f64);
                prop_assert!(e.forward <= 1.0 && e.backward <= 1.0);
            }
        }
    }

    #[test]
    fn repeated_scenes_add_nothing(parts in 1usize..4, repeats in 2usize..5) {
        let names: Vec<String> = (0..parts).map(|i| format!("q{i}")).collect();
        let scene = adjacent_scene(&names);
        let mut kb = CognitiveNetwork::knowledge();
        cnl_run(&mut kb, std::slice::from_ref(&scene), &Priors::default(), &LearnConfig::default()).unwrap();
        let size = kb.element_count();
        let more = vec![scene; repeats];
        cnl_run(&mut kb, &more, &Priors::default(), &LearnConfig::default()).unwrap();
        prop_assert_eq!(kb.element_count(), size);
    }

    #[test]
    fn pooled_gaussian_lies_between(m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, s1 in 0.05f64..2.0, s2 in 0.05f64..2.0, w1 in 1.0f64..20.0, w2 in 1.0f64..20.0) {
        let (a, b) = (Gaussian { mu: m1, sigma: s1 }, Gaussian { mu: m2, sigma: s2 });
        let g = pool_gaussians(a, w1, b, w2);
        prop_assert!(g.mu >= m1.min(m2) - 1e-12 && g.mu <= m1.max(m2) + 1e-12);
        prop_assert!(g.sigma + 1e-12 >= s1.min(s2));
        let o = gaussian_overlap(a, b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&o));
        prop_assert!((gaussian_overlap(a, b) - gaussian_overlap(b, a)).abs() <= 1e-12);
    }
}
