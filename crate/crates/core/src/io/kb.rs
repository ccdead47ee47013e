use std::collections::BTreeMap;
use std::fmt::Write;

use super::lex::{self, Field, Line};
use crate::error::{Error, Result};
use crate::graph::{
    BasicRelationKind, CognitiveNetwork, Concept, Element, ElementId, Payload, Relation, RelationStats, TreeDecl,
    TreeStats, ValueTerm,
};
use crate::probability::{ConditionalProbabilityPair, ProbabilityState};

/// Re-anchors an engine error at the token that names the offending element.
fn locate(line: &Line, err: Error) -> Error {
    let needle = match &err {
        Error::Lookup(id) | Error::Duplicate(id) | Error::Conflict(id) => Some(id.clone()),
        Error::Structure { element, .. } => Some(element.clone()),
        _ => None,
    };
    let col = needle
        .and_then(|id| line.fields.iter().skip(1).find(|f| f.value == id.as_str()))
        .map_or(line.fields[0].col, |f| f.value_col);
    line.err(col, err.to_string())
}

fn concept_line(net: &mut CognitiveNetwork, line: &Line) -> Result<()> {
    let id = line.positional(1, "concept id")?;
    let mut concept = Concept::named(id.value.clone());
    for (key, f) in line.keyed(2)? {
        match key {
            "name" => concept.name = f.value.clone(),
            "value" => concept.value = Some(ValueTerm::Scalar(lex::real(line, f)?)),
            "interval" => {
                let (lo, hi) = lex::pair(line, f, &f.value)?;
                concept.value = Some(ValueTerm::interval(lo, hi).map_err(|e| line.err(f.value_col, e.to_string()))?);
            }
            "dist" => {
                let rest = f.value.strip_prefix("gauss:").unwrap_or(&f.value);
                concept.distribution = Some(lex::gaussian(line, f, rest)?);
            }
            other => {
                concept.params.insert(other.to_owned(), lex::param(line, f)?);
            }
        }
    }
    net.add_concept(id.value.clone(), concept).map(|_| ()).map_err(|e| locate(line, e))
}

fn relation_fields(
    line: &Line,
    from: usize,
) -> Result<(Option<&Field>, BTreeMap<&str, &Field>, BTreeMap<String, crate::graph::Param>)> {
    let mut known = BTreeMap::new();
    let mut params = BTreeMap::new();
    let mut kind = None;
    for (key, f) in line.keyed(from)? {
        match key {
            "kind" => kind = Some(f),
            "a" | "b" | "pba" | "pab" | "base" | "membership" => {
                known.insert(key, f);
            }
            other => {
                params.insert(other.to_owned(), lex::param(line, f)?);
            }
        }
    }
    Ok((kind, known, params))
}

/// Builds a relation from `kind= a= b= [pba= pab=] [membership=]` fields.
pub(crate) fn build_relation(
    line: &Line,
    kind: Option<&Field>,
    known: &BTreeMap<&str, &Field>,
    params: BTreeMap<String, crate::graph::Param>,
) -> Result<Relation> {
    let kind_f = kind.ok_or_else(|| line.err(line.end_col(), "missing kind="))?;
    let kind: BasicRelationKind = kind_f.value.parse().map_err(|e: Error| line.err(kind_f.value_col, e.to_string()))?;
    let end = |k: &str| {
        known
            .get(k)
            .map(|f| ElementId::from(f.value.as_str()))
            .ok_or_else(|| line.err(line.end_col(), format!("missing {k}=")))
    };
    let mut rel = Relation::new(kind, end("a")?, end("b")?);
    let mut cond = rel.cond;
    if let Some(f) = known.get("pba") {
        cond.forward = lex::prob_spec(line, f)?;
    }
    if let Some(f) = known.get("pab") {
        cond.backward = lex::prob_spec(line, f)?;
    }
    for (k, forward) in [("pba", true), ("pab", false)] {
        if let (Some(f), Some(p)) = (known.get(k), cond.toward(forward).as_point()) {
            if !kind.admits(forward, p) {
                return Err(line.err(f.value_col, format!("{kind} fixes {k}, got {p}")));
            }
        }
    }
    rel.cond = ConditionalProbabilityPair { ..cond };
    if let Some(f) = known.get("membership") {
        rel.membership = lex::probability(line, f)?;
    }
    rel.params = params;
    Ok(rel)
}

fn relation_line(net: &mut CognitiveNetwork, line: &Line) -> Result<()> {
    let id = line.positional(1, "relation id")?;
    let (kind, known, params) = relation_fields(line, 2)?;
    let rel = build_relation(line, kind, &known, params)?;
    let bases = known.get("base").map(|f| vec![ElementId::from(f.value.as_str())]).unwrap_or_default();
    net.insert(Element {
        id: ElementId::from(id.value.as_str()),
        bases,
        state: ProbabilityState::default(),
        payload: Payload::Relation(rel),
    })
    .map_err(|e| locate(line, e))
}

fn tree_line(net: &mut CognitiveNetwork, line: &Line) -> Result<()> {
    let root = ElementId::from(line.positional(1, "tree root")?.value.as_str());
    let mut decl = TreeDecl { members: Vec::new(), base: None, stats: None };
    let mut stats = TreeStats { new_knowledge: false, success: 1, trials: 1, created_at: 0 };
    let mut has_stats = false;
    for (key, f) in line.keyed(2)? {
        match key {
            "members" => {
                decl.members = f.value.split(',').filter(|s| !s.is_empty()).map(ElementId::from).collect();
            }
            "base" => decl.base = Some(ElementId::from(f.value.as_str())),
            "new" => (stats.new_knowledge, has_stats) = (lex::boolean(line, f)?, true),
            "success" => (stats.success, has_stats) = (lex::integer(line, f)?, true),
            "trials" => (stats.trials, has_stats) = (lex::integer(line, f)?, true),
            "created" => (stats.created_at, has_stats) = (lex::integer(line, f)?, true),
            other => return Err(line.err(f.col, format!("unknown tree key `{other}`"))),
        }
    }
    if stats.success > stats.trials {
        return Err(line.err(line.fields[0].col, "success exceeds trials"));
    }
    if has_stats {
        decl.stats = Some(stats);
    }
    net.declare_tree(&root, decl).map_err(|e| locate(line, e))
}

fn stat_line(net: &mut CognitiveNetwork, line: &Line) -> Result<()> {
    let id = ElementId::from(line.positional(1, "relation id")?.value.as_str());
    let mut stats = RelationStats::default();
    for (key, f) in line.keyed(2)? {
        match key {
            "co" => stats.cooccur = lex::integer(line, f)?,
            "seen" => stats.seen = lex::integer(line, f)?,
            other => return Err(line.err(f.col, format!("unknown stat key `{other}`"))),
        }
    }
    net.set_relation_stats(&id, stats).map_err(|e| locate(line, e))
}

/// Parses a knowledge base. Statements are applied in order, so every
/// reference must point backwards.
pub fn parse_kb(text: &str) -> Result<CognitiveNetwork> {
    let mut net = CognitiveNetwork::knowledge();
    for line in lex::lines(text)? {
        let head = &line.fields[0];
        if head.key.is_some() {
            return Err(line.err(head.col, "expected a statement keyword"));
        }
        match head.value.as_str() {
            "concept" => concept_line(&mut net, &line)?,
            "relation" => relation_line(&mut net, &line)?,
            "belong" => {
                let d = ElementId::from(line.positional(1, "derived id")?.value.as_str());
                let b = ElementId::from(line.positional(2, "base id")?.value.as_str());
                if line.fields.len() > 3 {
                    return Err(line.err(line.fields[3].col, "unexpected token"));
                }
                net.add_base(&d, &b).map_err(|e| locate(&line, e))?;
            }
            "tree" => tree_line(&mut net, &line)?,
            "stat" => stat_line(&mut net, &line)?,
            "global" => {
                for (key, f) in line.keyed(1)? {
                    net.set_global(key, f.value.clone());
                }
            }
            other => return Err(line.err(head.col, format!("unknown statement `{other}`"))),
        }
    }
    Ok(net)
}

/// Canonical text of a knowledge base: elements in insertion order, then
/// base links, trees, statistics and globals.
pub fn serialize_kb(net: &CognitiveNetwork) -> String {
    let mut out = String::new();
    for el in net.elements() {
        match &el.payload {
            Payload::Concept(c) => {
                write!(out, "concept {}", el.id).unwrap();
                if c.name != el.id.as_str() {
                    write!(out, " name={}", lex::text_token(&c.name)).unwrap();
                }
                match c.value {
                    Some(ValueTerm::Scalar(v)) => write!(out, " value={v}").unwrap(),
                    Some(ValueTerm::Interval { lo, hi }) => write!(out, " interval={lo},{hi}").unwrap(),
                    None => {}
                }
                if let Some(g) = c.distribution {
                    write!(out, " dist=gauss:{},{}", g.mu, g.sigma).unwrap();
                }
                for (k, p) in &c.params {
                    write!(out, " {k}={}", lex::param_token(p)).unwrap();
                }
            }
            Payload::Relation(r) => {
                write!(
                    out,
                    "relation {} kind={} a={} b={} pba={} pab={}",
                    el.id,
                    r.kind.dsl_name(),
                    r.a,
                    r.b,
                    lex::spec_token(&r.cond.forward),
                    lex::spec_token(&r.cond.backward)
                )
                .unwrap();
                if r.membership != 1.0 {
                    write!(out, " membership={}", r.membership).unwrap();
                }
                for (k, p) in &r.params {
                    write!(out, " {k}={}", lex::param_token(p)).unwrap();
                }
            }
        }
        out.push('\n');
    }
    for el in net.elements() {
        for b in &el.bases {
            writeln!(out, "belong {} {b}", el.id).unwrap();
        }
    }
    for (root, decl) in net.trees() {
        let members: Vec<&str> = decl.members.iter().map(ElementId::as_str).collect();
        write!(out, "tree {root} members={}", members.join(",")).unwrap();
        if let Some(b) = &decl.base {
            write!(out, " base={b}").unwrap();
        }
        if let Some(s) = decl.stats {
            write!(out, " new={} success={} trials={} created={}", s.new_knowledge, s.success, s.trials, s.created_at)
                .unwrap();
        }
        out.push('\n');
    }
    for (id, s) in net.all_relation_stats() {
        writeln!(out, "stat {id} co={} seen={}", s.cooccur, s.seen).unwrap();
    }
    for (k, v) in net.globals() {
        writeln!(out, "global {k}={}", lex::text_token(v)).unwrap();
    }
    out
}
