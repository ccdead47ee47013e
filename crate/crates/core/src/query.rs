//! Template queries over stored networks.
//!
//! A template is a small instance network in which some concepts are
//! variables. Answers are complete matches of the template inside the store;
//! when none exist, bounded lateral reasoning may grow the missing pieces on
//! a scratch copy and each answer then carries the relations it relied on.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{
    enumerate_derivations, BasicRelationKind, CognitiveNetwork, Derivation, ElementId, Layered, NetworkFragment,
};
use crate::growth::{ingest, SceneInputs};
use crate::lifecycle::{reason_chain, Direction};
use crate::trace::Trace;

/// Variable assignment: template variable to store element.
pub type Binding = BTreeMap<ElementId, ElementId>;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTemplate {
    pub pattern: CognitiveNetwork,
    pub variables: BTreeSet<ElementId>,
}

impl QueryTemplate {
    /// Checks that every variable exists, is a concept and is tied by some
    /// relation to a non-variable element.
    pub fn new(pattern: CognitiveNetwork, variables: BTreeSet<ElementId>) -> Result<Self> {
        for v in &variables {
            if pattern.concept(v).is_none() {
                return Err(Error::structure(v, "query variable must be a concept of the pattern"));
            }
            let anchored = pattern
                .relations()
                .filter(|(_, r)| r.touches(v))
                .any(|(_, r)| r.other_end(v).is_some_and(|o| !variables.contains(o)));
            if !anchored {
                return Err(Error::structure(v, "query variable is not anchored to a known element"));
            }
        }
        Ok(QueryTemplate { pattern, variables })
    }

    /// A template from scenario-style inputs; `var=true` inputs become the
    /// variables.
    pub fn from_scene(kb: &CognitiveNetwork, scene: &SceneInputs) -> Result<Self> {
        let (pattern, known) = ingest(kb, scene, &mut Trace::new())?;
        let variables =
            pattern.elements().filter(|e| !e.is_relation() && !known.contains(&e.id)).map(|e| e.id.clone()).collect();
        Self::new(pattern, variables)
    }
}

/// When a store element may stand in for a template element.
struct QueryRule<'a> {
    template: &'a QueryTemplate,
    store: &'a CognitiveNetwork,
    kb: &'a CognitiveNetwork,
}

impl Derivation for QueryRule<'_> {
    fn derives(&self, d: &ElementId, b: &ElementId) -> bool {
        let (Ok(se), Ok(te)) = (self.store.get(d), self.template.pattern.get(b)) else {
            return false;
        };
        match (se.relation(), te.relation()) {
            (Some(sr), Some(tr)) if sr.kind != tr.kind => return false,
            (Some(_), Some(_)) => {}
            (None, None) => {
                let named = !self.template.variables.contains(b) && self.store.contains(b);
                if named && d != b {
                    return false;
                }
                if !named {
                    let layered = Layered { instance: self.store, kb: self.kb };
                    if !te.bases.iter().all(|tb| layered.derives(d, tb)) {
                        return false;
                    }
                }
                if let Some(tv) = te.value() {
                    if !se.value().is_some_and(|sv| sv.contained_in(&tv)) {
                        return false;
                    }
                }
            }
            _ => return false,
        }
        // Every parameter the template mentions must be present and fit.
        te.params().iter().all(|(k, spec)| se.params().get(k).is_some_and(|obs| obs.membership_under(spec) > 0.0))
    }
}

fn complete_matches(template: &QueryTemplate, store: &CognitiveNetwork, kb: &CognitiveNetwork) -> Vec<(Binding, Vec<ElementId>)> {
    let rule = QueryRule { template, store, kb };
    let derived = NetworkFragment::whole(store);
    let base = NetworkFragment::whole(&template.pattern);
    let mut found: BTreeMap<Binding, Vec<ElementId>> = BTreeMap::new();
    enumerate_derivations(&derived, &base, &rule, &mut |m| {
        let binding: Binding = template
            .variables
            .iter()
            .filter_map(|v| m.get(v).map(|d| (v.clone(), d.clone())))
            .collect();
        let image: Vec<ElementId> = m.iter().map(|(_, d)| d.clone()).collect();
        found.entry(binding).or_insert(image);
        true
    });
    found.into_iter().collect()
}

/// Every binding under which the template is completely matched in the
/// store, ordered by binding.
pub fn query_match(template: &QueryTemplate, store: &CognitiveNetwork, kb: &CognitiveNetwork) -> Vec<Binding> {
    complete_matches(template, store, kb).into_iter().map(|(b, _)| b).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub binding: Binding,
    /// Relations grown by reasoning that the match relies on, in growth order.
    pub explanation: Vec<ElementId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub answers: Vec<Answer>,
    /// The scratch network the answers refer to.
    pub scratch: CognitiveNetwork,
    /// Reasoning could have continued past the step budget.
    pub budget_exhausted: bool,
}

/// [`query_match`], falling back to reasoning over the lateral reasoning
/// kinds for up to `max_steps` steps.
pub fn query_reason(
    template: &QueryTemplate,
    store: &CognitiveNetwork,
    kb: &CognitiveNetwork,
    max_steps: usize,
) -> Result<QueryOutcome> {
    let kinds: BTreeSet<BasicRelationKind> = BasicRelationKind::REASONING.into_iter().collect();
    query_reason_with(template, store, kb, max_steps, &kinds)
}

/// Store elements the template pins down, and the relations at them.
fn anchors(template: &QueryTemplate, store: &CognitiveNetwork, kb: &CognitiveNetwork) -> Vec<ElementId> {
    let rule = QueryRule { template, store, kb };
    let fixed: Vec<&ElementId> = template
        .pattern
        .elements()
        .filter(|e| !e.is_relation() && !template.variables.contains(&e.id))
        .map(|e| &e.id)
        .collect();
    let mut out: Vec<ElementId> = Vec::new();
    for e in store.elements().filter(|e| !e.is_relation()) {
        if fixed.iter().any(|t| rule.derives(&e.id, t)) {
            out.push(e.id.clone());
        }
    }
    let concepts = out.clone();
    for (rid, r) in store.relations() {
        if r.kind != BasicRelationKind::Xor && concepts.iter().any(|c| r.touches(c)) {
            out.push(rid.clone());
        }
    }
    out
}

pub fn query_reason_with(
    template: &QueryTemplate,
    store: &CognitiveNetwork,
    kb: &CognitiveNetwork,
    max_steps: usize,
    kinds: &BTreeSet<BasicRelationKind>,
) -> Result<QueryOutcome> {
    let direct = complete_matches(template, store, kb);
    if !direct.is_empty() || max_steps == 0 {
        return Ok(QueryOutcome {
            answers: direct.into_iter().map(|(binding, _)| Answer { binding, explanation: Vec::new() }).collect(),
            scratch: store.clone(),
            budget_exhausted: false,
        });
    }
    let starts = anchors(template, store, kb);
    let mut last = store.clone();
    let mut truncated = false;
    // Deepen one step at a time so answers use the shortest chains.
    for depth in 1..=max_steps {
        let mut scratch = store.clone();
        let mut chains = Vec::new();
        truncated = false;
        for s in &starts {
            let chain = reason_chain(&mut scratch, kb, s, kinds, Direction::Forward, depth, 0.0, &mut Trace::new())?;
            truncated |= chain.len() == depth;
            chains.push(chain);
        }
        let found = complete_matches(template, &scratch, kb);
        if !found.is_empty() {
            let answers = found
                .into_iter()
                .map(|(binding, image)| {
                    let explanation = chains
                        .iter()
                        .filter(|c| c.iter().any(|st| image.contains(&st.element)))
                        .flat_map(|c| {
                            let used = c.iter().rposition(|st| image.contains(&st.element)).unwrap_or(0);
                            c[..=used].iter().map(|st| st.relation.clone())
                        })
                        .collect();
                    Answer { binding, explanation }
                })
                .collect();
            return Ok(QueryOutcome { answers, scratch, budget_exhausted: false });
        }
        last = scratch;
        if !truncated {
            break;
        }
    }
    Ok(QueryOutcome { answers: Vec::new(), scratch: last, budget_exhausted: truncated })
}
