use std::collections::BTreeMap;

use super::kb::build_relation;
use super::lex::{self, Line};
use crate::error::Result;
use crate::graph::{CognitiveNetwork, ElementId, ValueTerm};
use crate::growth::{FitInput, FitReport, ObservedRelation, SceneInputs};
use crate::probability::{EngineConfig, Mode, Status};

/// A checked claim about the fitted instance network.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub id: ElementId,
    pub p: Option<f64>,
    pub status: Option<Status>,
    pub line: usize,
}

impl Expectation {
    /// `None` when the claim holds, else a description of the mismatch.
    pub fn check(&self, report: &FitReport, tol: f64) -> Option<String> {
        let Some(st) = report.state(&self.id) else {
            return Some(format!("line {}: `{}` was never created", self.line, self.id));
        };
        if let Some(p) = self.p {
            if (st.result - p).abs() > tol {
                return Some(format!("line {}: `{}` has p={} (expected {p})", self.line, self.id, st.result));
            }
        }
        match self.status {
            Some(s) if s != st.status => Some(format!(
                "line {}: `{}` is {} (expected {})",
                self.line,
                self.id,
                st.status.name(),
                s.name()
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: EngineConfig,
    pub scene: SceneInputs,
    pub expectations: Vec<Expectation>,
    pub warnings: Vec<String>,
}

fn config_line(line: &Line, cfg: &mut EngineConfig, seen: &mut BTreeMap<String, usize>, warnings: &mut Vec<String>) -> Result<()> {
    for (key, f) in line.keyed(1)? {
        let canonical = match key {
            "collapse" | "collapse_threshold" => {
                cfg.collapse_threshold = lex::probability(line, f)?;
                "collapse"
            }
            "activation" | "activation_threshold" => {
                cfg.activation_threshold = lex::probability(line, f)?;
                "activation"
            }
            "epsilon" | "decay_epsilon" => {
                cfg.decay_epsilon = lex::real(line, f)?;
                "epsilon"
            }
            "mode" => {
                cfg.mode = match f.value.as_str() {
                    "exact" => Mode::Exact,
                    "simplified" => Mode::Simplified,
                    other => return Err(line.err(f.value_col, format!("unknown mode `{other}`"))),
                };
                "mode"
            }
            "k" | "default_k" => {
                cfg.default_k = lex::real(line, f)?;
                "k"
            }
            "max_hops" => {
                cfg.max_hops = match f.value.as_str() {
                    "none" => None,
                    _ => Some(lex::integer(line, f)? as u32),
                };
                "max_hops"
            }
            "branch_limit" => {
                cfg.branch_limit = lex::integer(line, f)? as usize;
                "branch_limit"
            }
            "nesting_limit" => {
                cfg.nesting_limit = lex::integer(line, f)? as usize;
                "nesting_limit"
            }
            "auto_prune" => {
                cfg.auto_prune = lex::boolean(line, f)?;
                "auto_prune"
            }
            other => return Err(line.err(f.col, format!("unknown config key `{other}`"))),
        };
        if let Some(prev) = seen.insert(canonical.to_owned(), line.number) {
            warnings.push(format!(
                "line {}: config `{canonical}` already set on line {prev}; the last value wins",
                line.number
            ));
        }
    }
    Ok(())
}

fn input_line(line: &Line, kb: Option<&CognitiveNetwork>) -> Result<FitInput> {
    let base = line.positional(1, "base id")?;
    let base_id = ElementId::from(base.value.as_str());
    if kb.is_some_and(|kb| kb.concept(&base_id).is_none()) {
        return Err(line.err(base.value_col, format!("`{base_id}` is not a knowledge concept")));
    }
    let mut input = FitInput::new(base_id, 0.0);
    let mut p = None;
    for (key, f) in line.keyed(2)? {
        match key {
            "p" => p = Some(lex::probability(line, f)?),
            "as" => input.id = Some(ElementId::from(f.value.as_str())),
            "var" => input.variable = lex::boolean(line, f)?,
            "value" => input.value = Some(ValueTerm::Scalar(lex::real(line, f)?)),
            "interval" => {
                let (lo, hi) = lex::pair(line, f, &f.value)?;
                input.value = Some(ValueTerm::interval(lo, hi).map_err(|e| line.err(f.value_col, e.to_string()))?);
            }
            other => {
                input.params.insert(other.to_owned(), lex::param(line, f)?);
            }
        }
    }
    input.prob = match p {
        Some(p) => p,
        None if input.variable => 0.0,
        None => return Err(line.err(line.end_col(), "missing p=")),
    };
    Ok(input)
}

/// Parses a scenario against the knowledge base its inputs refer to.
/// Config lines override defaults; a key given twice keeps its last value
/// and records a warning.
pub fn parse_scenario(text: &str, kb: &CognitiveNetwork) -> Result<Scenario> {
    parse(text, Some(kb))
}

/// Parses a scenario without resolving ids against a knowledge base, for
/// learning input whose kinds may not be known yet.
pub fn parse_open_scenario(text: &str) -> Result<Scenario> {
    parse(text, None)
}

fn parse(text: &str, kb: Option<&CognitiveNetwork>) -> Result<Scenario> {
    let mut config = EngineConfig::default();
    let mut seen = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut scene = SceneInputs::default();
    let mut expectations = Vec::new();
    let mut last_line = 1;
    for line in lex::lines(text)? {
        last_line = line.number;
        let head = &line.fields[0];
        match (head.key.is_none(), head.value.as_str()) {
            (true, "config") => config_line(&line, &mut config, &mut seen, &mut warnings)?,
            (true, "input") => scene.inputs.push(input_line(&line, kb)?),
            (true, "relation") => {
                let id = line.positional(1, "relation id")?;
                let mut kind = None;
                let mut known = BTreeMap::new();
                let mut params = BTreeMap::new();
                for (key, f) in line.keyed(2)? {
                    match key {
                        "kind" => kind = Some(f),
                        "a" | "b" | "pba" | "pab" | "base" | "membership" => {
                            known.insert(key, f);
                        }
                        other => {
                            params.insert(other.to_owned(), lex::param(&line, f)?);
                        }
                    }
                }
                let rel = build_relation(&line, kind, &known, params.clone())?;
                for end in ["a", "b"] {
                    let f = known[end];
                    if !scene.inputs.iter().any(|i| i.id.as_ref().is_some_and(|x| x.as_str() == f.value)) {
                        return Err(line.err(f.value_col, format!("`{}` is not an earlier input `as=` id", f.value)));
                    }
                }
                let base = known.get("base").map(|f| ElementId::from(f.value.as_str()));
                if let (Some(b), Some(kb)) = (&base, kb) {
                    if kb.relation(b).is_none() {
                        return Err(line.err(known["base"].value_col, format!("`{b}` is not a knowledge relation")));
                    }
                }
                let explicit = known.contains_key("pba") || known.contains_key("pab");
                scene.relations.push(ObservedRelation {
                    id: ElementId::from(id.value.as_str()),
                    kind: rel.kind,
                    a: rel.a,
                    b: rel.b,
                    base,
                    cond: explicit.then_some(rel.cond),
                    params,
                });
            }
            (true, "expect") => {
                let id = ElementId::from(line.positional(1, "instance id")?.value.as_str());
                let mut e = Expectation { id, p: None, status: None, line: line.number };
                for (key, f) in line.keyed(2)? {
                    match key {
                        "p" => e.p = Some(lex::probability(&line, f)?),
                        "status" => {
                            e.status = Some(match f.value.as_str() {
                                "collapsed" => Status::Collapsed,
                                "suppressed" => Status::Suppressed,
                                "superposed" => Status::Superposed,
                                other => return Err(line.err(f.value_col, format!("unknown status `{other}`"))),
                            })
                        }
                        other => return Err(line.err(f.col, format!("unknown expect key `{other}`"))),
                    }
                }
                expectations.push(e);
            }
            _ => return Err(line.err(head.col, format!("unknown statement `{}`", head.value))),
        }
    }
    config
        .validate()
        .map_err(|e| crate::error::Error::Parse { line: last_line, column: 1, reason: e.to_string() })?;
    Ok(Scenario { config, scene, expectations, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::io::parse_kb;

    fn kb() -> CognitiveNetwork {
        parse_kb("concept face\nconcept eye\nrelation f-e kind=HAS_COMPONENT a=face b=eye pba=1 pab=1\n").unwrap()
    }

    #[test]
    fn open_scenario_accepts_unknown_kinds() {
        let text = "input tail p=1 as=t\n";
        assert!(parse_scenario(text, &kb()).is_err());
        let sc = parse_open_scenario(text).unwrap();
        assert_eq!(sc.scene.inputs[0].base, ElementId::from("tail"));
    }

    #[test]
    fn only_config_is_empty_task() {
        let sc = parse_scenario("config collapse=0.95\n", &kb()).unwrap();
        assert!(sc.scene.is_empty());
        assert_eq!(sc.config.collapse_threshold, 0.95);
    }

    #[test]
    fn duplicate_config_last_wins() {
        let sc = parse_scenario("config collapse=0.95\nconfig collapse=0.8 mode=simplified\n", &kb()).unwrap();
        assert_eq!(sc.config.collapse_threshold, 0.8);
        assert_eq!(sc.config.mode, Mode::Simplified);
        assert_eq!(sc.warnings.len(), 1);
    }

    #[test]
    fn inputs_relations_and_expectations() {
        let text = "\
input eye p=0.6 as=e1 size=2
input face p=0.3 as=f1
relation o1 kind=HAS_COMPONENT a=f1 b=e1 base=f-e
expect f1 p=1.0 status=collapsed
";
        let sc = parse_scenario(text, &kb()).unwrap();
        assert_eq!(sc.scene.inputs.len(), 2);
        assert_eq!(sc.scene.inputs[0].id, Some(ElementId::from("e1")));
        assert_eq!(sc.scene.relations[0].base, Some(ElementId::from("f-e")));
        assert_eq!(sc.scene.relations[0].cond, None);
        assert_eq!(sc.expectations[0].status, Some(Status::Collapsed));
    }

    #[test]
    fn unknown_base_rejected() {
        assert!(matches!(
            parse_scenario("input nose p=0.5\n", &kb()),
            Err(Error::Parse { line: 1, column: 7, .. })
        ));
    }

    #[test]
    fn variables_need_no_probability() {
        let sc = parse_scenario("input eye var=true as=x\n", &kb()).unwrap();
        assert!(sc.scene.inputs[0].variable);
        assert!(parse_scenario("input eye as=x\n", &kb()).is_err());
    }
}
