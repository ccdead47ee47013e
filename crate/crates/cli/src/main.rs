//! `dcnet`: validate knowledge bases, fit scenarios, match, query and learn.
//!
//! Exit codes: 0 success, 1 an `expect` line failed, 2 unreadable or
//! malformed input, 3 engine invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcnet_core::graph::classify_tree_network;
use dcnet_core::growth::{ingest, FitTask};
use dcnet_core::io::{
    format_real, format_trace, parse_kb, parse_open_scenario, parse_scenario, serialize_kb, session_load,
    session_save, trace_precision,
};
use dcnet_core::learning::{cnl_run, LearnConfig, Priors};
use dcnet_core::lifecycle::Session;
use dcnet_core::matching::{match_tree, MatchContext};
use dcnet_core::query::{query_reason, QueryTemplate};
use dcnet_core::{CognitiveNetwork, ElementId, Error, Trace};

#[derive(Parser)]
#[command(name = "dcnet", version, about = "Probabilistic cognitive-network engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a knowledge base.
    Validate { kb: PathBuf },
    /// Fit a scenario against a knowledge base.
    Fit {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Resume from this session file if it exists; save the final state to it.
        #[arg(long)]
        session: Option<PathBuf>,
        /// Stop after this many scheduling steps.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Match a fragment against one knowledge tree.
    Match {
        #[arg(long)]
        kb: PathBuf,
        /// Scenario-format file whose inputs form the fragment.
        #[arg(long)]
        fragment: PathBuf,
        /// Root of the knowledge tree.
        #[arg(long)]
        base: String,
    },
    /// Answer a template query over the scenario-format store.
    Query {
        #[arg(long)]
        kb: PathBuf,
        /// Scenario-format template; `var=true` inputs are the unknowns.
        #[arg(long)]
        template: PathBuf,
        /// Scenario-format facts to query; defaults to the knowledge base itself.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        max_steps: usize,
    },
    /// Learn from every `*.scenario` file in a directory, in name order.
    Learn {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Expectation(Vec<String>),
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Load { .. } => Failure::Input(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: &[u8]) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}:{m}", path.display())),
        f => f,
    }
}

fn load_kb(path: &Path) -> Result<CognitiveNetwork, Failure> {
    parse_kb(&read(path)?).map_err(in_file(path))
}

fn validate(kb: &Path) -> Result<(), Failure> {
    let net = load_kb(kb)?;
    println!("ok: {} elements, {} trees", net.element_count(), net.trees().count());
    Ok(())
}

fn fit(kb: &Path, scenario: &Path, trace: Option<&Path>, session: Option<&Path>, steps: Option<u64>) -> Result<(), Failure> {
    let kb_net = load_kb(kb)?;
    let sc = parse_scenario(&read(scenario)?, &kb_net).map_err(in_file(scenario))?;
    for w in &sc.warnings {
        eprintln!("warning: {}: {w}", scenario.display());
    }
    let resume = session.filter(|p| p.exists());
    let mut task = match resume {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            let mut task = session_load(bytes.as_slice()).map_err(in_file(p))?.task;
            // the scenario's config governs the rounds run now
            task.config = sc.config.clone();
            task
        }
        None => FitTask::new(&kb_net, sc.config.clone(), &sc.scene)?,
    };
    let mut taken = 0;
    while steps.is_none_or(|n| taken < n) && task.step(&kb_net)? {
        taken += 1;
    }
    let report = task.report();
    if let Some(t) = trace {
        write(t, format_trace(task.trace.events(), trace_precision()).as_bytes())?;
    }
    if let Some(p) = session {
        let mut out = Vec::new();
        session_save(&Session::new(task.clone()), &mut out).map_err(|e| Failure::Internal(e.to_string()))?;
        write(p, &out)?;
    }
    println!(
        "steps={} done={} absolute={} tie={} learning_triggered={}",
        report.steps,
        task.is_done(),
        report.absolute,
        report.tie,
        report.learning_triggered
    );
    let prec = trace_precision();
    for e in report.instance.elements().filter(|e| !e.is_relation()) {
        if let Ok(st) = report.instance.state(&e.id) {
            println!("{} {} {}", e.id, st.status.name(), format_real(st.result, prec));
        }
    }
    if !task.is_done() {
        return Ok(());
    }
    let failures: Vec<String> = sc.expectations.iter().filter_map(|x| x.check(&report, 1e-9)).collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Expectation(failures))
    }
}

fn do_match(kb: &Path, fragment: &Path, base: &str) -> Result<(), Failure> {
    let kb_net = load_kb(kb)?;
    let sc = parse_scenario(&read(fragment)?, &kb_net).map_err(in_file(fragment))?;
    let (net, frag) = ingest(&kb_net, &sc.scene, &mut Trace::new())?;
    let tree = classify_tree_network(&kb_net, &ElementId::from(base))?;
    let m = match_tree(&MatchContext::new(&net, &kb_net), &frag, &tree, &sc.config)?;
    println!("membership={}", format_real(m.membership, trace_precision()));
    for (b, d) in m.mapping.iter() {
        println!("{b} <- {d}");
    }
    Ok(())
}

fn query(kb: &Path, template: &Path, store: Option<&Path>, max_steps: usize) -> Result<(), Failure> {
    let kb_net = load_kb(kb)?;
    let store_net = match store {
        Some(p) => {
            let facts = parse_scenario(&read(p)?, &kb_net).map_err(in_file(p))?;
            ingest(&kb_net, &facts.scene, &mut Trace::new())?.0
        }
        None => kb_net.clone(),
    };
    let sc = parse_scenario(&read(template)?, &kb_net).map_err(in_file(template))?;
    let t = QueryTemplate::from_scene(&kb_net, &sc.scene)?;
    let out = query_reason(&t, &store_net, &kb_net, max_steps)?;
    println!("answers={} budget_exhausted={}", out.answers.len(), out.budget_exhausted);
    for a in &out.answers {
        let binding: Vec<String> = a.binding.iter().map(|(v, e)| format!("{v}={e}")).collect();
        let why: Vec<&str> = a.explanation.iter().map(ElementId::as_str).collect();
        println!("{} via [{}]", binding.join(" "), why.join(", "));
    }
    Ok(())
}

fn learn(kb: &Path, scenes: &Path, out: &Path) -> Result<(), Failure> {
    let mut kb_net = load_kb(kb)?;
    let mut files: Vec<PathBuf> = fs::read_dir(scenes)
        .map_err(|e| Failure::Input(format!("{}: {e}", scenes.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .collect();
    files.sort();
    let mut config = LearnConfig::default();
    let mut batch = Vec::new();
    for f in &files {
        let sc = parse_open_scenario(&read(f)?).map_err(in_file(f))?;
        config.engine = sc.config;
        batch.push(sc.scene);
    }
    let report = cnl_run(&mut kb_net, &batch, &Priors::default(), &config)?;
    write(out, serialize_kb(&kb_net).as_bytes())?;
    println!(
        "scenes={} skipped={} created={} extended={} discarded={} merged={}",
        report.scenes,
        report.skipped,
        report.created.len(),
        report.extended.len(),
        report.discarded.len(),
        report.merge.merged.len()
    );
    for e in &report.estimates {
        println!("{} forward={} backward={}", e.relation, format_real(e.forward, 9), format_real(e.backward, 9));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { kb } => validate(kb),
        Command::Fit { kb, scenario, trace, session, steps } => {
            fit(kb, scenario, trace.as_deref(), session.as_deref(), *steps)
        }
        Command::Match { kb, fragment, base } => do_match(kb, fragment, base),
        Command::Query { kb, template, store, max_steps } => query(kb, template, store.as_deref(), *max_steps),
        Command::Learn { kb, scenes, out } => learn(kb, scenes, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expectation(fails)) => {
            for f in fails {
                eprintln!("expectation failed: {f}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
