//! Command-line front end.
//!
//! `povm-label <command> <input.json> [options]`. Outcome and effect indices
//! are 1-based on the command line and in every report. Exit status is 0 for
//! a completed analysis (an "infeasible" verdict included), 1 for invalid
//! input and 2 for an internal numerical failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value};

use crate::io::{self, sig6, IoError};
use crate::labeling::{
    antilabel, min_error_binary, partial_min_error, perfect_binary, sequential_plan, unambiguous_binary,
    DecisionRule, LabelingError, LabelingReport, ProbeState, Tolerances,
};
use crate::linalg::{eig_hermitian, Vector, DEFAULT_RANK_TOL};
use crate::oracle::{oracle_search, sample_probes, ProbeCandidateSet, DEFAULT_RANDOM_PROBES};
use crate::povm::{multiplicity_classes, Observable, Permutation, DEFAULT_TOL};
use crate::simulate::{simulate_labeling, verify_report, SimulationResult, Verification, VerifyStatus};

pub const TOOL_NAME: &str = "povm-label";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check that the file describes a valid observable.
    Validate,
    /// Single-shot perfect labeling of a binary observable.
    Perfect,
    /// Minimum-error labeling of a binary observable.
    MinError,
    /// Per-class partial labeling and the best single-effect guess.
    Partial,
    /// Unambiguous labeling of a binary observable.
    Unambiguous,
    /// Exclude one effect from the recorded outcome (needs --effect).
    Antilabel,
    /// Multi-use sequential labeling plan.
    Plan,
    /// Brute-force probe search against the analytic binary value.
    Oracle,
    /// Monte Carlo run against one hidden labeling (needs --permutation).
    Simulate,
    /// Monte Carlo check of the analytic answer over all hidden labelings.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Perfect => "perfect",
            Command::MinError => "min-error",
            Command::Partial => "partial",
            Command::Unambiguous => "unambiguous",
            Command::Antilabel => "antilabel",
            Command::Plan => "plan",
            Command::Oracle => "oracle",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = TOOL_NAME, version, about = "Labeling analysis for quantum observables")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// POVM file in JSON.
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Effect index, 1-based.
    #[arg(long)]
    pub effect: Option<usize>,
    /// Random probes for the oracle.
    #[arg(long, default_value_t = DEFAULT_RANDOM_PROBES)]
    pub samples: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden labeling as 1-based outcome positions, e.g. 2,1.
    #[arg(long, value_delimiter = ',')]
    pub permutation: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input: input.into(),
            tol: DEFAULT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            effect: None,
            samples: DEFAULT_RANDOM_PROBES,
            trials: 100_000,
            seed: 0,
            permutation: None,
            format: Format::Text,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { tol: self.tol, rank_tol: self.rank_tol }
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<LabelingError> for Failure {
    fn from(e: LabelingError) -> Self {
        match e {
            LabelingError::WrongArity { .. } | LabelingError::IndexOutOfRange { .. } => Failure::Input(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// One finished analysis: the command-specific JSON body and its text form.
struct Output {
    body: Map<String, Value>,
    text: String,
    code: i32,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(config) => run(&config, out, err),
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(rendered.as_bytes());
                0
            } else {
                let _ = err.write_all(rendered.as_bytes());
                1
            }
        }
    }
}

pub fn run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(config) {
        Ok(output) => {
            let rendered = match config.format {
                Format::Text => output.text,
                Format::Json => {
                    let mut doc = envelope(config);
                    doc.extend(output.body);
                    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("reports serialize");
                    s.push('\n');
                    s
                }
            };
            let _ = out.write_all(rendered.as_bytes());
            output.code
        }
        Err(f) => {
            let _ = writeln!(err, "{TOOL_NAME}: {}", f.message());
            f.code()
        }
    }
}

fn envelope(config: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!(TOOL_NAME));
    m.insert("version".into(), json!(TOOL_VERSION));
    m.insert("command".into(), json!(config.command.name()));
    m.insert("input".into(), json!(config.input.display().to_string()));
    m.insert("tolerances".into(), json!({"tol": config.tol, "rank_tol": config.rank_tol}));
    m.insert("seed".into(), json!(config.seed));
    m
}

fn dispatch(config: &RunConfig) -> Result<Output, Failure> {
    for (name, v) in [("--tol", config.tol), ("--rank-tol", config.rank_tol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Failure::Input(format!("{name} must be a positive number, got {v}")));
        }
    }
    let obs = io::parse_povm(&config.input, config.tol)?;
    let tols = config.tolerances();
    match config.command {
        Command::Validate => Ok(validate(&obs, config.tol)),
        Command::Perfect => Ok(report(&obs, perfect_binary(&obs, &tols)?)),
        Command::MinError => Ok(report(&obs, min_error_binary(&obs, &tols)?)),
        Command::Partial => Ok(report(&obs, partial_min_error(&obs, &tols)?)),
        Command::Unambiguous => Ok(report(&obs, unambiguous_binary(&obs, &tols)?)),
        Command::Antilabel => {
            let j = effect_index(config, &obs)?
                .ok_or_else(|| Failure::Input("antilabel requires --effect J".into()))?;
            Ok(report(&obs, antilabel(&obs, j, &tols)?))
        }
        Command::Plan => Ok(report(&obs, sequential_plan(&obs, &tols)?)),
        Command::Oracle => oracle(&obs, config),
        Command::Simulate => simulate(&obs, config),
        Command::Verify => verify(&obs, config),
    }
}

fn effect_index(config: &RunConfig, obs: &Observable) -> Result<Option<usize>, Failure> {
    match config.effect {
        None => Ok(None),
        Some(j) if (1..=obs.num_outcomes()).contains(&j) => Ok(Some(j - 1)),
        Some(j) => Err(Failure::Input(format!(
            "--effect {j} out of range: the observable has effects 1..={}",
            obs.num_outcomes()
        ))),
    }
}

/// The strategy simulated by `simulate` and `verify`.
fn strategy_report(obs: &Observable, config: &RunConfig) -> Result<LabelingReport, Failure> {
    let tols = config.tolerances();
    Ok(match effect_index(config, obs)? {
        Some(j) => antilabel(obs, j, &tols)?,
        None if obs.is_binary() => min_error_binary(obs, &tols)?,
        None => partial_min_error(obs, &tols)?,
    })
}

fn validate(obs: &Observable, tol: f64) -> Output {
    let classes = multiplicity_classes(obs, tol);
    let spectra: Vec<Vec<f64>> = obs.effects().iter().map(|m| eig_hermitian(m).eigenvalues).collect();
    let mut text = format!("valid observable: dimension {}, {} outcomes\n", obs.dim(), obs.num_outcomes());
    for (k, label) in obs.labels().iter().enumerate() {
        let _ = writeln!(text, "  effect {} ({label}): eigenvalues {}", k + 1, list(&spectra[k]));
    }
    let _ = writeln!(text, "  classes of equal effects: {}", classes_text(&classes));
    let body = json!({
        "valid": true,
        "dimension": obs.dim(),
        "outcomes": obs.num_outcomes(),
        "labels": obs.labels(),
        "eigenvalues": spectra,
        "classes": classes.iter().map(|c| c.iter().map(|k| k + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Output { body: object(body), text, code: 0 }
}

fn report(obs: &Observable, r: LabelingReport) -> Output {
    let text = report_text(obs, &r);
    let mut body = Map::new();
    body.insert("report".into(), io::report_json(&r));
    Output { body, text, code: 0 }
}

fn oracle(obs: &Observable, config: &RunConfig) -> Result<Output, Failure> {
    if !obs.is_binary() {
        return Err(Failure::Input(format!(
            "oracle compares the binary minimum-error value; the observable has {} outcomes",
            obs.num_outcomes()
        )));
    }
    let r = min_error_binary(obs, &config.tolerances())?;
    let analytic = r.p_error.ok_or_else(|| Failure::Numerical("minimum-error report without p_error".into()))?;
    let (m1, m2) = (obs.effect(0), obs.effect(1));
    let numerical = |e: crate::oracle::OracleError| Failure::Numerical(e.to_string());
    let augmented = ProbeCandidateSet::eigenvector_augmented(m1, m2, config.samples, config.seed).map_err(numerical)?;
    let (aug_value, aug_index) = oracle_search(m1, m2, &augmented).map_err(numerical)?;
    let random = sample_probes(obs.dim(), config.samples.max(1), config.seed);
    let (random_value, _) = oracle_search(m1, m2, &random).map_err(numerical)?;
    let gap = (analytic - aug_value).abs();
    let agrees = gap <= config.tol;

    let mut text = String::new();
    let _ = writeln!(text, "analytic minimum error: {}", sig6(analytic));
    let _ = writeln!(
        text,
        "oracle, eigenvectors + {} random probes: {} (gap {})",
        config.samples,
        sig6(aug_value),
        sig6(gap)
    );
    let _ = writeln!(text, "oracle, {} random probes only: {}", config.samples.max(1), sig6(random_value));
    let _ = writeln!(text, "best probe: {}", vector_text(&augmented.states[aug_index]));
    let _ = writeln!(text, "{}", if agrees { "agreement: yes" } else { "agreement: NO" });
    text.push_str("scope: pure probes without an ancilla, deterministic decisions\n");

    let body = json!({
        "oracle": {
            "analytic_p_error": analytic,
            "augmented_p_error": aug_value,
            "random_only_p_error": random_value,
            "gap": gap,
            "agrees": agrees,
            "samples": config.samples,
            "candidates": augmented.states.len(),
            "best_probe": io::vector_json(&augmented.states[aug_index]),
            "scope": "pure probes without an ancilla",
        }
    });
    Ok(Output { body: object(body), text, code: if agrees { 0 } else { 2 } })
}

fn simulate(obs: &Observable, config: &RunConfig) -> Result<Output, Failure> {
    let images = config
        .permutation
        .as_ref()
        .ok_or_else(|| Failure::Input("simulate requires --permutation i1,i2,...".into()))?;
    let hidden = Permutation::from_one_based(images).map_err(|e| Failure::Input(e.to_string()))?;
    if hidden.len() != obs.num_outcomes() {
        return Err(Failure::Input(format!(
            "--permutation has {} entries for {} outcomes",
            hidden.len(),
            obs.num_outcomes()
        )));
    }
    let r = strategy_report(obs, config)?;
    let (probe, rule) = strategy_of(obs, &r);
    let sim = simulate_labeling(obs, &hidden, &probe, &rule, config.trials, config.seed, config.tol)
        .map_err(|e| Failure::Numerical(e.to_string()))?;

    let mut text = format!("hidden labeling: {hidden}\nstrategy: {}\n", r.mode);
    let _ = writeln!(text, "probe: {}", probe_text(&probe));
    let _ = writeln!(text, "decision rule: {}", rule_text(obs, &rule));
    text.push_str(&simulation_text(&sim));
    let body = json!({
        "permutation": hidden.as_slice().iter().map(|k| k + 1).collect::<Vec<_>>(),
        "strategy": r.mode.as_str(),
        "probe": io::probe_json(&probe),
        "decision_rule": io::rule_json(&rule),
        "simulation": io::simulation_json(&sim),
    });
    Ok(Output { body: object(body), text, code: 0 })
}

fn verify(obs: &Observable, config: &RunConfig) -> Result<Output, Failure> {
    let r = strategy_report(obs, config)?;
    let v = verify_report(obs, &r, config.trials, config.seed);
    let text = format!("strategy: {}\n{}", r.mode, verification_text(&v));
    let body = json!({"strategy": r.mode.as_str(), "report": io::report_json(&r), "verification": io::verification_json(&v)});
    // a failed statistical check means the analytic answer is suspect
    let code = if v.status == VerifyStatus::Fail { 2 } else { 0 };
    Ok(Output { body: object(body), text, code })
}

fn strategy_of(obs: &Observable, r: &LabelingReport) -> (ProbeState, DecisionRule) {
    match (&r.probe, &r.decision_rule) {
        (Some(p), Some(d)) => (p.clone(), d.clone()),
        // nothing to learn: any probe, always name the first effect
        _ => (
            ProbeState::Pure(crate::linalg::basis_vector(obs.dim(), 0)),
            DecisionRule::always(0, obs.num_outcomes()),
        ),
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

fn complex_text(z: num_complex::Complex64) -> String {
    let scale = z.norm().max(1.0) * 1e-12;
    match (z.re.abs() > scale, z.im.abs() > scale) {
        (_, false) => sig6(z.re),
        (false, true) => format!("{}i", sig6(z.im)),
        (true, true) => {
            let sign = if z.im < 0.0 { '-' } else { '+' };
            format!("{}{sign}{}i", sig6(z.re), sig6(z.im.abs()))
        }
    }
}

fn vector_text(v: &Vector) -> String {
    format!("[{}]", v.iter().map(|z| complex_text(*z)).collect::<Vec<_>>().join(", "))
}

fn list(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|x| sig6(*x)).collect::<Vec<_>>().join(", "))
}

fn classes_text(classes: &[Vec<usize>]) -> String {
    classes
        .iter()
        .map(|c| format!("{{{}}}", c.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(",")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn probe_text(p: &ProbeState) -> String {
    match p {
        ProbeState::Pure(v) => format!("pure state {}", vector_text(v)),
        ProbeState::Mixed(rho) => format!("mixed state with spectrum {}", list(&eig_hermitian(rho).eigenvalues)),
    }
}

fn effect_name(obs: &Observable, k: usize) -> String {
    format!("effect {} ({})", k + 1, obs.labels()[k])
}

fn rule_text(obs: &Observable, rule: &DecisionRule) -> String {
    match rule {
        DecisionRule::Assign(a) => a
            .iter()
            .enumerate()
            .map(|(pos, e)| match e {
                Some(k) => format!("outcome {} recorded -> it carries {}", pos + 1, effect_name(obs, *k)),
                None => format!("outcome {} recorded -> inconclusive", pos + 1),
            })
            .collect::<Vec<_>>()
            .join("; "),
        DecisionRule::Exclude(ex) => format!(
            "the recorded outcome does not carry {}",
            ex.iter().map(|k| effect_name(obs, *k)).collect::<Vec<_>>().join(" or ")
        ),
        DecisionRule::UniformGuess => "guess an effect uniformly at random".into(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "n/a".into())
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn report_text(obs: &Observable, r: &LabelingReport) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "mode: {}", r.mode);
    let _ = writeln!(t, "verdict: {}", r.verdict);
    let _ = writeln!(t, "feasible: {}, trivial: {}", yes(r.feasible), yes(r.trivial));
    let _ = writeln!(t, "p_error: {}, p_failure: {}", opt(r.p_error), opt(r.p_failure));
    if let Some(p) = &r.probe {
        let _ = writeln!(t, "probe: {}", probe_text(p));
    }
    if let Some(d) = &r.decision_rule {
        let _ = writeln!(t, "decision rule: {}", rule_text(obs, d));
    }
    if !r.excluded_effects.is_empty() {
        let names: Vec<_> = r.excluded_effects.iter().map(|k| effect_name(obs, *k)).collect();
        let _ = writeln!(t, "excluded: {}", names.join(", "));
    }
    for c in &r.classes {
        let members: Vec<_> = c.members.iter().map(|k| (k + 1).to_string()).collect();
        let _ = write!(
            t,
            "class {{{}}}: multiplicity {}, lambda_max {}, feasible {}",
            members.join(","),
            c.multiplicity,
            sig6(c.lambda_max),
            yes(c.feasible)
        );
        if let Some(l) = c.leakage {
            let _ = write!(t, ", leakage {}", sig6(l));
        }
        t.push('\n');
    }
    if let Some(b) = r.min_uses_bound {
        let _ = writeln!(t, "minimum uses: {b}");
    }
    if let Some(n) = r.fully_labelable_in {
        let _ = writeln!(t, "fully labelable in: {n} use(s)");
    }
    for (i, s) in r.plan.iter().enumerate() {
        let _ = writeln!(t, "use {}: probe {} labels {}", i + 1, vector_text(&s.probe), effect_name(obs, s.effect));
    }
    if let Some(tester) = &r.tester {
        let _ = writeln!(
            t,
            "tester: {} elements{}",
            tester.elements().len(),
            tester.inconclusive().map(|i| format!(", element {} inconclusive", i + 1)).unwrap_or_default()
        );
    }
    for c in &r.checks {
        let _ = writeln!(
            t,
            "check {}: residual {} (tolerance {}) {}",
            c.name,
            sig6(c.residual),
            sig6(c.tolerance),
            if c.passed() { "ok" } else { "FAILED" }
        );
    }
    for n in &r.notes {
        let _ = writeln!(t, "note: {n}");
    }
    t
}

fn simulation_text(s: &SimulationResult) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "trials: {} (seed {}, {})", s.trials, s.seed, s.rng_algorithm);
    let _ = writeln!(t, "errors: {} (rate {} +/- {})", s.errors, sig6(s.empirical_error_rate), sig6(s.std_error));
    let _ = writeln!(
        t,
        "failures: {} (rate {} +/- {})",
        s.failures,
        sig6(s.empirical_failure_rate),
        sig6(s.failure_std_error)
    );
    let _ = writeln!(t, "outcome counts: {:?}", s.outcome_counts);
    let _ = writeln!(t, "recorded effect counts: {:?}", s.effect_counts);
    t
}

fn verification_text(v: &Verification) -> String {
    let mut t = String::new();
    let status = match v.status {
        VerifyStatus::Pass => "PASS",
        VerifyStatus::Fail => "FAIL",
        VerifyStatus::NotApplicable => "not applicable",
    };
    let _ = writeln!(t, "verification: {status}");
    if v.status != VerifyStatus::NotApplicable {
        let _ = writeln!(t, "hidden labelings: {}, trials: {} (seed {})", v.hypotheses, v.trials, v.seed);
        let _ = writeln!(
            t,
            "error rate: expected {}, observed {} +/- {}",
            sig6(v.expected_error),
            sig6(v.empirical_error),
            sig6(v.std_error)
        );
        let _ = writeln!(
            t,
            "failure rate: expected {}, observed {} +/- {}",
            sig6(v.expected_failure),
            sig6(v.empirical_failure),
            sig6(v.failure_std_error)
        );
    }
    for n in &v.notes {
        let _ = writeln!(t, "note: {n}");
    }
    t
}
