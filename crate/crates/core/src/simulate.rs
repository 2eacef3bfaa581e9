//! Seeded Monte Carlo simulation of the single-shot labeling experiment.
//!
//! Randomness comes from ChaCha8 keyed by the user seed. Each hidden
//! labeling gets its own stream, and trial `t` of a stream always reads
//! words `[4t, 4t + 4)`, so results do not depend on how trials are split
//! across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::labeling::{DecisionRule, LabelingReport, ProbeState};
use crate::linalg::basis_vector;
use crate::povm::{class_of_each, permute, Observable, Permutation, PovmError};

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), stream per hidden labeling, 4 words per trial";
/// Statistical acceptance width, in standard errors.
pub const ACCEPT_SIGMAS: f64 = 4.0;

const WORDS_PER_TRIAL: u128 = 4;
const CHUNK: u64 = 8192;
const MAX_HYPOTHESES: usize = 40_320;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Povm(#[from] PovmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub trials: u64,
    pub errors: u64,
    pub failures: u64,
    pub empirical_error_rate: f64,
    pub empirical_failure_rate: f64,
    /// `sqrt(p̂(1 - p̂)/trials)` for the error rate.
    pub std_error: f64,
    pub failure_std_error: f64,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    /// How often each outcome position was recorded.
    pub outcome_counts: Vec<u64>,
    /// How often the recorded outcome carried each effect.
    pub effect_counts: Vec<u64>,
}

fn std_err(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Default, Clone)]
struct Tally {
    errors: u64,
    failures: u64,
    outcomes: Vec<u64>,
    effects: Vec<u64>,
}

impl Tally {
    fn zeros(n: usize) -> Self {
        Self { errors: 0, failures: 0, outcomes: vec![0; n], effects: vec![0; n] }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.errors += other.errors;
        self.failures += other.failures;
        for (a, b) in self.outcomes.iter_mut().zip(other.outcomes) {
            *a += b;
        }
        for (a, b) in self.effects.iter_mut().zip(other.effects) {
            *a += b;
        }
        self
    }
}

fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn validate_rule(rule: &DecisionRule, n: usize) -> Result<(), SimError> {
    match rule {
        DecisionRule::Assign(a) => {
            if a.len() != n {
                return Err(SimError::InvalidModel(format!("rule covers {} positions, observable has {n}", a.len())));
            }
            if let Some(e) = a.iter().flatten().find(|&&e| e >= n) {
                return Err(SimError::InvalidModel(format!("rule assigns effect {} of {n}", e + 1)));
            }
        }
        DecisionRule::Exclude(ex) => {
            if let Some(e) = ex.iter().find(|&&e| e >= n) {
                return Err(SimError::InvalidModel(format!("rule excludes effect {} of {n}", e + 1)));
            }
        }
        DecisionRule::UniformGuess => {}
    }
    Ok(())
}

/// Runs `trials` single-shot experiments on the device whose labeling is
/// `hidden`, applying `rule` to each recorded outcome.
pub fn simulate_labeling(
    obs: &Observable,
    hidden: &Permutation,
    probe: &ProbeState,
    rule: &DecisionRule,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<SimulationResult, SimError> {
    simulate_stream(obs, hidden, probe, rule, trials, seed, 0, tol)
}

#[allow(clippy::too_many_arguments)]
fn simulate_stream(
    obs: &Observable,
    hidden: &Permutation,
    probe: &ProbeState,
    rule: &DecisionRule,
    trials: u64,
    seed: u64,
    stream: u64,
    tol: f64,
) -> Result<SimulationResult, SimError> {
    let n = obs.num_outcomes();
    if trials == 0 {
        return Err(SimError::InvalidModel("at least one trial is required".into()));
    }
    if probe.dim() != obs.dim() {
        return Err(SimError::InvalidModel(format!(
            "probe has dimension {}, observable {}",
            probe.dim(),
            obs.dim()
        )));
    }
    validate_rule(rule, n)?;
    let device = permute(obs, hidden)?;
    let probs: Vec<f64> = device.effects().iter().map(|m| probe.expectation(m).max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(SimError::InvalidModel(format!("outcome probabilities sum to {total}")));
    }
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for p in &probs {
        acc += p / total;
        cdf.push(acc);
    }
    let last_possible = (0..n).rev().find(|&k| probs[k] > 0.0).expect("probabilities sum to one");
    let true_effect = hidden.inverse();
    let class = class_of_each(obs, tol);

    let chunks = trials.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(trials);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng.set_word_pos(start as u128 * WORDS_PER_TRIAL);
            let mut t = Tally::zeros(n);
            for _ in start..end {
                let u = unit_f64(rng.next_u64());
                let guess_word = rng.next_u64();
                let k = cdf.iter().position(|&c| u < c).unwrap_or(last_possible);
                let effect = true_effect.apply(k);
                t.outcomes[k] += 1;
                t.effects[effect] += 1;
                let wrong = |assigned: usize| class[assigned] != class[effect];
                match rule {
                    DecisionRule::Assign(a) => match a[k] {
                        None => t.failures += 1,
                        Some(e) if wrong(e) => t.errors += 1,
                        Some(_) => {}
                    },
                    DecisionRule::Exclude(ex) => {
                        if ex.iter().any(|&e| !wrong(e)) {
                            t.errors += 1;
                        }
                    }
                    DecisionRule::UniformGuess => {
                        let e = ((guess_word as u128 * n as u128) >> 64) as usize;
                        if wrong(e) {
                            t.errors += 1;
                        }
                    }
                }
            }
            t
        })
        .reduce(|| Tally::zeros(n), Tally::merge);

    let err = tally.errors as f64 / trials as f64;
    let fail = tally.failures as f64 / trials as f64;
    Ok(SimulationResult {
        trials,
        errors: tally.errors,
        failures: tally.failures,
        empirical_error_rate: err,
        empirical_failure_rate: fail,
        std_error: std_err(err, trials),
        failure_std_error: std_err(fail, trials),
        seed,
        rng_algorithm: RNG_ALGORITHM,
        outcome_counts: tally.outcomes,
        effect_counts: tally.effects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub status: VerifyStatus,
    pub hypotheses: usize,
    pub trials: u64,
    pub expected_error: f64,
    pub expected_failure: f64,
    pub empirical_error: f64,
    pub empirical_failure: f64,
    pub std_error: f64,
    pub failure_std_error: f64,
    /// `|empirical - expected|` for the error rate.
    pub error_margin: f64,
    pub failure_margin: f64,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.status == VerifyStatus::Pass
    }

    fn not_applicable(seed: u64, note: impl Into<String>) -> Self {
        Self {
            status: VerifyStatus::NotApplicable,
            hypotheses: 0,
            trials: 0,
            expected_error: f64::NAN,
            expected_failure: f64::NAN,
            empirical_error: f64::NAN,
            empirical_failure: f64::NAN,
            std_error: f64::NAN,
            failure_std_error: f64::NAN,
            error_margin: f64::NAN,
            failure_margin: f64::NAN,
            seed,
            notes: vec![note.into()],
        }
    }
}

/// Simulates one strategy against every hidden labeling with equal weight.
fn average_over_labelings(
    obs: &Observable,
    probe: &ProbeState,
    rule: &DecisionRule,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<(u64, u64, u64, usize), SimError> {
    let perms = Permutation::all(obs.num_outcomes());
    let per = trials.div_ceil(perms.len() as u64).max(1);
    let mut errors = 0;
    let mut failures = 0;
    for (i, sigma) in perms.iter().enumerate() {
        let r = simulate_stream(obs, sigma, probe, rule, per, seed, i as u64, tol)?;
        errors += r.errors;
        failures += r.failures;
    }
    Ok((errors, failures, per * perms.len() as u64, perms.len()))
}

/// Checks a report against simulation under the uniform prior on labelings.
/// Passes iff the empirical error and failure rates both lie within
/// [`ACCEPT_SIGMAS`] standard errors of the reported values.
pub fn verify_report(obs: &Observable, report: &LabelingReport, trials: u64, seed: u64) -> Verification {
    let tol = report.tolerances.tol;
    let n = obs.num_outcomes();
    if (1..=n).product::<usize>() > MAX_HYPOTHESES {
        return Verification::not_applicable(seed, format!("{n}! hidden labelings is too many to enumerate"));
    }
    let (Some(expected_error), Some(expected_failure)) = (report.p_error, report.p_failure) else {
        return Verification::not_applicable(seed, "report carries no strategy to simulate");
    };

    // strategies to run, each expected to reach the report's rates
    let mut strategies: Vec<(ProbeState, DecisionRule)> = Vec::new();
    if !report.plan.is_empty() {
        for step in &report.plan {
            strategies.push((ProbeState::Pure(step.probe.clone()), DecisionRule::always(step.effect, n)));
        }
    } else if let (Some(p), Some(r)) = (&report.probe, &report.decision_rule) {
        strategies.push((p.clone(), r.clone()));
    } else if report.trivial {
        strategies.push((ProbeState::Pure(basis_vector(obs.dim(), 0)), DecisionRule::always(0, n)));
    } else {
        return Verification::not_applicable(seed, "report carries no probe and decision rule");
    }

    let mut errors = 0;
    let mut failures = 0;
    let mut total = 0;
    let mut hypotheses = 0;
    for (i, (probe, rule)) in strategies.iter().enumerate() {
        // distinct seeds per plan step keep the steps independent
        let step_seed = seed.wrapping_add(i as u64);
        match average_over_labelings(obs, probe, rule, trials, step_seed, tol) {
            Ok((e, f, t, h)) => {
                errors += e;
                failures += f;
                total += t;
                hypotheses = h;
            }
            Err(err) => return Verification::not_applicable(seed, format!("simulation rejected the strategy: {err}")),
        }
    }
    let empirical_error = errors as f64 / total as f64;
    let empirical_failure = failures as f64 / total as f64;
    let std_error = std_err(empirical_error, total);
    let failure_std_error = std_err(empirical_failure, total);
    let error_margin = (empirical_error - expected_error).abs();
    let failure_margin = (empirical_failure - expected_failure).abs();
    let ok = error_margin <= ACCEPT_SIGMAS * std_error && failure_margin <= ACCEPT_SIGMAS * failure_std_error;
    let mut notes = Vec::new();
    if strategies.len() > 1 {
        notes.push(format!("{} plan steps simulated, each over every hidden labeling", strategies.len()));
    }
    Verification {
        status: if ok { VerifyStatus::Pass } else { VerifyStatus::Fail },
        hypotheses,
        trials: total,
        expected_error,
        expected_failure,
        empirical_error,
        empirical_failure,
        std_error,
        failure_std_error,
        error_margin,
        failure_margin,
        seed,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{min_error_binary, perfect_binary, Tolerances};
    use crate::linalg::{diag, Vector};
    use crate::povm::DEFAULT_TOL;

    fn obs(effects: Vec<crate::linalg::Matrix>) -> Observable {
        Observable::with_default_labels(effects, DEFAULT_TOL).unwrap()
    }

    fn intro() -> Observable {
        obs(vec![diag(&[0.7, 0.0]), diag(&[0.3, 1.0])])
    }

    fn full_rank() -> Observable {
        obs(vec![diag(&[0.8, 0.4]), diag(&[0.2, 0.6])])
    }

    fn e(d: usize, k: usize) -> ProbeState {
        ProbeState::Pure(basis_vector(d, k))
    }

    #[test]
    fn perfect_strategy_never_errs() {
        let r = simulate_labeling(
            &intro(),
            &Permutation::swap(2),
            &e(2, 1),
            &DecisionRule::always(1, 2),
            100_000,
            11,
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(r.errors, 0);
        assert_eq!(r.empirical_error_rate, 0.0);
        // swapped device: position 0 carries G, which always fires on |g⟩
        assert_eq!(r.outcome_counts, vec![100_000, 0]);
        assert_eq!(r.effect_counts, vec![0, 100_000]);
    }

    #[test]
    fn optimal_strategy_hits_expected_error() {
        let o = full_rank();
        let rep = min_error_binary(&o, &Tolerances::default()).unwrap();
        let (p, rule) = (rep.probe.unwrap(), rep.decision_rule.unwrap());
        let mut errors = 0;
        for (i, sigma) in Permutation::all(2).iter().enumerate() {
            let r = simulate_labeling(&o, sigma, &p, &rule, 50_000, 100 + i as u64, DEFAULT_TOL).unwrap();
            errors += r.errors;
        }
        let rate = errors as f64 / 100_000.0;
        let se = std_err(rate, 100_000);
        assert!((rate - 0.2).abs() <= 3.0 * se, "rate {rate}");
    }

    #[test]
    fn uniform_guess_is_a_coin_flip() {
        let r = simulate_labeling(
            &full_rank(),
            &Permutation::identity(2),
            &e(2, 0),
            &DecisionRule::UniformGuess,
            100_000,
            3,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!((r.empirical_error_rate - 0.5).abs() <= 3.0 * r.std_error);
    }

    #[test]
    fn inconclusive_positions_count_as_failures() {
        let r = simulate_labeling(
            &full_rank(),
            &Permutation::identity(2),
            &e(2, 0),
            &DecisionRule::Assign(vec![None, None]),
            1000,
            0,
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(r.failures, 1000);
        assert_eq!(r.errors, 0);
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let run = |seed| {
            simulate_labeling(
                &full_rank(),
                &Permutation::swap(2),
                &e(2, 0),
                &DecisionRule::always(0, 2),
                30_000,
                seed,
                DEFAULT_TOL,
            )
            .unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).outcome_counts, run(6).outcome_counts);
    }

    #[test]
    fn trial_streams_do_not_depend_on_chunking() {
        // the first CHUNK trials of a longer run are the whole of a shorter run
        let sim = |trials| {
            simulate_labeling(
                &full_rank(),
                &Permutation::identity(2),
                &e(2, 0),
                &DecisionRule::always(0, 2),
                trials,
                77,
                DEFAULT_TOL,
            )
            .unwrap()
        };
        let short = sim(CHUNK);
        let long = sim(2 * CHUNK);
        let second_half = {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_word_pos(CHUNK as u128 * WORDS_PER_TRIAL);
            let mut recorded0 = 0;
            for _ in 0..CHUNK {
                let u = unit_f64(rng.next_u64());
                rng.next_u64();
                if u < 0.8 {
                    recorded0 += 1;
                }
            }
            recorded0
        };
        assert_eq!(long.outcome_counts[0], short.outcome_counts[0] + second_half);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let bad_probe = ProbeState::Pure(Vector::from_vec(vec![
            num_complex::Complex64::new(1.0, 0.0),
            num_complex::Complex64::new(1.0, 0.0),
        ]));
        let r = simulate_labeling(
            &full_rank(),
            &Permutation::identity(2),
            &bad_probe,
            &DecisionRule::always(0, 2),
            10,
            0,
            DEFAULT_TOL,
        );
        assert!(matches!(r, Err(SimError::InvalidModel(_))));
        let r = simulate_labeling(&full_rank(), &Permutation::identity(2), &e(2, 0), &DecisionRule::always(0, 3), 10, 0, DEFAULT_TOL);
        assert!(matches!(r, Err(SimError::InvalidModel(_))));
        let r = simulate_labeling(&full_rank(), &Permutation::identity(3), &e(2, 0), &DecisionRule::always(0, 2), 10, 0, DEFAULT_TOL);
        assert!(matches!(r, Err(SimError::Povm(_))));
    }

    #[test]
    fn verify_examples() {
        let tols = Tolerances::default();
        let perfect = perfect_binary(&intro(), &tols).unwrap();
        let v = verify_report(&intro(), &perfect, 100_000, 1);
        assert!(v.passed());
        assert_eq!(v.empirical_error, 0.0);

        let o = full_rank();
        let rep = min_error_binary(&o, &tols).unwrap();
        let v = verify_report(&o, &rep, 100_000, 2);
        assert!(v.passed(), "{v:?}");
        assert_eq!(v.hypotheses, 2);

        let mut corrupted = rep.clone();
        corrupted.p_error = Some(0.3);
        assert_eq!(verify_report(&o, &corrupted, 100_000, 2).status, VerifyStatus::Fail);

        let infeasible = perfect_binary(&o, &tols).unwrap();
        assert_eq!(verify_report(&o, &infeasible, 1000, 0).status, VerifyStatus::NotApplicable);
    }
}
