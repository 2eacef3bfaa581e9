//! Decision procedures for labeling the outcomes of an observable whose
//! effects are known but whose outcome-to-effect pairing is not.
//!
//! All procedures here are single-shot: the unlabeled device is used once
//! on a probe state and a verdict is drawn from the recorded outcome. The
//! only multi-use procedure is [`sequential_plan`], which chains single-shot
//! steps without adapting.

use std::fmt;

use thiserror::Error;

use crate::linalg::{
    eig_hermitian, kernel, max_abs_diff, projector, spectral_norm, HermitianOperator, LinalgError, Matrix,
    Vector, DEFAULT_RANK_TOL,
};
use crate::povm::{multiplicity_classes, Observable, Permutation, DEFAULT_TOL};
use crate::tester::{tester_from_blocks, MPTesterBlocks, Tester, TesterError};
use crate::io::sig6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelingError {
    #[error("expected a {expected}-outcome observable, got {got} outcomes")]
    WrongArity { expected: usize, got: usize },
    #[error("effect index {index} out of range for {n} effects")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tester(#[from] TesterError),
}

/// Tolerances carried by every report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Effect equality, eigenvalue comparisons and probability leakage.
    pub tol: f64,
    /// Relative eigenvalue threshold for rank deficiency.
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, rank_tol: DEFAULT_RANK_TOL }
    }
}

/// The state fed into the unlabeled device.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeState {
    Pure(Vector),
    Mixed(HermitianOperator),
}

impl ProbeState {
    pub fn dim(&self) -> usize {
        match self {
            ProbeState::Pure(v) => v.len(),
            ProbeState::Mixed(rho) => rho.dim(),
        }
    }

    pub fn density(&self) -> Matrix {
        match self {
            ProbeState::Pure(v) => projector(v),
            ProbeState::Mixed(rho) => rho.matrix().clone(),
        }
    }

    /// The tester normalization `ξ = ρ^T`.
    pub fn tester_normalization(&self) -> HermitianOperator {
        HermitianOperator::new(self.density().transpose()).expect("density operators are Hermitian")
    }

    /// `tr[ρ M]`
    pub fn expectation(&self, m: &HermitianOperator) -> f64 {
        match self {
            ProbeState::Pure(v) => m.expectation(v),
            ProbeState::Mixed(rho) => (rho.matrix() * m.matrix()).trace().re,
        }
    }
}

/// What to conclude about the recorded outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionRule {
    /// Indexed by recorded outcome position: the effect assigned to that
    /// outcome, or `None` for an inconclusive verdict.
    Assign(Vec<Option<usize>>),
    /// The recorded outcome carries none of these effects.
    Exclude(Vec<usize>),
    /// Assign an effect drawn uniformly at random.
    UniformGuess,
}

impl DecisionRule {
    /// Assigns `effect` to whichever outcome is recorded.
    pub fn always(effect: usize, n: usize) -> Self {
        DecisionRule::Assign(vec![Some(effect); n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Perfect,
    MinError,
    Partial,
    Unambiguous,
    Antilabel,
    Sequential,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Perfect => "perfect",
            Mode::MinError => "min_error",
            Mode::Partial => "partial",
            Mode::Unambiguous => "unambiguous",
            Mode::Antilabel => "antilabel",
            Mode::Sequential => "sequential",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-use labelability of one class of identical effects.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLabeling {
    pub members: Vec<usize>,
    pub multiplicity: usize,
    pub lambda_max: f64,
    pub feasible: bool,
    /// Top eigenvector of the class effect, present when feasible.
    pub probe: Option<Vector>,
    /// Probability of recording an outcome outside the class with `probe`.
    pub leakage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub probe: Vector,
    /// Outcome positions of the class whose member gets labeled in this use.
    pub class: Vec<usize>,
    pub effect: usize,
}

/// A named numerical cross-check performed while building a report.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl ConsistencyCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingReport {
    pub mode: Mode,
    pub feasible: bool,
    /// Every outcome carries the same effect, so there is nothing to learn.
    pub trivial: bool,
    pub verdict: String,
    pub p_error: Option<f64>,
    pub p_failure: Option<f64>,
    pub probe: Option<ProbeState>,
    pub decision_rule: Option<DecisionRule>,
    pub excluded_effects: Vec<usize>,
    pub classes: Vec<ClassLabeling>,
    pub plan: Vec<PlanStep>,
    pub min_uses_bound: Option<usize>,
    pub fully_labelable_in: Option<usize>,
    pub tester: Option<Tester>,
    pub checks: Vec<ConsistencyCheck>,
    pub tolerances: Tolerances,
    pub notes: Vec<String>,
}

impl LabelingReport {
    fn new(mode: Mode, tolerances: Tolerances) -> Self {
        Self {
            mode,
            feasible: false,
            trivial: false,
            verdict: String::new(),
            p_error: None,
            p_failure: None,
            probe: None,
            decision_rule: None,
            excluded_effects: Vec::new(),
            classes: Vec::new(),
            plan: Vec::new(),
            min_uses_bound: None,
            fully_labelable_in: None,
            tester: None,
            checks: Vec::new(),
            tolerances,
            notes: Vec::new(),
        }
    }

    fn trivial(mode: Mode, tolerances: Tolerances) -> Self {
        let mut r = Self::new(mode, tolerances);
        r.feasible = true;
        r.trivial = true;
        r.verdict = "trivially labeled: every outcome carries the same effect".into();
        r.p_error = Some(0.0);
        r.p_failure = Some(0.0);
        r
    }

    fn check(&mut self, name: &str, residual: f64, tolerance: f64) -> Result<(), LabelingError> {
        let c = ConsistencyCheck { name: name.into(), residual, tolerance };
        let ok = c.passed();
        self.checks.push(c);
        if ok {
            Ok(())
        } else {
            Err(LabelingError::Numerical(format!(
                "{name}: residual {residual:e} exceeds {tolerance:e}"
            )))
        }
    }
}

fn require_binary(obs: &Observable) -> Result<(), LabelingError> {
    if obs.is_binary() {
        Ok(())
    } else {
        Err(LabelingError::WrongArity { expected: 2, got: obs.num_outcomes() })
    }
}

fn effects_equal(obs: &Observable, a: usize, b: usize, tol: f64) -> bool {
    max_abs_diff(obs.effect(a).matrix(), obs.effect(b).matrix()) <= tol
}

/// Tester for telling apart the identity and swapped labelings of a binary
/// observable with a given probe and rule. Element 0 concludes "identity",
/// element 1 "swapped", and element 2 (when present) is inconclusive.
pub fn binary_tester(probe: &ProbeState, rule: &DecisionRule, tol: f64) -> Result<Tester, LabelingError> {
    let xi = probe.tester_normalization();
    let d = xi.dim();
    let zero = Matrix::zeros(d, d);
    let assignments: Vec<Option<usize>> = match rule {
        DecisionRule::Assign(a) if a.len() == 2 => a.clone(),
        // excluding effect e from the recorded outcome assigns it the other one
        DecisionRule::Exclude(ex) if ex.len() == 1 => vec![Some(1 - ex[0]); 2],
        _ => {
            return Err(LabelingError::Numerical(
                "binary tester needs a two-position assignment or a single exclusion".into(),
            ))
        }
    };
    // verdict for each recorded position k: identity iff the assigned effect is k
    let mut blocks = vec![vec![zero.clone(), zero.clone()], vec![zero.clone(), zero.clone()]];
    let mut inconclusive = vec![zero.clone(), zero];
    for (k, a) in assignments.iter().enumerate() {
        match a {
            Some(e) if *e == k => blocks[0][k] = xi.matrix().clone(),
            Some(_) => blocks[1][k] = xi.matrix().clone(),
            None => inconclusive[k] = xi.matrix().clone(),
        }
    }
    blocks.push(inconclusive);
    Ok(tester_from_blocks(&MPTesterBlocks { probe: xi, blocks, inconclusive: Some(2) }, tol)?)
}

/// Whether `M1^T ξ M2^T` vanishes (within `tol` in spectral norm), the
/// single-shot perfect-discrimination certificate for the two labelings.
pub fn perfect_condition(
    m1: &HermitianOperator,
    m2: &HermitianOperator,
    xi: &HermitianOperator,
    tol: f64,
) -> Result<bool, LabelingError> {
    if m1.dim() != m2.dim() || m1.dim() != xi.dim() {
        return Err(LinalgError::DimensionError(format!(
            "effects are {}x{} and {}x{}, probe is {}x{}",
            m1.dim(),
            m1.dim(),
            m2.dim(),
            m2.dim(),
            xi.dim(),
            xi.dim()
        ))
        .into());
    }
    let product = m1.matrix().transpose() * xi.matrix() * m2.matrix().transpose();
    Ok(spectral_norm(&product)? <= tol)
}

/// Perfect single-shot labeling of a binary observable. Succeeds exactly
/// when one of the two effects has a nontrivial kernel; the probe is taken
/// from that kernel and the recorded outcome gets the other effect.
pub fn perfect_binary(obs: &Observable, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    require_binary(obs)?;
    if effects_equal(obs, 0, 1, tols.tol) {
        return Ok(LabelingReport::trivial(Mode::Perfect, *tols));
    }
    let mut report = LabelingReport::new(Mode::Perfect, *tols);
    let found = (0..2).find_map(|owner| kernel(obs.effect(owner), tols.rank_tol).into_iter().next().map(|v| (owner, v)));
    let Some((owner, phi)) = found else {
        report.verdict = "not perfectly labelable: both effects have full rank".into();
        return Ok(report);
    };
    let other = 1 - owner;
    let probe = ProbeState::Pure(phi.clone());
    let rule = DecisionRule::always(other, 2);

    let residual = (obs.effect(owner).matrix() * &phi).norm();
    report.check("kernel residual |M_owner φ|", residual, 10.0 * tols.rank_tol.max(tols.tol))?;
    let xi = probe.tester_normalization();
    let cert = spectral_norm(&(obs.effect(0).matrix().transpose() * xi.matrix() * obs.effect(1).matrix().transpose()))?;
    report.check("perfect certificate |M1^T ξ M2^T|", cert, 10.0 * tols.rank_tol.max(tols.tol))?;

    report.feasible = true;
    report.verdict = format!(
        "perfectly labelable: probe lies in the kernel of effect {}, so the recorded outcome carries effect {}",
        owner + 1,
        other + 1
    );
    report.p_error = Some(0.0);
    report.p_failure = Some(0.0);
    report.tester = Some(binary_tester(&probe, &rule, tols.tol.max(1e-12))?);
    report.probe = Some(probe);
    report.decision_rule = Some(rule);
    report.excluded_effects = vec![owner];
    Ok(report)
}

/// Picks the eigenvalue `λ` of `M1` maximizing `|2λ - 1|`. Ties prefer the
/// one farthest above one half, then the lowest index.
fn pick_min_error_eigen(eigenvalues: &[f64], tol: f64) -> usize {
    let s = eigenvalues.iter().map(|l| (2.0 * l - 1.0).abs()).fold(0.0, f64::max);
    let tied: Vec<usize> = (0..eigenvalues.len()).filter(|&x| (2.0 * eigenvalues[x] - 1.0).abs() >= s - tol).collect();
    tied.iter()
        .copied()
        .find(|&x| eigenvalues[x] > 0.5)
        .unwrap_or(tied[0])
}

/// Minimum-error labeling of a binary observable:
/// `p_e = (1 - ‖M1 - M2‖) / 2`, attained by the eigenvector of `M1`
/// whose eigenvalue lies farthest from one half.
pub fn min_error_binary(obs: &Observable, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    require_binary(obs)?;
    if effects_equal(obs, 0, 1, tols.tol) {
        let mut r = LabelingReport::trivial(Mode::MinError, *tols);
        r.notes.push("effects coincide; the norm formula would give 1/2 but no labeling is needed".into());
        return Ok(r);
    }
    let mut report = LabelingReport::new(Mode::MinError, *tols);
    let (m1, m2) = (obs.effect(0), obs.effect(1));
    let s = spectral_norm(&(m1.matrix() - m2.matrix()))?;
    let p_error = 0.5 * (1.0 - s);

    let eig = eig_hermitian(m1);
    let x = pick_min_error_eigen(&eig.eigenvalues, tols.tol);
    let lambda = eig.eigenvalues[x];
    let omega = eig.eigenvectors[x].clone();
    let assigned = if lambda > 0.5 { 0 } else { 1 };

    let s_eig = eig.eigenvalues.iter().map(|l| (2.0 * l - 1.0).abs()).fold(0.0, f64::max);
    report.check("norm vs extreme eigenvalues of M1", (s - s_eig).abs(), 1e-9)?;
    // error with this probe is the probability of the effect not assigned
    let probe_error = obs.effect(1 - assigned).expectation(&omega);
    report.check("p_e vs min(λ, 1-λ) on the probe", (p_error - probe_error).abs(), 1e-9)?;
    report.check("p_e vs min(λ, 1-λ) from the spectrum", (p_error - lambda.min(1.0 - lambda)).abs(), 1e-9)?;

    let probe = ProbeState::Pure(omega);
    let rule = DecisionRule::always(assigned, 2);
    report.feasible = true;
    report.verdict = format!(
        "minimum error {}: probe the eigenvector of effect 1 with eigenvalue {} and assign effect {} to the recorded outcome",
        sig6(p_error),
        sig6(lambda),
        assigned + 1
    );
    report.p_error = Some(p_error);
    report.p_failure = Some(0.0);
    report.tester = Some(binary_tester(&probe, &rule, tols.tol.max(1e-12))?);
    report.probe = Some(probe);
    report.decision_rule = Some(rule);
    Ok(report)
}

/// Single-use partial labelability of every class of identical effects.
/// A class of `m` copies of `E` is labelable iff `λ_max(E) = 1/m`.
pub fn partial_label(obs: &Observable, tol: f64) -> Vec<ClassLabeling> {
    let classes = multiplicity_classes(obs, tol);
    classes
        .into_iter()
        .map(|members| {
            let m = members.len();
            let eig = eig_hermitian(obs.effect(members[0]));
            let lambda_max = eig.max();
            let feasible = (lambda_max - 1.0 / m as f64).abs() <= tol;
            let (probe, leakage) = if feasible {
                let v = eig.eigenvectors[eig.len() - 1].clone();
                let leak: f64 = (0..obs.num_outcomes())
                    .filter(|k| !members.contains(k))
                    .map(|k| obs.effect(k).expectation(&v))
                    .sum();
                (Some(v), Some(leak))
            } else {
                (None, None)
            };
            ClassLabeling { members, multiplicity: m, lambda_max, feasible, probe, leakage }
        })
        .collect()
}

/// Minimum-error label for the recorded outcome of a single use.
///
/// Outcomes sharing an effect are interchangeable, so the figure of merit is
/// the largest eigenvalue of the summed class effect; for distinct effects
/// this is `p_e = 1 - max_j λ_max(M_j)`.
pub fn partial_min_error(obs: &Observable, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    let classes = multiplicity_classes(obs, tols.tol);
    if classes.len() == 1 {
        let mut r = LabelingReport::trivial(Mode::Partial, *tols);
        r.classes = partial_label(obs, tols.tol);
        return Ok(r);
    }
    let d = obs.dim();
    let mut best: Option<(usize, f64, Vector)> = None;
    for (id, members) in classes.iter().enumerate() {
        let total = members.iter().fold(Matrix::zeros(d, d), |acc, &k| acc + obs.effect(k).matrix());
        let eig = eig_hermitian(&HermitianOperator::new(total)?);
        let top = eig.max();
        if best.as_ref().is_none_or(|(_, b, _)| top > b + tols.tol) {
            best = Some((id, top, eig.eigenvectors[eig.len() - 1].clone()));
        }
    }
    let (id, lambda_max, omega) = best.expect("at least two classes");
    let effect = classes[id][0];
    let p_error = 1.0 - lambda_max;

    let mut report = LabelingReport::new(Mode::Partial, *tols);
    let leak: f64 = (0..obs.num_outcomes())
        .filter(|k| !classes[id].contains(k))
        .map(|k| obs.effect(k).expectation(&omega))
        .sum();
    report.check("p_e vs outside-class probability on the probe", (p_error - leak).abs(), 1e-9)?;

    report.feasible = true;
    report.verdict = format!(
        "recorded outcome labeled by effect {} with error {}",
        effect + 1,
        sig6(p_error)
    );
    report.p_error = Some(p_error);
    report.p_failure = Some(0.0);
    let probe = ProbeState::Pure(omega);
    let rule = DecisionRule::always(effect, obs.num_outcomes());
    if obs.is_binary() {
        report.tester = Some(binary_tester(&probe, &rule, tols.tol.max(1e-12))?);
    } else {
        report
            .notes
            .push("minimum-error discrimination among all n! labelings is not computed for n >= 3".into());
    }
    report.probe = Some(probe);
    report.decision_rule = Some(rule);
    report.classes = partial_label(obs, tols.tol);
    Ok(report)
}

/// Unambiguous labeling of a binary observable. Error-free conclusive
/// verdicts need a rank-deficient effect, and then the perfect strategy
/// already succeeds, so the inconclusive element is zero.
pub fn unambiguous_binary(obs: &Observable, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    let mut report = perfect_binary(obs, tols)?;
    report.mode = Mode::Unambiguous;
    if report.feasible {
        report.p_failure = Some(0.0);
        if !report.trivial {
            report.verdict = format!("unambiguous labeling coincides with perfect labeling (T_? = O); {}", report.verdict);
        }
    } else {
        report.verdict =
            "no nontrivial unambiguous strategy exists: neither effect is rank deficient, so error-free conclusive \
             verdicts are impossible"
                .into();
        // the only error-free tester is the always-inconclusive one
        report.p_error = Some(0.0);
        report.p_failure = Some(1.0);
        report.notes.push("always-inconclusive tester T_? = ξ⊗I gives p_failure = 1".into());
    }
    Ok(report)
}

/// Excludes effects from the recorded outcome using a probe in the kernel
/// of effect `j`. Every effect annihilating the probe is excluded as well.
pub fn antilabel(obs: &Observable, j: usize, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    let n = obs.num_outcomes();
    if j >= n {
        return Err(LabelingError::IndexOutOfRange { index: j, n });
    }
    let mut report = LabelingReport::new(Mode::Antilabel, *tols);
    let Some(phi) = kernel(obs.effect(j), tols.rank_tol).into_iter().next() else {
        report.verdict = format!("effect {} has full rank and cannot be antilabeled", j + 1);
        return Ok(report);
    };
    let mut excluded: Vec<usize> = (0..n)
        .filter(|&k| k == j || (obs.effect(k).matrix() * &phi).norm() <= tols.tol)
        .collect();
    excluded.sort_unstable();
    let leakage: f64 = excluded.iter().map(|&k| obs.effect(k).expectation(&phi)).sum();
    report.check("probability of an excluded effect", leakage.abs(), 10.0 * tols.tol.max(tols.rank_tol))?;

    report.feasible = true;
    let shown: Vec<String> = excluded.iter().map(|k| (k + 1).to_string()).collect();
    report.verdict = format!("recorded outcome carries none of the effects {{{}}}", shown.join(", "));
    report.p_error = Some(0.0);
    report.p_failure = Some(0.0);
    let probe = ProbeState::Pure(phi);
    let rule = DecisionRule::Exclude(excluded.clone());
    if obs.is_binary() {
        report.notes.push("for two outcomes antilabeling coincides with labeling".into());
        report.tester = Some(binary_tester(&probe, &rule, tols.tol.max(1e-12))?);
    }
    report.probe = Some(probe);
    report.decision_rule = Some(rule);
    report.excluded_effects = excluded;
    Ok(report)
}

/// Greedy, non-adaptive multi-use plan.
///
/// Each step probes a class of multiplicity one that passes the partial
/// labeling test; the one class left over at the end is identified by
/// elimination. Labeling all outcomes needs at least `classes - 1` uses.
pub fn sequential_plan(obs: &Observable, tols: &Tolerances) -> Result<LabelingReport, LabelingError> {
    let classes = partial_label(obs, tols.tol);
    let c = classes.len();
    let bound = c.saturating_sub(1);
    let mut report = LabelingReport::new(Mode::Sequential, *tols);
    report.min_uses_bound = Some(bound);
    if c == 1 {
        report.feasible = true;
        report.trivial = true;
        report.fully_labelable_in = Some(0);
        report.p_error = Some(0.0);
        report.p_failure = Some(0.0);
        report.verdict = "trivially labeled: every outcome carries the same effect".into();
        report.classes = classes;
        return Ok(report);
    }

    // a step labels the single recorded outcome, so only singleton classes
    // can be fully covered by one use
    let coverable: Vec<usize> = (0..c).filter(|&i| classes[i].feasible && classes[i].multiplicity == 1).collect();
    for &i in coverable.iter().take(bound) {
        let class = &classes[i];
        report.plan.push(PlanStep {
            probe: class.probe.clone().expect("feasible classes carry a probe"),
            class: class.members.clone(),
            effect: class.members[0],
        });
    }
    for class in &classes {
        if class.feasible && class.multiplicity > 1 {
            report.notes.push(format!(
                "class {{{}}} passes the partial-labeling test but one use labels only one of its {} outcomes",
                class.members.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", "),
                class.multiplicity
            ));
        }
    }

    if report.plan.len() == bound {
        report.feasible = true;
        report.fully_labelable_in = Some(bound);
        report.p_error = Some(0.0);
        report.p_failure = Some(0.0);
        let covered: Vec<usize> = coverable.iter().take(bound).copied().collect();
        let last = (0..c).find(|i| !covered.contains(i)).expect("one class remains");
        report.verdict = format!(
            "fully perfectly labelable in {bound} use(s); the outcomes of class {{{}}} are identified by elimination",
            classes[last].members.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
        );
    } else {
        report.verdict = format!(
            "not perfectly labelable by single-shot steps: {} of the {bound} required classes admit a perfect step",
            report.plan.len()
        );
    }
    report.classes = classes;
    Ok(report)
}

/// Convenience: the swap permutation on a binary observable.
pub fn binary_permutations() -> [Permutation; 2] {
    [Permutation::identity(2), Permutation::swap(2)]
}

/// `v` as a density operator `|v⟩⟨v|` wrapped as a mixed probe.
pub fn mixed_from_pure(v: &Vector) -> ProbeState {
    ProbeState::Mixed(HermitianOperator::new(projector(v)).expect("projectors are Hermitian"))
}
