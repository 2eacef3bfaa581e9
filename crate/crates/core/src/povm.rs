//! Observables (POVMs), outcome permutations and Choi operators.
//!
//! Outcome positions are 0-based here. Labels are opaque strings that stay
//! attached to positions; a permutation moves effects between positions.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    self, eig_hermitian, identity, max_abs_diff, partial_trace, tensor, HermitianOperator, LinalgError,
    Matrix,
};

/// Default tolerance for positivity, normalization and effect equality.
pub const DEFAULT_TOL: f64 = 1e-9;

/// One reason an effect list fails to form an observable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewOutcomes(usize),
    LabelCountMismatch { labels: usize, effects: usize },
    DuplicateLabel(String),
    DimensionMismatch { index: usize, rows: usize, cols: usize, expected: usize },
    NotHermitian { index: usize, reason: String },
    NotPositive { index: usize, min_eigenvalue: f64 },
    NotNormalized { deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // positions are shown 1-based
        match self {
            Violation::TooFewOutcomes(n) => write!(f, "TooFewOutcomes: {n} effect(s), at least 2 required"),
            Violation::LabelCountMismatch { labels, effects } => {
                write!(f, "LabelCountMismatch: {labels} labels for {effects} effects")
            }
            Violation::DuplicateLabel(l) => write!(f, "DuplicateLabel: {l:?}"),
            Violation::DimensionMismatch { index, rows, cols, expected } => write!(
                f,
                "DimensionMismatch: effect {} is {rows}x{cols}, expected {expected}x{expected}",
                index + 1
            ),
            Violation::NotHermitian { index, reason } => write!(f, "NotHermitian({}): {reason}", index + 1),
            Violation::NotPositive { index, min_eigenvalue } => {
                write!(f, "NotPositive({}): minimum eigenvalue {min_eigenvalue:e}", index + 1)
            }
            Violation::NotNormalized { deviation } => {
                write!(f, "NotNormalized: max |sum of effects - I| = {deviation:e}")
            }
        }
    }
}

/// Every violated invariant found while validating an observable.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid observable: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PovmError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("permutation error: {0}")]
    PermutationError(String),
    #[error("outcome index {index} out of range for {n} outcomes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A finite-outcome quantum observable with labeled outcome positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    dim: usize,
    labels: Vec<String>,
    effects: Vec<HermitianOperator>,
}

impl Observable {
    /// Checks positivity, normalization, dimensions and labels, and reports
    /// every violation rather than the first.
    pub fn validate(effects: Vec<Matrix>, labels: Vec<String>, tol: f64) -> Result<Self, ValidationError> {
        let mut violations = Vec::new();
        let n = effects.len();
        if n < 2 {
            violations.push(Violation::TooFewOutcomes(n));
        }
        if labels.len() != n {
            violations.push(Violation::LabelCountMismatch { labels: labels.len(), effects: n });
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                violations.push(Violation::DuplicateLabel(l.clone()));
            }
        }

        let dim = effects.first().map(|m| m.nrows()).unwrap_or(0);
        let mut hermitian = Vec::with_capacity(n);
        for (index, m) in effects.into_iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim || dim == 0 {
                violations.push(Violation::DimensionMismatch {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected: dim,
                });
                continue;
            }
            match HermitianOperator::new(m) {
                Ok(h) => {
                    let min = eig_hermitian(&h).min();
                    if min < -tol {
                        violations.push(Violation::NotPositive { index, min_eigenvalue: min });
                    }
                    hermitian.push(h);
                }
                Err(e) => violations.push(Violation::NotHermitian { index, reason: e.to_string() }),
            }
        }

        if hermitian.len() == n && n > 0 && dim > 0 {
            let sum = hermitian.iter().fold(Matrix::zeros(dim, dim), |acc, h| acc + h.matrix());
            let deviation = max_abs_diff(&sum, &identity(dim));
            if deviation > tol {
                violations.push(Violation::NotNormalized { deviation });
            }
        }

        if violations.is_empty() {
            Ok(Observable { dim, labels, effects: hermitian })
        } else {
            Err(ValidationError { violations })
        }
    }

    /// Validates with labels `x1, x2, …`.
    pub fn with_default_labels(effects: Vec<Matrix>, tol: f64) -> Result<Self, ValidationError> {
        let labels = (1..=effects.len()).map(|k| format!("x{k}")).collect();
        Self::validate(effects, labels, tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> &HermitianOperator {
        &self.effects[k]
    }

    pub fn is_binary(&self) -> bool {
        self.effects.len() == 2
    }

    /// Outcome probabilities `⟨ψ|M_k|ψ⟩` for a pure input state.
    pub fn probabilities(&self, psi: &linalg::Vector) -> Vec<f64> {
        self.effects.iter().map(|m| m.expectation(psi)).collect()
    }

    /// Outcome probabilities `tr[ρ M_k]`.
    pub fn probabilities_mixed(&self, rho: &Matrix) -> Vec<f64> {
        self.effects.iter().map(|m| (rho * m.matrix()).trace().re).collect()
    }
}

/// A bijection on outcome positions `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, PovmError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &x in &map {
            if x >= n || seen[x] {
                return Err(PovmError::PermutationError(format!("{map:?} is not a bijection on 0..{n}")));
            }
            seen[x] = true;
        }
        Ok(Self { map })
    }

    /// From 1-based images, as accepted on the command line.
    pub fn from_one_based(images: &[usize]) -> Result<Self, PovmError> {
        if images.contains(&0) {
            return Err(PovmError::PermutationError("permutation images are 1-based".into()));
        }
        Self::new(images.iter().map(|x| x - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// Exchanges the first two positions of an `n`-element set.
    pub fn swap(n: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(0, 1);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `σ(k)`
    pub fn apply(&self, k: usize) -> usize {
        self.map[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (k, &s) in self.map.iter().enumerate() {
            inv[s] = k;
        }
        Self { map: inv }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Permutation) -> Self {
        Self { map: first.map.iter().map(|&k| self.map[k]).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &s)| k == s)
    }

    /// All `n!` permutations in lexicographic order of their image lists.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..n).collect();
        loop {
            out.push(Permutation { map: current.clone() });
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }

    /// `P_σ = Σ_k |σ(k)⟩⟨k|`
    pub fn matrix(&self) -> Matrix {
        let n = self.map.len();
        let mut p = Matrix::zeros(n, n);
        for (k, &s) in self.map.iter().enumerate() {
            p[(s, k)] = Complex64::new(1.0, 0.0);
        }
        p
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.map.iter().map(|x| (x + 1).to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// The observable whose outcome position `σ(k)` carries effect `M_k`.
pub fn permute(obs: &Observable, sigma: &Permutation) -> Result<Observable, PovmError> {
    let n = obs.num_outcomes();
    if sigma.len() != n {
        return Err(PovmError::PermutationError(format!(
            "permutation acts on {} elements but the observable has {n} outcomes",
            sigma.len()
        )));
    }
    let inv = sigma.inverse();
    let effects = (0..n).map(|pos| obs.effects[inv.apply(pos)].clone()).collect();
    Ok(Observable { dim: obs.dim, labels: obs.labels.clone(), effects })
}

/// Choi operator `Σ_k M_k^T ⊗ |k⟩⟨k|` on system ⊗ outcome register.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    system_dim: usize,
    outcome_dim: usize,
    matrix: HermitianOperator,
}

impl ChoiOperator {
    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcome_dim
    }

    pub fn matrix(&self) -> &Matrix {
        self.matrix.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.matrix
    }

    /// The `k`-th outcome block, `M_k^T`.
    pub fn block(&self, k: usize) -> Matrix {
        let (d, n) = (self.system_dim, self.outcome_dim);
        Matrix::from_fn(d, d, |i, j| self.matrix.matrix()[(i * n + k, j * n + k)])
    }

    /// Trace over the outcome register; equals the identity for any observable.
    pub fn outcome_marginal(&self) -> Matrix {
        partial_trace(self.matrix.matrix(), &[self.system_dim, self.outcome_dim], 1)
            .expect("choi dimensions are consistent by construction")
    }

    /// Largest modulus of any entry coupling two different outcomes.
    pub fn off_block_magnitude(&self) -> f64 {
        let n = self.outcome_dim;
        let m = self.matrix.matrix();
        let mut worst: f64 = 0.0;
        for r in 0..m.nrows() {
            for col in 0..m.ncols() {
                if r % n != col % n {
                    worst = worst.max(m[(r, col)].norm());
                }
            }
        }
        worst
    }
}

pub fn choi(obs: &Observable) -> ChoiOperator {
    let n = obs.num_outcomes();
    let d = obs.dim;
    let mut m = Matrix::zeros(d * n, d * n);
    for (k, effect) in obs.effects.iter().enumerate() {
        let mut outcome = Matrix::zeros(n, n);
        outcome[(k, k)] = Complex64::new(1.0, 0.0);
        m += tensor(&effect.matrix().transpose(), &outcome);
    }
    ChoiOperator {
        system_dim: d,
        outcome_dim: n,
        matrix: HermitianOperator::new(m).expect("sum of transposed Hermitian blocks is Hermitian"),
    }
}

/// Checks `choi(permute(obs, σ)) = (I ⊗ P_σ) choi(obs) (I ⊗ P_σ)†`.
pub fn choi_conjugation_check(obs: &Observable, sigma: &Permutation, tol: f64) -> Result<bool, PovmError> {
    let permuted = choi(&permute(obs, sigma)?);
    let lift = tensor(&identity(obs.dim), &sigma.matrix());
    let conjugated = &lift * choi(obs).matrix() * lift.adjoint();
    Ok(max_abs_diff(permuted.matrix(), &conjugated) <= tol)
}

/// Two-outcome coarse-graining `(M_j, Σ_{k≠j} M_k)`.
pub fn binarize(obs: &Observable, j: usize) -> Result<Observable, PovmError> {
    let n = obs.num_outcomes();
    if j >= n {
        return Err(PovmError::IndexOutOfRange { index: j, n });
    }
    let d = obs.dim;
    let rest = (0..n)
        .filter(|&k| k != j)
        .fold(Matrix::zeros(d, d), |acc, k| acc + obs.effects[k].matrix());
    let rest_label = (0..n)
        .filter(|&k| k != j)
        .map(|k| obs.labels[k].as_str())
        .collect::<Vec<_>>()
        .join("+");
    let labels = vec![obs.labels[j].clone(), rest_label];
    Ok(Observable {
        dim: d,
        labels,
        effects: vec![obs.effects[j].clone(), HermitianOperator::new(rest)?],
    })
}

/// Groups outcome positions whose effects agree entrywise within `tol`.
///
/// Each class is listed in increasing order, and classes are ordered by
/// their smallest member.
pub fn multiplicity_classes(obs: &Observable, tol: f64) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for k in 0..obs.num_outcomes() {
        let slot = classes
            .iter_mut()
            .find(|class| max_abs_diff(obs.effects[class[0]].matrix(), obs.effects[k].matrix()) <= tol);
        match slot {
            Some(class) => class.push(k),
            None => classes.push(vec![k]),
        }
    }
    classes
}

/// Class id for each outcome position, as produced by [`multiplicity_classes`].
pub fn class_of_each(obs: &Observable, tol: f64) -> Vec<usize> {
    let mut out = vec![0; obs.num_outcomes()];
    for (id, class) in multiplicity_classes(obs, tol).iter().enumerate() {
        for &k in class {
            out[k] = id;
        }
    }
    out
}
