//! Process testers: collections of positive operators `T_α` on
//! system ⊗ outcome register with `Σ_α T_α = ξ ⊗ I`.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{eig_hermitian, identity, max_abs_diff, tensor, HermitianOperator, LinalgError, Matrix};
use crate::povm::{choi, permute, ChoiOperator, Observable, Permutation, PovmError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TesterError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid blocks: {0}")]
    InvalidBlocks(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Povm(#[from] PovmError),
}

/// A tester for channels from a `d`-dimensional system to an `n`-outcome
/// classical register.
#[derive(Debug, Clone, PartialEq)]
pub struct Tester {
    system_dim: usize,
    outcome_dim: usize,
    probe: HermitianOperator,
    elements: Vec<HermitianOperator>,
    inconclusive: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TesterViolation {
    ProbeNotPositive { min_eigenvalue: f64 },
    ProbeTrace { trace: f64 },
    NotPositive { element: usize, min_eigenvalue: f64 },
    NotNormalized { deviation: f64 },
}

impl fmt::Display for TesterViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TesterViolation::ProbeNotPositive { min_eigenvalue } => {
                write!(f, "ProbeNotPositive: minimum eigenvalue {min_eigenvalue:e}")
            }
            TesterViolation::ProbeTrace { trace } => write!(f, "ProbeTrace: tr ξ = {trace}"),
            TesterViolation::NotPositive { element, min_eigenvalue } => {
                write!(f, "NotPositive({}): minimum eigenvalue {min_eigenvalue:e}", element + 1)
            }
            TesterViolation::NotNormalized { deviation } => {
                write!(f, "NotNormalized: max |Σ T - ξ⊗I| = {deviation:e}")
            }
        }
    }
}

/// Outcome of [`validate_tester`]; violations are reported, never thrown.
#[derive(Debug, Clone, PartialEq)]
pub struct TesterDiagnostic {
    pub violations: Vec<TesterViolation>,
}

impl TesterDiagnostic {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Tester {
    /// Assembles a tester. Only shapes are checked here; positivity and
    /// normalization are the job of [`validate_tester`].
    pub fn new(
        probe: HermitianOperator,
        elements: Vec<HermitianOperator>,
        outcome_dim: usize,
        inconclusive: Option<usize>,
    ) -> Result<Self, TesterError> {
        let d = probe.dim();
        let big = d * outcome_dim;
        if let Some((i, e)) = elements.iter().enumerate().find(|(_, e)| e.dim() != big) {
            return Err(TesterError::DimensionMismatch(format!(
                "element {} has dimension {}, expected {big}",
                i + 1,
                e.dim()
            )));
        }
        if let Some(i) = inconclusive {
            if i >= elements.len() {
                return Err(TesterError::SizeMismatch(format!(
                    "inconclusive index {} but only {} elements",
                    i + 1,
                    elements.len()
                )));
            }
        }
        Ok(Self { system_dim: d, outcome_dim, probe, elements, inconclusive })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcome_dim
    }

    /// The normalization `ξ`, the transpose of the state fed into the device.
    pub fn probe(&self) -> &HermitianOperator {
        &self.probe
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn inconclusive(&self) -> Option<usize> {
        self.inconclusive
    }

    /// Indices of the elements that carry a conclusive verdict, in order.
    pub fn conclusive_indices(&self) -> Vec<usize> {
        (0..self.elements.len()).filter(|&i| Some(i) != self.inconclusive).collect()
    }

    /// Extracts the outcome-diagonal blocks `H_k^(α)` of every element.
    pub fn to_blocks(&self) -> MPTesterBlocks {
        let (d, n) = (self.system_dim, self.outcome_dim);
        let blocks = self
            .elements
            .iter()
            .map(|e| {
                (0..n)
                    .map(|k| Matrix::from_fn(d, d, |i, j| e.matrix()[(i * n + k, j * n + k)]))
                    .collect()
            })
            .collect();
        MPTesterBlocks { probe: self.probe.clone(), blocks, inconclusive: self.inconclusive }
    }
}

pub fn validate_tester(t: &Tester, tol: f64) -> TesterDiagnostic {
    let mut violations = Vec::new();
    let probe_min = eig_hermitian(&t.probe).min();
    if probe_min < -tol {
        violations.push(TesterViolation::ProbeNotPositive { min_eigenvalue: probe_min });
    }
    let trace = t.probe.trace();
    if (trace - 1.0).abs() > tol {
        violations.push(TesterViolation::ProbeTrace { trace });
    }
    let big = t.system_dim * t.outcome_dim;
    let mut sum = Matrix::zeros(big, big);
    for (element, e) in t.elements.iter().enumerate() {
        let min = eig_hermitian(e).min();
        if min < -tol {
            violations.push(TesterViolation::NotPositive { element, min_eigenvalue: min });
        }
        sum += e.matrix();
    }
    let target = tensor(t.probe.matrix(), &identity(t.outcome_dim));
    let deviation = max_abs_diff(&sum, &target);
    if deviation > tol {
        violations.push(TesterViolation::NotNormalized { deviation });
    }
    TesterDiagnostic { violations }
}

/// `tr[𝔐 T]`
pub fn born_probability(choi: &ChoiOperator, element: &HermitianOperator) -> Result<f64, TesterError> {
    if choi.matrix().nrows() != element.dim() {
        return Err(TesterError::DimensionMismatch(format!(
            "choi operator has dimension {}, tester element {}",
            choi.matrix().nrows(),
            element.dim()
        )));
    }
    // tr[AB] = Σ_ij A_ij B_ji
    let a = choi.matrix();
    let b = element.matrix();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc.re)
}

/// Measure-and-prepare tester blocks, indexed `blocks[α][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MPTesterBlocks {
    pub probe: HermitianOperator,
    pub blocks: Vec<Vec<Matrix>>,
    pub inconclusive: Option<usize>,
}

/// Builds `T_α = Σ_k H_k^(α) ⊗ |k⟩⟨k|` after checking that each block is
/// positive and `Σ_α H_k^(α) = ξ` for every outcome `k`.
pub fn tester_from_blocks(blocks: &MPTesterBlocks, tol: f64) -> Result<Tester, TesterError> {
    let d = blocks.probe.dim();
    let n = blocks.blocks.first().map(|b| b.len()).unwrap_or(0);
    if n == 0 {
        return Err(TesterError::InvalidBlocks("no blocks given".into()));
    }
    let mut sums = vec![Matrix::zeros(d, d); n];
    let mut elements = Vec::with_capacity(blocks.blocks.len());
    for (alpha, row) in blocks.blocks.iter().enumerate() {
        if row.len() != n {
            return Err(TesterError::InvalidBlocks(format!(
                "tester outcome {} has {} blocks, expected {n}",
                alpha + 1,
                row.len()
            )));
        }
        let mut element = Matrix::zeros(d * n, d * n);
        for (k, h) in row.iter().enumerate() {
            if h.nrows() != d || h.ncols() != d {
                return Err(TesterError::InvalidBlocks(format!(
                    "block H_{}^({}) is {}x{}, expected {d}x{d}",
                    k + 1,
                    alpha + 1,
                    h.nrows(),
                    h.ncols()
                )));
            }
            let hh = HermitianOperator::with_tol(h.clone(), tol.max(crate::linalg::HERMITICITY_TOL))
                .map_err(|e| TesterError::InvalidBlocks(format!("block H_{}^({}): {e}", k + 1, alpha + 1)))?;
            if eig_hermitian(&hh).min() < -tol {
                return Err(TesterError::InvalidBlocks(format!(
                    "block H_{}^({}) is not positive",
                    k + 1,
                    alpha + 1
                )));
            }
            sums[k] += h;
            let mut outcome = Matrix::zeros(n, n);
            outcome[(k, k)] = Complex64::new(1.0, 0.0);
            element += tensor(h, &outcome);
        }
        elements.push(HermitianOperator::new(element)?);
    }
    for (k, s) in sums.iter().enumerate() {
        let dev = max_abs_diff(s, blocks.probe.matrix());
        if dev > tol {
            return Err(TesterError::InvalidBlocks(format!(
                "blocks for outcome {} sum to ξ only within {dev:e}",
                k + 1
            )));
        }
    }
    Tester::new(blocks.probe.clone(), elements, n, blocks.inconclusive)
}

/// `p(σ|σ′) = tr[𝔐_σ T_σ′]`: rows are the true permutation, columns the
/// verdict. The inconclusive element, if any, is left out.
pub fn conditional_probability_matrix(
    obs: &Observable,
    permutations: &[Permutation],
    t: &Tester,
) -> Result<Vec<Vec<f64>>, TesterError> {
    let conclusive = t.conclusive_indices();
    if conclusive.len() != permutations.len() {
        return Err(TesterError::SizeMismatch(format!(
            "{} permutations but {} conclusive tester elements",
            permutations.len(),
            conclusive.len()
        )));
    }
    permutations
        .iter()
        .map(|sigma| {
            let ch = choi(&permute(obs, sigma)?);
            conclusive.iter().map(|&a| born_probability(&ch, &t.elements[a])).collect()
        })
        .collect()
}
