//! Brute-force cross-check of the binary minimum-error labeling value.
//!
//! For a pure probe `φ` the device yields the outcome distribution
//! `(⟨φ|M1|φ⟩, ⟨φ|M2|φ⟩)` under one labeling and its reverse under the
//! other. The oracle evaluates every deterministic decision function on that
//! pair of distributions and keeps the best, then minimizes over a finite
//! probe set. It only searches pure probes without an ancilla.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{eig_hermitian, HermitianOperator, Vector};

pub const DEFAULT_RANDOM_PROBES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Grid,
    RandomSeeded { seed: u64 },
    EigenvectorAugmented { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCandidateSet {
    pub states: Vec<Vector>,
    pub provenance: Provenance,
}

impl ProbeCandidateSet {
    /// All eigenvectors of `M1 - M2` followed by `random` seeded probes.
    pub fn eigenvector_augmented(
        m1: &HermitianOperator,
        m2: &HermitianOperator,
        random: usize,
        seed: u64,
    ) -> Result<Self, OracleError> {
        check_dims(m1, m2)?;
        let diff = HermitianOperator::new(m1.matrix() - m2.matrix())
            .expect("difference of Hermitian operators is Hermitian");
        let mut states = eig_hermitian(&diff).eigenvectors;
        if random > 0 {
            states.extend(sample_probes(m1.dim(), random, seed).states);
        }
        Ok(Self { states, provenance: Provenance::EigenvectorAugmented { seed } })
    }

    /// Qubit probes on a `(θ, φ)` grid of the Bloch sphere, poles included.
    pub fn qubit_grid(resolution: usize) -> Self {
        let res = resolution.max(1);
        let mut states = Vec::new();
        for i in 0..=res {
            let theta = std::f64::consts::PI * i as f64 / res as f64;
            let azimuths = if i == 0 || i == res { 1 } else { 2 * res };
            for j in 0..azimuths {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / azimuths as f64;
                states.push(Vector::from_vec(vec![
                    num_complex::Complex64::new((theta / 2.0).cos(), 0.0),
                    num_complex::Complex64::from_polar((theta / 2.0).sin(), phi),
                ]));
            }
        }
        Self { states, provenance: Provenance::Grid }
    }
}

/// `count` unit vectors in dimension `d`, Haar-distributed: each is a
/// normalized vector of i.i.d. standard complex Gaussian entries.
///
/// Uses ChaCha8 seeded from `seed`; the same seed always yields the same set.
pub fn sample_probes(d: usize, count: usize, seed: u64) -> ProbeCandidateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..count)
        .map(|_| {
            let v = Vector::from_fn(d, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                num_complex::Complex64::new(re, im)
            });
            let n = v.norm();
            v.unscale(n)
        })
        .collect();
    ProbeCandidateSet { states, provenance: Provenance::RandomSeeded { seed } }
}

fn check_dims(m1: &HermitianOperator, m2: &HermitianOperator) -> Result<(), OracleError> {
    if m1.dim() != m2.dim() {
        return Err(OracleError::DimensionMismatch(format!("effects are {} and {} dimensional", m1.dim(), m2.dim())));
    }
    Ok(())
}

/// Smallest average error over the four deterministic decision functions
/// (recorded position → guessed labeling) for one probe.
pub fn probe_error(m1: &HermitianOperator, m2: &HermitianOperator, phi: &Vector) -> f64 {
    let p = [m1.expectation(phi), m2.expectation(phi)];
    // outcome distributions under the identity and the swapped labeling
    let under = [[p[0], p[1]], [p[1], p[0]]];
    let mut best = f64::INFINITY;
    for f in 0..4u8 {
        let guess = [(f & 1) as usize, ((f >> 1) & 1) as usize];
        let mut err = 0.0;
        for (truth, dist) in under.iter().enumerate() {
            for k in 0..2 {
                if guess[k] != truth {
                    err += 0.5 * dist[k];
                }
            }
        }
        best = best.min(err);
    }
    best
}

/// Minimum of [`probe_error`] over the candidates, with the index of the
/// first probe attaining it.
pub fn oracle_search(
    m1: &HermitianOperator,
    m2: &HermitianOperator,
    candidates: &ProbeCandidateSet,
) -> Result<(f64, usize), OracleError> {
    check_dims(m1, m2)?;
    if candidates.states.is_empty() {
        return Err(OracleError::EmptyCandidates);
    }
    if let Some(v) = candidates.states.iter().find(|v| v.len() != m1.dim()) {
        return Err(OracleError::DimensionMismatch(format!(
            "probe of dimension {} for {}-dimensional effects",
            v.len(),
            m1.dim()
        )));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, phi) in candidates.states.iter().enumerate() {
        let e = probe_error(m1, m2, phi);
        if e < best.0 {
            best = (e, i);
        }
    }
    Ok(best)
}

pub fn oracle_min_error_binary(
    m1: &HermitianOperator,
    m2: &HermitianOperator,
    candidates: &ProbeCandidateSet,
) -> Result<f64, OracleError> {
    oracle_search(m1, m2, candidates).map(|(e, _)| e)
}
