//! Seeded random observables for integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use povm_label::linalg::{eig_hermitian, identity, HermitianOperator, Matrix, Vector};
use povm_label::povm::{Observable, DEFAULT_TOL};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(d: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    DMatrix::from_fn(d, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let qr = gaussian(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let phase = r[(j, j)] / r[(j, j)].norm();
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    let g = gaussian(d, 1, rng);
    let v = Vector::from_column_slice(g.as_slice());
    let n = v.norm();
    v.unscale(n)
}

fn hermitize(m: Matrix) -> Matrix {
    (&m + m.adjoint()).scale(0.5)
}

/// `U diag(λ) U†`.
pub fn with_spectrum(u: &Matrix, lambda: &[f64]) -> Matrix {
    let d = lambda.len();
    let mut dm = Matrix::zeros(d, d);
    for (i, l) in lambda.iter().enumerate() {
        dm[(i, i)] = Complex64::new(*l, 0.0);
    }
    hermitize(u * dm * u.adjoint())
}

fn binary(m1: Matrix) -> Observable {
    let d = m1.nrows();
    let m2 = hermitize(identity(d) - &m1);
    Observable::with_default_labels(vec![m1, m2], DEFAULT_TOL).expect("random binary observable is valid")
}

/// Binary observable whose effects both have spectra inside `[0.05, 0.95]`.
pub fn random_full_rank_binary(d: usize, rng: &mut ChaCha8Rng) -> Observable {
    let u = random_unitary(d, rng);
    let lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
    binary(with_spectrum(&u, &lambda))
}

/// Arbitrary binary observable: spectrum of `M1` uniform in `[0, 1]`.
pub fn random_binary(d: usize, rng: &mut ChaCha8Rng) -> Observable {
    let u = random_unitary(d, rng);
    let lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
    binary(with_spectrum(&u, &lambda))
}

pub struct KernelCase {
    pub obs: Observable,
    /// Index of the effect that annihilates `vector`.
    pub kernel_effect: usize,
    pub vector: Vector,
}

/// Binary observable where one effect, chosen at random, has the kernel
/// vector `U e_0`; the other eigenvalues are drawn from `[0.05, 0.95]`.
pub fn random_binary_with_kernel(d: usize, rng: &mut ChaCha8Rng) -> KernelCase {
    let u = random_unitary(d, rng);
    let kernel_effect = rng.random_range(0..2usize);
    let mut lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
    lambda[0] = if kernel_effect == 0 { 0.0 } else { 1.0 };
    let vector = u.column(0).into_owned();
    KernelCase { obs: binary(with_spectrum(&u, &lambda)), kernel_effect, vector }
}

/// `n` effects `S^{-1/2} G_k S^{-1/2}` from random Gram matrices `G_k`;
/// almost surely pairwise distinct and full rank.
pub fn random_povm(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Observable {
    let grams: Vec<Matrix> = (0..n)
        .map(|_| {
            let a = gaussian(d, d, rng);
            hermitize(&a * a.adjoint())
        })
        .collect();
    let s = grams.iter().fold(Matrix::zeros(d, d), |acc, g| acc + g);
    let eig = eig_hermitian(&HermitianOperator::new(s).expect("sum of Gram matrices is Hermitian"));
    let mut inv_sqrt = Matrix::zeros(d, d);
    for (l, v) in eig.eigenvalues.iter().zip(&eig.eigenvectors) {
        inv_sqrt += (v * v.adjoint()).scale(1.0 / l.sqrt());
    }
    let effects = grams.iter().map(|g| hermitize(&inv_sqrt * g * &inv_sqrt)).collect();
    Observable::with_default_labels(effects, DEFAULT_TOL).expect("normalized Gram construction is a POVM")
}

/// Effects `(2/3)|ψ_k⟩⟨ψ_k|` on three real qubit states at 120°.
pub fn trine() -> Observable {
    let effects = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            let v = Vector::from_vec(vec![Complex64::new(a.cos(), 0.0), Complex64::new(a.sin(), 0.0)]);
            (&v * v.adjoint()).scale(2.0 / 3.0)
        })
        .collect();
    Observable::validate(effects, vec!["t1".into(), "t2".into(), "t3".into()], DEFAULT_TOL).expect("trine is a POVM")
}

/// `{|φ⟩⟨φ|, (I - |φ⟩⟨φ|)/(n-1), ..., (I - |φ⟩⟨φ|)/(n-1)}`.
pub fn projector_family(phi: &Vector, n: usize) -> Observable {
    let d = phi.len();
    let p = phi * phi.adjoint();
    let rest = (identity(d) - &p).scale(1.0 / (n - 1) as f64);
    let mut effects = vec![p];
    effects.extend(std::iter::repeat_n(rest, n - 1));
    Observable::with_default_labels(effects, DEFAULT_TOL).expect("projector family is a POVM")
}

pub fn coin(q: f64) -> Observable {
    Observable::with_default_labels(vec![identity(2).scale(q), identity(2).scale(1.0 - q)], DEFAULT_TOL)
        .expect("coin is a POVM")
}
