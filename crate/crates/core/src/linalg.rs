//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra` dense matrices over `Complex64`. Everything that
//! needs a Hermitian input goes through [`HermitianOperator`], which checks
//! hermiticity once at construction and never silently symmetrizes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

/// Maximum entrywise deviation `|A - A†|` accepted for a Hermitian operator.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a real diagonal matrix.
pub fn diag(values: &[f64]) -> Matrix {
    let n = values.len();
    Matrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) })
}

pub fn identity(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

/// `|v⟩⟨v|`
pub fn projector(v: &Vector) -> Matrix {
    v * v.adjoint()
}

/// Standard basis vector `e_k` (0-based).
pub fn basis_vector(d: usize, k: usize) -> Vector {
    let mut v = Vector::zeros(d);
    v[k] = c(1.0, 0.0);
    v
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Largest entrywise modulus of `a - b`. Panics if shapes differ.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff on mismatched shapes");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A square matrix equal to its adjoint within [`HERMITICITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: Matrix,
}

impl HermitianOperator {
    pub fn new(matrix: Matrix) -> Result<Self> {
        Self::with_tol(matrix, HERMITICITY_TOL)
    }

    pub fn with_tol(matrix: Matrix, tol: f64) -> Result<Self> {
        if matrix.nrows() == 0 || !matrix.is_square() {
            return Err(LinalgError::InvalidOperator(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_finite(&matrix)?;
        let dev = max_abs_diff(&matrix, &matrix.adjoint());
        if dev > tol {
            return Err(LinalgError::InvalidOperator(format!(
                "not Hermitian: max |A - A†| = {dev:e} exceeds {tol:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨v|A|v⟩`, real for Hermitian `A`.
    pub fn expectation(&self, v: &Vector) -> f64 {
        v.dotc(&(&self.matrix * v)).re
    }

    pub fn transpose(&self) -> HermitianOperator {
        HermitianOperator { matrix: self.matrix.transpose() }
    }
}

/// Spectral decomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vector>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Σ λ_x |v_x⟩⟨v_x|`
    pub fn reconstruct(&self) -> Matrix {
        let d = self.eigenvectors[0].len();
        let mut m = Matrix::zeros(d, d);
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m += projector(v) * c(*lambda, 0.0);
        }
        m
    }
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Eigenvalues come back ascending. Each eigenvector is rotated so that its
/// first entry of largest modulus is real and positive, which makes the
/// output (and every probe state derived from it) reproducible.
pub fn eig_hermitian(a: &HermitianOperator) -> EigenSystem {
    let eig = a.matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| fix_phase(eig.eigenvectors.column(i).into_owned()))
        .collect();
    EigenSystem { eigenvalues, eigenvectors }
}

fn fix_phase(v: Vector) -> Vector {
    let norm = v.norm();
    let mut best = 0;
    let mut best_mod = -1.0;
    for (k, z) in v.iter().enumerate() {
        // a small slack keeps near-equal moduli from flipping the pivot
        if z.norm() > best_mod + 1e-12 {
            best = k;
            best_mod = z.norm();
        }
    }
    let pivot = v[best];
    if pivot.norm() == 0.0 {
        return v;
    }
    let phase = pivot.conj() / pivot.norm();
    v.map(|z| z * phase / norm)
}

pub fn is_psd(a: &HermitianOperator, tol: f64) -> bool {
    eig_hermitian(a).min() >= -tol
}

/// Orthonormal basis of the eigenspace whose eigenvalues satisfy
/// `|λ| ≤ rank_tol · ‖A‖`. Empty means full rank.
pub fn kernel(a: &HermitianOperator, rank_tol: f64) -> Vec<Vector> {
    let eig = eig_hermitian(a);
    let scale = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let threshold = rank_tol * scale;
    eig.eigenvalues
        .iter()
        .zip(eig.eigenvectors)
        .filter(|(l, _)| l.abs() <= threshold)
        .map(|(_, v)| v)
        .collect()
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(LinalgError::InvalidOperator(format!(
            "spectral_norm expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(a.singular_values().iter().cloned().fold(0.0, f64::max))
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn transpose(a: &Matrix) -> Matrix {
    a.transpose()
}

/// Traces out subsystem `traced` of an operator on `dims[0] ⊗ dims[1] ⊗ …`.
pub fn partial_trace(a: &Matrix, dims: &[usize], traced: usize) -> Result<Matrix> {
    let total: usize = dims.iter().product();
    if !a.is_square() || a.nrows() != total {
        return Err(LinalgError::DimensionError(format!(
            "operator is {}x{} but subsystem dims {:?} multiply to {}",
            a.nrows(),
            a.ncols(),
            dims,
            total
        )));
    }
    if traced >= dims.len() {
        return Err(LinalgError::DimensionError(format!(
            "subsystem index {traced} out of range for {} subsystems",
            dims.len()
        )));
    }
    // stride of the traced subsystem in the row-major (big-endian) index
    let inner: usize = dims[traced + 1..].iter().product();
    let dt = dims[traced];
    let outer = total / (inner * dt);
    let out_dim = outer * inner;
    let mut out = Matrix::zeros(out_dim, out_dim);
    for o1 in 0..outer {
        for i1 in 0..inner {
            for o2 in 0..outer {
                for i2 in 0..inner {
                    let mut acc = c(0.0, 0.0);
                    for t in 0..dt {
                        let r = (o1 * dt + t) * inner + i1;
                        let col = (o2 * dt + t) * inner + i2;
                        acc += a[(r, col)];
                    }
                    out[(o1 * inner + i1, o2 * inner + i2)] = acc;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn herm(m: Matrix) -> HermitianOperator {
        HermitianOperator::new(m).unwrap()
    }

    fn random_hermitian(d: usize, entries: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(d, d);
        let mut it = entries.iter().cycle();
        for i in 0..d {
            m[(i, i)] = c(*it.next().unwrap(), 0.0);
            for j in i + 1..d {
                let z = c(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eig_of_diagonal() {
        let e = eig_hermitian(&herm(diag(&[0.3, 1.0])));
        assert_eq!(e.eigenvalues, vec![0.3, 1.0]);
        assert_abs_diff_eq!((&e.eigenvectors[0] - basis_vector(2, 0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((&e.eigenvectors[1] - basis_vector(2, 1)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_of_identity() {
        let e = eig_hermitian(&herm(identity(2)));
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        let overlap = e.eigenvectors[0].dotc(&e.eigenvectors[1]).norm();
        assert!(overlap < 1e-12);
    }

    #[test]
    fn eig_of_rank_one_projector() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let e = eig_hermitian(&herm(m.clone()));
        assert_abs_diff_eq!(e.eigenvalues[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-12);
        let s = 1.0 / 2f64.sqrt();
        let minus = Vector::from_vec(vec![c(s, 0.0), c(-s, 0.0)]);
        let plus = Vector::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
        // equal up to global phase
        assert_abs_diff_eq!(e.eigenvectors[0].dotc(&minus).norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvectors[1].dotc(&plus).norm(), 1.0, epsilon = 1e-12);
        assert!(max_abs_diff(&e.reconstruct(), &m) < 1e-12);
    }

    #[test]
    fn eig_is_deterministic() {
        let m = random_hermitian(4, &[0.3, -0.2, 0.7, 0.1, 0.05, -0.4, 0.9]);
        let a = eig_hermitian(&herm(m.clone()));
        let b = eig_hermitian(&herm(m));
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn rejects_non_hermitian_and_non_square() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(LinalgError::InvalidOperator(_))));
        assert!(matches!(HermitianOperator::new(Matrix::zeros(2, 3)), Err(LinalgError::InvalidOperator(_))));
        let mut nan = identity(2);
        nan[(1, 1)] = c(f64::NAN, 0.0);
        assert_eq!(HermitianOperator::new(nan), Err(LinalgError::NonFinite { row: 1, col: 1 }));
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&herm(diag(&[0.7, 0.0])), 1e-9));
        assert!(!is_psd(&herm(diag(&[0.5, -0.1])), 1e-9));
        let psi = Vector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert!(is_psd(&herm(projector(&psi)), 1e-9));
    }

    #[test]
    fn kernels() {
        let k = kernel(&herm(diag(&[0.7, 0.0])), DEFAULT_RANK_TOL);
        assert_eq!(k.len(), 1);
        assert_abs_diff_eq!(k[0].dotc(&basis_vector(2, 1)).norm(), 1.0, epsilon = 1e-12);
        assert!(kernel(&herm(identity(2)), DEFAULT_RANK_TOL).is_empty());
        let k = kernel(&herm(diag(&[0.0, 0.0, 0.4])), DEFAULT_RANK_TOL);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(v[2].norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_norms() {
        assert_abs_diff_eq!(spectral_norm(&diag(&[0.6, -0.2])).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let m1 = diag(&[0.8, 0.4]);
        let d = &m1 * c(2.0, 0.0) - identity(2);
        assert_abs_diff_eq!(spectral_norm(&d).unwrap(), 0.6, epsilon = 1e-15);
        assert!(spectral_norm(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn tensor_transpose_partial_trace() {
        assert_eq!(tensor(&identity(2), &identity(2)), identity(4));
        let y = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        let yt = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(transpose(&y), yt);

        let a = random_hermitian(2, &[0.3, 0.1, 0.2, 0.7]);
        let b = random_hermitian(3, &[0.5, -0.1, 0.4, 0.2, 0.9, 0.3]);
        let ab = tensor(&a, &b);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 3], 1).unwrap(), &(&a * b.trace())) < 1e-12);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 3], 0).unwrap(), &(&b * a.trace())) < 1e-12);
        assert!(partial_trace(&ab, &[2, 2], 0).is_err());
        assert!(partial_trace(&ab, &[2, 3], 2).is_err());
    }

    #[test]
    fn partial_trace_of_three_subsystems() {
        let a = random_hermitian(2, &[0.3, 0.1, 0.2, 0.7]);
        let b = random_hermitian(2, &[0.5, -0.1, 0.4, 0.2]);
        let cc = random_hermitian(3, &[0.1, 0.6, -0.3, 0.2, 0.8, 0.05]);
        let abc = tensor(&tensor(&a, &b), &cc);
        let expected = tensor(&a, &cc) * b.trace();
        assert!(max_abs_diff(&partial_trace(&abc, &[2, 2, 3], 1).unwrap(), &expected) < 1e-12);
    }

    fn hermitian_strategy(max_d: usize) -> impl Strategy<Value = Matrix> {
        (2..=max_d).prop_flat_map(|d| {
            prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |xs| random_hermitian(d, &xs))
        })
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthonormality(m in hermitian_strategy(5)) {
            let e = eig_hermitian(&herm(m.clone()));
            prop_assert!(max_abs_diff(&e.reconstruct(), &m) < 1e-9);
            for (i, vi) in e.eigenvectors.iter().enumerate() {
                let av = &m * vi;
                prop_assert!((av - vi * c(e.eigenvalues[i], 0.0)).norm() < 1e-9);
                for (j, vj) in e.eigenvectors.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((vi.dotc(vj).norm() - target).abs() < 1e-9);
                }
            }
            prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn kernel_vectors_are_annihilated(m in hermitian_strategy(4), rank in 1usize..3) {
            // build a PSD matrix with a forced kernel by squaring and projecting
            let d = m.nrows();
            let psd = &m * m.adjoint();
            let e = eig_hermitian(&herm(psd.clone()));
            let keep = rank.min(d - 1);
            let mut low = Matrix::zeros(d, d);
            for x in d - keep..d {
                low += projector(&e.eigenvectors[x]) * c(e.eigenvalues[x], 0.0);
            }
            let low = (&low + low.adjoint()) * c(0.5, 0.0);
            let h = herm(low);
            let tol = DEFAULT_RANK_TOL;
            let ker = kernel(&h, tol);
            prop_assert!(ker.len() >= d - keep);
            for v in &ker {
                prop_assert!((h.matrix() * v).norm() <= 10.0 * tol);
            }
        }

        #[test]
        fn spectral_norm_transpose_invariant(m in hermitian_strategy(5)) {
            let a = spectral_norm(&m).unwrap();
            let b = spectral_norm(&transpose(&m)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            let e = eig_hermitian(&herm(m));
            let top = e.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
            prop_assert!((a - top).abs() < 1e-9);
        }

        #[test]
        fn psd_diagonal_is_real_nonnegative(m in hermitian_strategy(4)) {
            let psd = &m * m.adjoint();
            let psd = (&psd + psd.adjoint()) * c(0.5, 0.0);
            let h = herm(psd);
            let tol = 1e-9;
            prop_assert!(is_psd(&h, tol));
            for i in 0..h.dim() {
                prop_assert!(h.matrix()[(i, i)].re >= -tol);
                prop_assert!(h.matrix()[(i, i)].im.abs() <= tol);
            }
        }

        #[test]
        fn tensor_trace_is_multiplicative(a in hermitian_strategy(3), b in hermitian_strategy(3)) {
            let t = tensor(&a, &b).trace();
            prop_assert!((t - a.trace() * b.trace()).norm() < 1e-12);
        }
    }
}
