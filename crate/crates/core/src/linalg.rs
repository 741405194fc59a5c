//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Bipartite operators use the
//! convention that row/column index `i * d_e + j` labels `|i⟩_S ⊗ |j⟩_E`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Hermiticity, trace and similar structural checks use this absolute tolerance.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Default eigenvalue floor for [`matrix_log_hermitian`].
pub const DEFAULT_LOG_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian (‖A − A†‖_F = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("subsystem dimensions {d_s}x{d_e} do not factor dimension {dim}")]
    BadFactorization { dim: usize, d_s: usize, d_e: usize },
    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },
}

/// Which factor of a bipartite space survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    S,
    E,
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(dim, dim)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

/// Diagonal matrix from real entries.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let mut m = zeros(values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = real(*v);
    }
    m
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn ensure_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<usize, LinalgError> {
    let da = ensure_square(a)?;
    let db = ensure_square(b)?;
    if da != db {
        return Err(LinalgError::DimensionMismatch { left: da, right: db });
    }
    Ok(da)
}

/// Square and finite.
pub fn validate_matrix(m: &ComplexMatrix) -> Result<(), LinalgError> {
    ensure_square(m)?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// ‖A − A†‖_F
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermiticity_deviation(m) <= tol
}

/// (A + A†)/2, used to strip rounding-level anti-Hermitian parts.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * real(0.5)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    ensure_same_dim(a, b)?;
    Ok(a * b + b * a)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Tr(A†A)
pub fn frobenius_norm_sq(m: &ComplexMatrix) -> f64 {
    m.norm_squared()
}

/// Tr(AB) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64, LinalgError> {
    let d = ensure_same_dim(a, b)?;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    Ok(acc)
}

/// Partial trace over one factor of `C^{d_s} ⊗ C^{d_e}`, keeping the other.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix, LinalgError> {
    let dim = ensure_square(m)?;
    let (d_s, d_e) = dims;
    if d_s * d_e != dim || d_s == 0 || d_e == 0 {
        return Err(LinalgError::BadFactorization { dim, d_s, d_e });
    }
    let out = match keep {
        Subsystem::S => ComplexMatrix::from_fn(d_s, d_s, |i, k| (0..d_e).map(|j| m[(i * d_e + j, k * d_e + j)]).sum()),
        Subsystem::E => ComplexMatrix::from_fn(d_e, d_e, |j, l| (0..d_s).map(|i| m[(i * d_e + j, i * d_e + l)]).sum()),
    };
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with the matching eigenvectors as columns.
pub fn hermitian_eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let dim = ensure_square(m)?;
    let dev = hermiticity_deviation(m);
    if dev > STRUCTURE_TOL * (1.0 + m.norm()) {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(dim, dim, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok((values, vectors))
}

/// V diag(f(λ)) V† for Hermitian input.
pub fn hermitian_function<F>(m: &ComplexMatrix, f: F) -> Result<ComplexMatrix, LinalgError>
where
    F: Fn(f64) -> C64,
{
    let (values, vectors) = hermitian_eigh(m)?;
    Ok(reconstruct(&values, &vectors, f))
}

fn reconstruct<F>(values: &[f64], vectors: &ComplexMatrix, f: F) -> ComplexMatrix
where
    F: Fn(f64) -> C64,
{
    let mut scaled = vectors.clone();
    for (col, lambda) in values.iter().enumerate() {
        let fl = f(*lambda);
        scaled.column_mut(col).iter_mut().for_each(|z| *z *= fl);
    }
    scaled * vectors.adjoint()
}

/// Matrix exponential. Hermitian and anti-Hermitian inputs go through the
/// Hermitian eigensolver; everything else uses Padé scaling-and-squaring.
pub fn matrix_exp(m: &ComplexMatrix) -> ComplexMatrix {
    let scale = 1.0 + m.norm();
    if hermiticity_deviation(m) <= STRUCTURE_TOL * scale {
        if let Ok(r) = hermitian_function(m, |x| real(x.exp())) {
            return r;
        }
    }
    let anti = (m + m.adjoint()).norm();
    if anti <= STRUCTURE_TOL * scale {
        // m = iH with H Hermitian
        let h = m * c(0.0, -1.0);
        if let Ok(r) = hermitian_function(&h, |x| C64::from_polar(1.0, x)) {
            return r;
        }
    }
    m.clone().exp()
}

/// Logarithm of a Hermitian positive semidefinite matrix, with eigenvalues
/// clamped below at `eps` before taking the log.
pub fn matrix_log_hermitian(m: &ComplexMatrix, eps: f64) -> Result<ComplexMatrix, LinalgError> {
    hermitian_function(m, |x| real(x.max(eps).ln()))
}

/// Real matrix exponential for small real generators (Bloch equations).
pub fn real_matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().exp()
}
