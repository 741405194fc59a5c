//! Validated observables and density matrices.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, ensure_same_dim, hermitian_eigh, hermitian_part, hermiticity_deviation, real, trace, trace_product,
    validate_matrix, ComplexMatrix, LinalgError, Subsystem, C64, STRUCTURE_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("trace is {trace}, expected 1")]
    Trace { trace: f64 },
    #[error("density matrix has eigenvalue {min_eigenvalue:e} below zero")]
    NotPositive { min_eigenvalue: f64 },
    #[error("Bloch vector length {length} exceeds 1")]
    BlochTooLong { length: f64 },
}

/// Hermitian observable with a free-form unit label.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
    units: String,
}

impl HermitianOperator {
    /// Validates Hermiticity to 1e-10, then symmetrizes away rounding noise.
    pub fn new(matrix: ComplexMatrix, units: impl Into<String>) -> Result<Self, LinalgError> {
        validate_matrix(&matrix)?;
        let deviation = hermiticity_deviation(&matrix);
        if deviation > STRUCTURE_TOL * (1.0 + matrix.norm()) {
            return Err(LinalgError::NotHermitian { deviation });
        }
        Ok(Self { matrix: hermitian_part(&matrix), units: units.into() })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// A ⊗ I_E
    pub fn embed_left(&self, d_e: usize) -> Self {
        Self { matrix: linalg::kron(&self.matrix, &linalg::identity(d_e)), units: self.units.clone() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * real(factor), units: self.units.clone() }
    }

    pub fn shifted(&self, shift: f64) -> Self {
        Self { matrix: &self.matrix + linalg::identity(self.dim()) * real(shift), units: self.units.clone() }
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        Self::new(self.matrix.clone(), self.units.clone()).map(|_| ())
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: ComplexMatrix,
}

impl QuantumState {
    pub fn new(rho: ComplexMatrix) -> Result<Self, StateError> {
        Self::with_tolerance(rho, STRUCTURE_TOL)
    }

    /// Same checks with a caller-chosen tolerance (integrators use a looser one).
    pub fn with_tolerance(rho: ComplexMatrix, tol: f64) -> Result<Self, StateError> {
        validate_matrix(&rho)?;
        let deviation = hermiticity_deviation(&rho);
        if deviation > tol {
            return Err(LinalgError::NotHermitian { deviation }.into());
        }
        let rho = hermitian_part(&rho);
        let tr = trace(&rho).re;
        if (tr - 1.0).abs() > tol {
            return Err(StateError::Trace { trace: tr });
        }
        let (values, _) = hermitian_eigh(&rho)?;
        let min = values.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(StateError::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { rho })
    }

    /// Wraps a matrix without checks. Callers must guarantee the invariants.
    pub(crate) fn from_trusted(rho: ComplexMatrix) -> Self {
        Self { rho: hermitian_part(&rho) }
    }

    pub fn pure(psi: &DVector<C64>) -> Result<Self, StateError> {
        let n = psi.norm();
        let psi = psi / real(n);
        Self::new(&psi * psi.adjoint())
    }

    /// Computational basis state |index⟩⟨index|.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut rho = ComplexMatrix::zeros(dim, dim);
        rho[(index, index)] = real(1.0);
        Self { rho }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { rho: linalg::identity(dim) * real(1.0 / dim as f64) }
    }

    pub fn product(a: &QuantumState, b: &QuantumState) -> Self {
        Self { rho: linalg::kron(&a.rho, &b.rho) }
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> ComplexMatrix {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Tr ρ²
    pub fn purity(&self) -> f64 {
        linalg::frobenius_norm_sq(&self.rho)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigh(&self.rho).map(|(v, _)| v).unwrap_or_default()
    }

    /// -Tr ρ ln ρ
    pub fn von_neumann_entropy(&self) -> f64 {
        self.eigenvalues().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
    }

    pub fn reduced(&self, dims: (usize, usize), keep: Subsystem) -> Result<Self, StateError> {
        let r = linalg::partial_trace(&self.rho, dims, keep)?;
        Ok(Self::from_trusted(r))
    }

    pub fn validate(&self) -> Result<(), StateError> {
        Self::new(self.rho.clone()).map(|_| ())
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &QuantumState) -> f64 {
        let diff = &self.rho - &other.rho;
        hermitian_eigh(&hermitian_part(&diff))
            .map(|(v, _)| 0.5 * v.iter().map(|x| x.abs()).sum::<f64>())
            .unwrap_or(f64::INFINITY)
    }
}

/// Qubit state parameterized as ρ = (I + β·σ)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub beta: [f64; 3],
}

impl BlochVector {
    pub const ORIGIN: BlochVector = BlochVector { beta: [0.0; 3] };

    pub fn new(beta: [f64; 3]) -> Result<Self, StateError> {
        let b = Self { beta };
        let length = b.norm();
        if !length.is_finite() || length > 1.0 + 1e-9 {
            return Err(StateError::BlochTooLong { length });
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        self.beta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_state(&self) -> QuantumState {
        let [b1, b2, b3] = self.beta;
        let rho = (linalg::identity(2)
            + linalg::pauli_x() * real(b1)
            + linalg::pauli_y() * real(b2)
            + linalg::pauli_z() * real(b3))
            * real(0.5);
        QuantumState::from_trusted(rho)
    }

    pub fn from_state(state: &QuantumState) -> Self {
        let rho = state.rho();
        let comp = |p: ComplexMatrix| trace_product(&p, rho).map(|z| z.re).unwrap_or(f64::NAN);
        Self { beta: [comp(linalg::pauli_x()), comp(linalg::pauli_y()), comp(linalg::pauli_z())] }
    }

    /// (1 + |β|²)/2
    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + self.norm().powi(2))
    }
}

/// ⟨A⟩ = Tr(ρA). The imaginary part must vanish to 1e-10 (relative to ‖A‖).
pub fn expectation(a: &HermitianOperator, s: &QuantumState) -> Result<f64, LinalgError> {
    let z = expectation_complex(a.matrix(), s.rho())?;
    if z.im.abs() > STRUCTURE_TOL * (1.0 + a.matrix().norm()) {
        return Err(LinalgError::ComplexExpectation { imag: z.im });
    }
    Ok(z.re)
}

/// Tr(ρM) for an arbitrary (not necessarily Hermitian) matrix.
pub fn expectation_complex(m: &ComplexMatrix, rho: &ComplexMatrix) -> Result<C64, LinalgError> {
    ensure_same_dim(m, rho)?;
    trace_product(rho, m)
}
