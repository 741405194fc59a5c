//! Spectral projectors, dephasing (non-selective projective measurement),
//! selective measurement and measurement schedules along a trajectory.

use rand::Rng;
use thiserror::Error;

use crate::dynamics::{DynamicsError, Trajectory};
use crate::linalg::{self, commutator, frobenius_norm_sq, hermitian_eigh, ComplexMatrix, LinalgError, C64};
use crate::operator::QuantumState;

/// Absolute tolerance for grouping eigenvalues into one projector.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("measurement times must be strictly increasing")]
    Unsorted,
    #[error("measurement time {t} lies outside [{start}, {end}]")]
    OutsideGrid { t: f64, start: f64, end: f64 },
    #[error("projector set violates {0}")]
    Invalid(&'static str),
}

/// Orthogonal projectors onto the eigenspaces of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<ComplexMatrix>,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.projectors.first().map(|p| p.nrows()).unwrap_or(0)
    }

    /// Π² = Π, Π_iΠ_j = 0 and ΣΠ = I, each to 1e-10.
    pub fn validate(&self) -> Result<(), MeasurementError> {
        let d = self.dim();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (i, p) in self.projectors.iter().enumerate() {
            if (p * p - p).norm() > 1e-10 {
                return Err(MeasurementError::Invalid("idempotence"));
            }
            for q in &self.projectors[i + 1..] {
                if (p * q).norm() > 1e-10 {
                    return Err(MeasurementError::Invalid("orthogonality"));
                }
            }
            sum += p;
        }
        if (sum - linalg::identity(d)).norm() > 1e-10 {
            return Err(MeasurementError::Invalid("completeness"));
        }
        Ok(())
    }

    /// D(X) = Σ Π X Π
    pub fn diagonal_part(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(x.nrows(), x.ncols());
        for p in &self.projectors {
            out += p * x * p;
        }
        out
    }

    /// C(X) = X − D(X)
    pub fn off_diagonal_part(&self, x: &ComplexMatrix) -> ComplexMatrix {
        x - self.diagonal_part(x)
    }

    /// ‖C(X)‖²_F
    pub fn coherence(&self, x: &ComplexMatrix) -> f64 {
        frobenius_norm_sq(&self.off_diagonal_part(x))
    }

    /// ½ Σ_j ‖[X, Π_j]‖²_F, equal to [`Self::coherence`].
    pub fn coherence_via_commutators(&self, x: &ComplexMatrix) -> Result<f64, LinalgError> {
        let mut s = 0.0;
        for p in &self.projectors {
            s += frobenius_norm_sq(&commutator(x, p)?);
        }
        Ok(0.5 * s)
    }
}

/// Projectors per cluster of eigenvalues closer than `cluster_tol`.
pub fn spectral_basis(a: &ComplexMatrix, cluster_tol: f64) -> Result<SpectralBasis, LinalgError> {
    let (values, vectors) = hermitian_eigh(a)?;
    let d = values.len();
    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        let block = vectors.columns(start, end - start);
        projectors.push(block * block.adjoint());
        eigenvalues.push(values[start..end].iter().sum::<f64>() / (end - start) as f64);
        start = end;
    }
    Ok(SpectralBasis { eigenvalues, projectors })
}

/// ρ ↦ Σ Π ρ Π
pub fn dephase(state: &QuantumState, basis: &SpectralBasis) -> Result<QuantumState, LinalgError> {
    if basis.dim() != state.dim() {
        return Err(LinalgError::DimensionMismatch { left: basis.dim(), right: state.dim() });
    }
    Ok(QuantumState::from_trusted(basis.diagonal_part(state.rho())))
}

/// Outcome of a selective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub index: usize,
    pub eigenvalue: f64,
    pub probability: f64,
    pub state: QuantumState,
}

/// Samples an outcome with probability Tr(Π ρ) and returns Π ρ Π / p.
pub fn measure_selective<R: Rng + ?Sized>(
    state: &QuantumState,
    basis: &SpectralBasis,
    rng: &mut R,
) -> Result<Outcome, LinalgError> {
    if basis.dim() != state.dim() {
        return Err(LinalgError::DimensionMismatch { left: basis.dim(), right: state.dim() });
    }
    let probs: Vec<f64> = basis.projectors.iter().map(|p| linalg::trace(&(p * state.rho())).re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut index = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            index = i;
            break;
        }
        u -= p;
    }
    let p = &basis.projectors[index];
    let post = p * state.rho() * p / C64::new(probs[index], 0.0);
    Ok(Outcome {
        index,
        eigenvalue: basis.eigenvalues[index],
        probability: probs[index] / total,
        state: QuantumState::from_trusted(post),
    })
}

/// Trajectory with dephasing inserted at scheduled times. At each measurement
/// time two records appear: the pre-measurement state, then the
/// post-measurement state, whose index is listed in `post_measurement`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTrajectory {
    pub trajectory: Trajectory,
    pub post_measurement: Vec<usize>,
}

/// `propagate(ρ, times)` must return the evolution of ρ from `times[0]`
/// evaluated at every entry of `times` (including the first).
pub fn measure_nonselective_schedule<F>(
    mut propagate: F,
    rho0: &QuantumState,
    grid_times: &[f64],
    basis: &SpectralBasis,
    measurement_times: &[f64],
) -> Result<ScheduledTrajectory, MeasurementError>
where
    F: FnMut(&QuantumState, &[f64]) -> Result<Trajectory, DynamicsError>,
{
    if measurement_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeasurementError::Unsorted);
    }
    let (start, end) = match (grid_times.first(), grid_times.last()) {
        (Some(&s), Some(&e)) => (s, e),
        _ => {
            return Ok(ScheduledTrajectory {
                trajectory: Trajectory { times: vec![], states: vec![] },
                post_measurement: vec![],
            })
        }
    };
    for &t in measurement_times {
        if !(start..=end).contains(&t) {
            return Err(MeasurementError::OutsideGrid { t, start, end });
        }
    }

    let mut times = vec![start];
    let mut states = vec![rho0.clone()];
    let mut post_measurement = Vec::new();
    let mut current = rho0.clone();
    let mut t_now = start;
    let mut next_grid = 1;

    let mut advance = |t_target: f64,
                       inclusive_grid: bool,
                       current: &mut QuantumState,
                       t_now: &mut f64,
                       next_grid: &mut usize,
                       times: &mut Vec<f64>,
                       states: &mut Vec<QuantumState>|
     -> Result<(), MeasurementError> {
        let mut seg = vec![*t_now];
        while *next_grid < grid_times.len()
            && (grid_times[*next_grid] < t_target || (inclusive_grid && grid_times[*next_grid] <= t_target))
        {
            seg.push(grid_times[*next_grid]);
            *next_grid += 1;
        }
        if *seg.last().expect("nonempty") < t_target {
            seg.push(t_target);
        }
        if seg.len() > 1 {
            let traj = propagate(current, &seg)?;
            for (t, s) in traj.times.into_iter().zip(traj.states).skip(1) {
                times.push(t);
                states.push(s);
            }
            *current = states.last().expect("pushed").clone();
            *t_now = t_target;
        }
        Ok(())
    };

    for &tm in measurement_times {
        advance(tm, true, &mut current, &mut t_now, &mut next_grid, &mut times, &mut states)?;
        let post = dephase(&current, basis)?;
        times.push(tm);
        states.push(post.clone());
        post_measurement.push(states.len() - 1);
        current = post;
    }
    advance(end, true, &mut current, &mut t_now, &mut next_grid, &mut times, &mut states)?;
    Ok(ScheduledTrajectory { trajectory: Trajectory { times, states }, post_measurement })
}

/// `n` equally spaced measurement times strictly inside (start, end).
pub fn equally_spaced_times(start: f64, end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| start + (end - start) * k as f64 / (n + 1) as f64).collect()
}
