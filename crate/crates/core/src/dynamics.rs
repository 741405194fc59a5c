//! Time evolution: Liouville–von Neumann and Lindblad propagation of density
//! matrices, Schrödinger propagation of structured pure states, the closed-form
//! qubit-battery propagator and the spin-boson Bloch equations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate, IntegratorError, IntegratorOptions, IntegratorStats};
use crate::kron_ops::KronSum;
use crate::linalg::{self, c, hermitian_eigh, hermitian_part, hermiticity_deviation, real, ComplexMatrix, C64};
use crate::models::{
    pauli_combination, HamiltonianParts, LindbladChannel, ModelKind, QubitBatteryParams, SpinBosonParams,
};
use crate::operator::{BlochVector, QuantumState, StateError};

/// Bound on trace and Hermiticity drift along a trajectory.
pub const DRIFT_TOL: f64 = 1e-8;
/// Smallest eigenvalue tolerated before a trajectory is declared unphysical.
pub const POSITIVITY_TOL: f64 = -1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("initial state has dimension {got}, model needs {want}")]
    Dimension { got: usize, want: usize },
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("engine requires a {0:?} model")]
    WrongModel(ModelKind),
    #[error("state drifted at t = {t}: {what} = {value:e}")]
    Drift { t: f64, what: &'static str, value: f64 },
    #[error("negative eigenvalue {min_eigenvalue:e} at t = {t}")]
    Positivity { t: f64, min_eigenvalue: f64 },
}

/// Uniform grid with `n_steps + 1` points from `t_start` to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self, DynamicsError> {
        let g = Self { t_start, t_end, n_steps };
        g.validate()?;
        Ok(g)
    }

    /// Grid with `n_points` points (n_points ≥ 2).
    pub fn with_points(t_start: f64, t_end: f64, n_points: usize) -> Result<Self, DynamicsError> {
        Self::new(t_start, t_end, n_points.saturating_sub(1))
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(DynamicsError::Grid("endpoints must be finite".into()));
        }
        if self.t_end <= self.t_start {
            return Err(DynamicsError::Grid(format!("t_end {} must exceed t_start {}", self.t_end, self.t_start)));
        }
        if self.n_steps == 0 {
            return Err(DynamicsError::Grid("n_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps).map(|k| if k == self.n_steps { self.t_end } else { self.t_start + dt * k as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &QuantumState)> {
        self.times.last().copied().zip(self.states.last())
    }
}

/// Pure-state trajectory on a bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureTrajectory {
    pub dims: (usize, usize),
    pub times: Vec<f64>,
    pub psis: Vec<DVector<C64>>,
}

fn to_matrix(v: &[C64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(d, d, v)
}

/// D[ρ] = Σ γ (L ρ L† − ½{L†L, ρ})
pub fn dissipator(channels: &[LindbladChannel], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        let l = &ch.op;
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * real(0.5)) * real(ch.rate);
    }
    out
}

/// D*[X] = Σ γ (L† X L − ½{L†L, X})
pub fn dissipator_adjoint(channels: &[LindbladChannel], x: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(x.nrows(), x.ncols());
    for ch in channels {
        if ch.rate == 0.0 {
            continue;
        }
        let l = &ch.op;
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (&ld * x * l - (&ldl * x + x * &ldl) * real(0.5)) * real(ch.rate);
    }
    out
}

/// −(i/ħ)[H(t), ρ] (+ D[ρ] when `dissipate`)
pub fn liouvillian_rhs(parts: &HamiltonianParts, t: f64, rho: &ComplexMatrix, dissipate: bool) -> ComplexMatrix {
    let h = parts.h_tot(t);
    let comm = &h * rho - rho * &h;
    let mut out = comm * c(0.0, -1.0 / parts.hbar);
    if dissipate {
        out += dissipator(&parts.embedded_channels(), rho);
    }
    out
}

fn check_state(t: f64, rho: &ComplexMatrix, positivity: bool) -> Result<QuantumState, DynamicsError> {
    let herm = hermiticity_deviation(rho);
    if herm > DRIFT_TOL {
        return Err(DynamicsError::Drift { t, what: "hermiticity deviation", value: herm });
    }
    let rho = hermitian_part(rho);
    let tr = linalg::trace(&rho).re;
    if (tr - 1.0).abs() > DRIFT_TOL {
        return Err(DynamicsError::Drift { t, what: "trace deviation", value: tr - 1.0 });
    }
    if positivity {
        let (values, _) = hermitian_eigh(&rho).map_err(StateError::from)?;
        let min = values.first().copied().unwrap_or(0.0);
        if min < POSITIVITY_TOL {
            return Err(DynamicsError::Positivity { t, min_eigenvalue: min });
        }
    }
    Ok(QuantumState::from_trusted(rho))
}

fn evolve_density(
    parts: &HamiltonianParts,
    rho0: &QuantumState,
    times: &[f64],
    opts: &IntegratorOptions,
    dissipate: bool,
) -> Result<(Trajectory, IntegratorStats), DynamicsError> {
    let d = parts.total_dim();
    if rho0.dim() != d {
        return Err(DynamicsError::Dimension { got: rho0.dim(), want: d });
    }
    let channels = parts.embedded_channels();
    let hbar = parts.hbar;
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let rho = to_matrix(y, d);
        let h = parts.h_tot(t);
        let mut out = (&h * &rho - &rho * &h) * c(0.0, -1.0 / hbar);
        if dissipate {
            out += dissipator(&channels, &rho);
        }
        dy.copy_from_slice(out.as_slice());
    };
    let mut states = Vec::with_capacity(times.len());
    let mut failure = None;
    let stats =
        integrate(rhs, rho0.rho().as_slice(), times, opts, |_, t, y| match check_state(t, &to_matrix(y, d), true) {
            Ok(s) => {
                states.push(s);
                Ok(())
            }
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(msg)
            }
        });
    if let Some(e) = failure {
        return Err(e);
    }
    let stats = stats?;
    Ok((Trajectory { times: times.to_vec(), states }, stats))
}

/// ρ̇ = −(i/ħ)[H_tot(t), ρ], every output state re-validated.
pub fn evolve_von_neumann(
    parts: &HamiltonianParts,
    rho0: &QuantumState,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    grid.validate()?;
    evolve_von_neumann_at(parts, rho0, &grid.times(), opts)
}

/// Same as [`evolve_von_neumann`] on an arbitrary nondecreasing time list.
pub fn evolve_von_neumann_at(
    parts: &HamiltonianParts,
    rho0: &QuantumState,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    evolve_density(parts, rho0, times, opts, false).map(|(t, _)| t)
}

/// Lindblad master equation with positivity monitoring.
pub fn evolve_lindblad(
    parts: &HamiltonianParts,
    rho0: &QuantumState,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    grid.validate()?;
    evolve_lindblad_at(parts, rho0, &grid.times(), opts)
}

pub fn evolve_lindblad_at(
    parts: &HamiltonianParts,
    rho0: &QuantumState,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    evolve_density(parts, rho0, times, opts, true).map(|(t, _)| t)
}

/// H_tot(t) = Σ_j c_j(t) K_j + K_fixed, assembled once so that the
/// Schrödinger right-hand side never rebuilds subsystem operators.
pub struct StructuredHamiltonian {
    drive: crate::models::TimeFunction,
    driven: Vec<(f64, u32, KronSum)>,
    fixed: KronSum,
    dims: (usize, usize),
}

impl StructuredHamiltonian {
    pub fn new(parts: &HamiltonianParts) -> Self {
        let (d_s, d_e) = parts.dims();
        let mut fixed = KronSum::zero(d_s, d_e);
        let mut driven = Vec::new();
        for term in &parts.h_s_terms {
            let mut k = KronSum::zero(d_s, d_e);
            k.push_left(real(1.0), &term.op).expect("dims checked at build");
            if term.power == 0 {
                fixed = fixed.plus(&k.scaled(real(term.scale))).expect("same dims");
            } else {
                driven.push((term.scale, term.power, k));
            }
        }
        if let Some(h_e) = &parts.h_e {
            fixed.push_right(real(1.0), h_e).expect("dims checked at build");
        }
        if let Some(v) = &parts.v_se {
            fixed = fixed.plus(v).expect("same dims");
        }
        Self { drive: parts.drive, driven, fixed, dims: (d_s, d_e) }
    }

    /// out = H(t) ψ
    pub fn apply_into(&self, t: f64, psi: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        self.fixed.apply_into(psi, out);
        let f = self.drive.eval(t);
        for (scale, power, k) in &self.driven {
            let coef = scale * f.powi(*power as i32);
            k.apply_into(psi, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s * coef;
            }
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }
}

/// iħ ψ̇ = H_tot(t) ψ on the structured operator; `observe` sees every output
/// state, so large trajectories never have to be stored.
pub fn evolve_schrodinger_observe<O>(
    parts: &HamiltonianParts,
    psi0: &DVector<C64>,
    times: &[f64],
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<IntegratorStats, DynamicsError>
where
    O: FnMut(usize, f64, &DVector<C64>) -> Result<(), String>,
{
    let d = parts.total_dim();
    if psi0.len() != d {
        return Err(DynamicsError::Dimension { got: psi0.len(), want: d });
    }
    let h = StructuredHamiltonian::new(parts);
    let minus_i_over_hbar = c(0.0, -1.0 / parts.hbar);
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        h.apply_into(t, y, dy, &mut scratch);
        dy.iter_mut().for_each(|z| *z *= minus_i_over_hbar);
    };
    let mut drift = None;
    let stats = integrate(rhs, psi0.as_slice(), times, opts, |k, t, y| {
        let psi = DVector::from_column_slice(y);
        let norm_dev = (psi.norm_squared() - 1.0).abs();
        if norm_dev > DRIFT_TOL {
            drift = Some(DynamicsError::Drift { t, what: "norm deviation", value: norm_dev });
            return Err("norm drift".into());
        }
        observe(k, t, &psi)
    });
    if let Some(e) = drift {
        return Err(e);
    }
    Ok(stats?)
}

pub fn evolve_schrodinger(
    parts: &HamiltonianParts,
    psi0: &DVector<C64>,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<PureTrajectory, DynamicsError> {
    grid.validate()?;
    let times = grid.times();
    let mut psis = Vec::with_capacity(times.len());
    evolve_schrodinger_observe(parts, psi0, &times, opts, |_, _, psi| {
        psis.push(psi.clone());
        Ok(())
    })?;
    Ok(PureTrajectory { dims: parts.dims(), times, psis })
}

/// U(0→t) = e^{−iα₀t/ħ} (cos(|α|t/ħ) σ⁰ − i sin(|α|t/ħ) α̂·σ⃗)
pub fn qubit_propagator(p: &QubitBatteryParams, t: f64) -> ComplexMatrix {
    let alpha = p.alpha();
    let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    let phase = Complex64::from_polar(1.0, -p.alpha0() * t / p.hbar);
    if norm == 0.0 {
        return linalg::identity(2) * phase;
    }
    let theta = norm * t / p.hbar;
    let n = [alpha[0] / norm, alpha[1] / norm, alpha[2] / norm];
    let u = linalg::identity(2) * real(theta.cos()) + pauli_combination(0.0, n) * c(0.0, -theta.sin());
    u * phase
}

/// ρ(t) = U ρ₀ U† for t ≥ 0.
pub fn evolve_qubit_exact(p: &QubitBatteryParams, rho0: &QuantumState, t: f64) -> Result<QuantumState, DynamicsError> {
    if rho0.dim() != 2 {
        return Err(DynamicsError::Dimension { got: rho0.dim(), want: 2 });
    }
    let u = qubit_propagator(p, t);
    Ok(QuantumState::from_trusted(&u * rho0.rho() * u.adjoint()))
}

pub fn evolve_qubit_exact_bloch(p: &QubitBatteryParams, beta0: &BlochVector, t: f64) -> QuantumState {
    evolve_qubit_exact(p, &beta0.to_state(), t).expect("Bloch states are qubits")
}

/// The matrix Γ = [[γ, α₃/ħ, 0], [−α₃/ħ, γ, α₁/ħ], [0, −α₁/ħ, 0]].
pub fn spin_boson_gamma(p: &SpinBosonParams) -> DMatrix<f64> {
    let (a1, a3) = (p.alpha1 / p.hbar, p.alpha3 / p.hbar);
    DMatrix::from_row_slice(3, 3, &[p.gamma, a3, 0.0, -a3, p.gamma, a1, 0.0, -a1, 0.0])
}

/// Eigenvalues of Γ sorted by real part, then imaginary part.
pub fn spin_boson_gamma_eigenvalues(p: &SpinBosonParams) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = spin_boson_gamma(p).complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Generator G of β̇ = −Gβ implied by the master equation with L = σᶻ:
/// the dephasing channel damps β₁, β₂ at rate 2γ and the Hamiltonian
/// precession is (2/ħ) α⃗ × β⃗, so G = 2Γ.
pub fn spin_boson_bloch_generator(p: &SpinBosonParams) -> DMatrix<f64> {
    spin_boson_gamma(p) * 2.0
}

/// β(t) = exp(−G t) β(0) through the eigendecomposition of G. Falls back to
/// adaptive integration when G is (numerically) defective.
pub fn evolve_bloch_spin_boson(
    p: &SpinBosonParams,
    beta0: &BlochVector,
    grid: &TimeGrid,
) -> Result<Vec<BlochVector>, DynamicsError> {
    grid.validate()?;
    p.validate().map_err(|_| DynamicsError::WrongModel(ModelKind::SpinBoson))?;
    let g = spin_boson_bloch_generator(p);
    let times = grid.times();
    match eigen_propagator(&g) {
        Some((values, vectors, inverse)) => {
            let b0 = DVector::from_iterator(3, beta0.beta.iter().map(|&x| real(x)));
            let coeffs = &inverse * b0;
            Ok(times
                .iter()
                .map(|&t| {
                    let mut out = [0.0; 3];
                    for (k, lam) in values.iter().enumerate() {
                        let w = coeffs[k] * (-lam * (t - grid.t_start)).exp();
                        for (i, o) in out.iter_mut().enumerate() {
                            *o += (vectors[(i, k)] * w).re;
                        }
                    }
                    BlochVector { beta: out }
                })
                .collect())
        }
        None => bloch_ode(&g, beta0, &times),
    }
}

/// Integrates β̇ = −Gβ directly.
pub fn bloch_ode(g: &DMatrix<f64>, beta0: &BlochVector, times: &[f64]) -> Result<Vec<BlochVector>, DynamicsError> {
    let y0: Vec<C64> = beta0.beta.iter().map(|&x| real(x)).collect();
    let mut out = Vec::with_capacity(times.len());
    let opts = IntegratorOptions::with_tolerance(1e-12, 1e-14);
    integrate(
        |_, y, dy| {
            for i in 0..3 {
                dy[i] = -(0..3).map(|j| y[j] * g[(i, j)]).sum::<C64>();
            }
        },
        &y0,
        times,
        &opts,
        |_, _, y| {
            out.push(BlochVector { beta: [y[0].re, y[1].re, y[2].re] });
            Ok(())
        },
    )?;
    Ok(out)
}

type EigenParts = (Vec<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>);

// Eigenvectors of a real 3×3 matrix from cross products of rows of G − λI.
fn eigen_propagator(g: &DMatrix<f64>) -> Option<EigenParts> {
    let values: Vec<Complex64> = g.clone().complex_eigenvalues().iter().copied().collect();
    let scale = 1.0 + g.norm();
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (values[i] - values[j]).norm() < 1e-8 * scale {
                return None;
            }
        }
    }
    let mut vectors = DMatrix::<Complex64>::zeros(3, 3);
    for (k, lam) in values.iter().enumerate() {
        let m = DMatrix::<Complex64>::from_fn(3, 3, |i, j| real(g[(i, j)]) - if i == j { *lam } else { real(0.0) });
        let row = |i: usize| [m[(i, 0)], m[(i, 1)], m[(i, 2)]];
        let cross = |a: [Complex64; 3], b: [Complex64; 3]| {
            [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        };
        let candidates = [cross(row(0), row(1)), cross(row(0), row(2)), cross(row(1), row(2))];
        let best = candidates.iter().max_by(|a, b| vnorm(a).total_cmp(&vnorm(b))).copied().expect("three candidates");
        let n = vnorm(&best);
        if n < 1e-12 * scale * scale {
            return None;
        }
        for i in 0..3 {
            vectors[(i, k)] = best[i] / n;
        }
    }
    let inverse = vectors.clone().try_inverse()?;
    let cond = vectors.norm() * inverse.norm();
    if !cond.is_finite() || cond > 1e8 {
        return None;
    }
    Some((values, vectors, inverse))
}

fn vnorm(v: &[Complex64; 3]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Product of computational basis states |i⟩⊗|j⟩ as a vector.
pub fn product_basis_vector(dims: (usize, usize), i: usize, j: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dims.0 * dims.1);
    v[i * dims.1 + j] = real(1.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_exp, pauli_x, pauli_z, real_matrix_exp};
    use crate::models::{build_qubit_battery, build_spin_boson, build_two_spins, TimeFunction};
    use crate::sampling::{random_density_matrix, seeded_rng};

    fn sb() -> SpinBosonParams {
        SpinBosonParams { alpha1: 1.0, alpha3: 1.0, gamma: 0.25, hbar: 1.0 }
    }

    fn fig5() -> QubitBatteryParams {
        QubitBatteryParams { h0: 1.2, h3: 0.2, v0: 0.0, v: [0.5, 0.6, 0.0], hbar: 1.0 }
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let g = TimeGrid::with_points(0.0, 10.0, 1000).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 1000);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[999], 10.0);
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn time_independent_evolution_matches_matrix_exponential() {
        let parts = build_two_spins(TimeFunction::Constant { value: 0.8 }, 0.6, 1.0).unwrap();
        let mut rng = seeded_rng(1);
        let rho0 = QuantumState::new(random_density_matrix(4, &mut rng)).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, 6).unwrap();
        let traj = evolve_von_neumann(&parts, &rho0, &grid, &IntegratorOptions::default()).unwrap();
        let h = parts.h_tot(0.0);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let u = matrix_exp(&(&h * c(0.0, -t)));
            let want = QuantumState::from_trusted(&u * rho0.rho() * u.adjoint());
            assert!(s.trace_distance(&want) <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn zero_hamiltonian_leaves_state_unchanged() {
        let parts = build_two_spins(TimeFunction::Constant { value: 0.0 }, 0.0, 1.0).unwrap();
        let mut parts = parts;
        parts.h_e = None;
        let mut rng = seeded_rng(2);
        let rho0 = QuantumState::new(random_density_matrix(4, &mut rng)).unwrap();
        let traj =
            evolve_von_neumann(&parts, &rho0, &TimeGrid::new(0.0, 5.0, 5).unwrap(), &Default::default()).unwrap();
        for s in &traj.states {
            assert!(s.trace_distance(&rho0) < 1e-14);
        }
    }

    #[test]
    fn unitary_evolution_preserves_purity_and_spectrum() {
        let f = TimeFunction::SinusoidOffset { amplitude: 1.0, frequency: 1.0, phase: 0.0, offset: 2.0 };
        let parts = build_two_spins(f, 1.0, 1.0).unwrap();
        let mut rng = seeded_rng(3);
        let rho0 = QuantumState::new(random_density_matrix(4, &mut rng)).unwrap();
        let spec0 = rho0.eigenvalues();
        let traj =
            evolve_von_neumann(&parts, &rho0, &TimeGrid::new(0.0, 10.0, 20).unwrap(), &Default::default()).unwrap();
        for s in &traj.states {
            assert!((s.purity() - rho0.purity()).abs() < 1e-8);
            let spec = s.eigenvalues();
            for (a, b) in spec.iter().zip(&spec0) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lindblad_without_dissipation_matches_von_neumann() {
        let mut parts = build_spin_boson(SpinBosonParams { gamma: 0.0, ..sb() }).unwrap();
        let rho0 = BlochVector::new([0.3, -0.1, 0.6]).unwrap().to_state();
        let grid = TimeGrid::new(0.0, 8.0, 16).unwrap();
        let a = evolve_lindblad(&parts, &rho0, &grid, &Default::default()).unwrap();
        parts.lindblad.clear();
        let b = evolve_von_neumann(&parts, &rho0, &grid, &Default::default()).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(x.trace_distance(y) <= 1e-8);
        }
    }

    #[test]
    fn spin_boson_lindblad_matches_bloch_solution() {
        let p = sb();
        let parts = build_spin_boson(p).unwrap();
        let s3 = 1.0 / 3f64.sqrt();
        let beta0 = BlochVector::new([s3, s3, s3]).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 200).unwrap();
        let traj = evolve_lindblad(&parts, &beta0.to_state(), &grid, &Default::default()).unwrap();
        let bloch = evolve_bloch_spin_boson(&p, &beta0, &grid).unwrap();
        for (s, b) in traj.states.iter().zip(&bloch) {
            let got = BlochVector::from_state(s);
            for k in 0..3 {
                assert!((got.beta[k] - b.beta[k]).abs() <= 1e-7, "{:?} vs {:?}", got, b);
            }
        }
    }

    #[test]
    fn bloch_origin_is_steady() {
        let grid = TimeGrid::new(0.0, 10.0, 10).unwrap();
        let out = evolve_bloch_spin_boson(&sb(), &BlochVector::ORIGIN, &grid).unwrap();
        assert!(out.iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn gamma_eigenvalues_for_reference_parameters() {
        let ev = spin_boson_gamma_eigenvalues(&sb());
        assert!((ev[0].re - 0.124).abs() < 1e-3 && ev[0].im.abs() < 1e-12);
        assert!((ev[1].re - 0.188).abs() < 1e-3 && (ev[1].im + 1.407).abs() < 1e-3);
        assert!((ev[2].re - 0.188).abs() < 1e-3 && (ev[2].im - 1.407).abs() < 1e-3);
    }

    #[test]
    fn eigen_propagator_matches_pade_and_ode() {
        let g = spin_boson_bloch_generator(&sb());
        let beta0 = BlochVector::new([0.2, -0.5, 0.4]).unwrap();
        let grid = TimeGrid::new(0.0, 6.0, 12).unwrap();
        let eig = evolve_bloch_spin_boson(&sb(), &beta0, &grid).unwrap();
        let ode = bloch_ode(&g, &beta0, &grid.times()).unwrap();
        for ((t, a), b) in grid.times().iter().zip(&eig).zip(&ode) {
            let e = real_matrix_exp(&(&g * -*t));
            let want = &e * nalgebra::DVector::from_row_slice(&beta0.beta);
            for k in 0..3 {
                assert!((a.beta[k] - want[k]).abs() < 1e-10);
                assert!((b.beta[k] - want[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn defective_generator_falls_back_to_ode() {
        // Jordan block: no eigenbasis.
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        assert!(eigen_propagator(&g).is_none());
        let beta0 = BlochVector::new([0.1, 0.2, 0.3]).unwrap();
        let out = bloch_ode(&g, &beta0, &[0.0, 1.0]).unwrap();
        let want = real_matrix_exp(&(&g * -1.0)) * nalgebra::DVector::from_row_slice(&beta0.beta);
        for k in 0..3 {
            assert!((out[1].beta[k] - want[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn qubit_exact_basic_properties() {
        let p = fig5();
        let rho0 = BlochVector::new([0.0, 0.0, 0.5]).unwrap().to_state();
        assert!(evolve_qubit_exact(&p, &rho0, 0.0).unwrap().trace_distance(&rho0) < 1e-15);
        let alpha = p.alpha().iter().map(|a| a * a).sum::<f64>().sqrt();
        let period = std::f64::consts::PI / alpha;
        let back = evolve_qubit_exact(&p, &rho0, 2.0 * period).unwrap();
        assert!(back.trace_distance(&rho0) <= 1e-10);
        let zero = QubitBatteryParams { h0: 0.3, h3: 0.0, v0: 0.1, v: [0.0; 3], hbar: 1.0 };
        let u = qubit_propagator(&zero, 2.0);
        assert!((u.clone() * u.adjoint() - linalg::identity(2)).norm() < 1e-14);
    }

    #[test]
    fn qubit_exact_matches_integrator() {
        let p = fig5();
        let parts = build_qubit_battery(p).unwrap();
        let rho0 = BlochVector::new([0.0, 0.0, 0.5]).unwrap().to_state();
        let grid = TimeGrid::new(0.0, 10.0, 40).unwrap();
        let traj = evolve_von_neumann(&parts, &rho0, &grid, &Default::default()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = evolve_qubit_exact(&p, &rho0, *t).unwrap();
            assert!(exact.trace_distance(s) <= 1e-8, "t={t}");
        }
    }

    #[test]
    fn schrodinger_matches_von_neumann_for_spins() {
        let f = TimeFunction::ExpDecay { amplitude: 2.0, rate: 0.5 };
        let parts = build_two_spins(f, 1.0, 1.0).unwrap();
        let psi0 = product_basis_vector((2, 2), 0, 0);
        let grid = TimeGrid::new(0.0, 5.0, 10).unwrap();
        let pure = evolve_schrodinger(&parts, &psi0, &grid, &Default::default()).unwrap();
        let mixed =
            evolve_von_neumann(&parts, &QuantumState::pure(&psi0).unwrap(), &grid, &Default::default()).unwrap();
        for (psi, s) in pure.psis.iter().zip(&mixed.states) {
            let rho = QuantumState::pure(psi).unwrap();
            assert!(rho.trace_distance(s) < 1e-8);
        }
    }

    #[test]
    fn dissipator_kills_identity_and_adjoint_identity_holds() {
        let ch = vec![LindbladChannel { rate: 0.3, op: pauli_z() }, LindbladChannel { rate: 0.1, op: pauli_x() }];
        assert!(dissipator(&ch, &linalg::identity(2)).norm() < 1e-15);
        let mut rng = seeded_rng(8);
        let rho = random_density_matrix(2, &mut rng);
        let x = crate::sampling::random_hermitian(2, &mut rng);
        let lhs = linalg::trace(&(&x * dissipator(&ch, &rho)));
        let rhs = linalg::trace(&(&rho * dissipator_adjoint(&ch, &x)));
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
