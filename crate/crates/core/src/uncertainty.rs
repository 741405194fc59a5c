//! Variances, covariances and Robertson–Schrödinger bounds, the derived
//! bounds between heat flow, work rate and internal energy, the commutator
//! probe ℬ and closed-form references for the worked examples.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::dissipator_adjoint;
use crate::flows::{dissipative_potential_term, FlowError};
use crate::kron_ops::KronSum;
use crate::linalg::{
    c, commutator, frobenius_norm_sq, kron, matrix_log_hermitian, partial_trace, pauli_x, pauli_y, pauli_z, real,
    trace_product, ComplexMatrix, LinalgError, Subsystem, C64,
};
use crate::measurement::{spectral_basis, SpectralBasis, CLUSTER_TOL};
use crate::models::{HamiltonianParts, SpinBosonParams, TwoOscillatorOps};
use crate::operator::{BlochVector, HermitianOperator, QuantumState};

/// Below this a variance in a denominator counts as zero.
pub const VANISHING_VARIANCE: f64 = 1e-14;

/// √max(x, 0)
pub fn sqrt_clamped(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

/// First and second moments of a pair of Hermitian operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_a: f64,
    pub mean_b: f64,
    pub sq_a: f64,
    pub sq_b: f64,
    /// ⟨AB⟩; its real part is ½⟨{A,B}⟩ and ⟨[A,B]⟩ = 2i Im⟨AB⟩.
    pub ab: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
    /// ¼|⟨[A,B]⟩|²
    pub comm_term: f64,
    /// comm_term + cov²
    pub rs_bound: f64,
    /// var_a · var_b
    pub product: f64,
    pub slack: f64,
}

impl UncertaintyReport {
    pub fn from_moments(m: Moments) -> Self {
        let var_a = m.sq_a - m.mean_a * m.mean_a;
        let var_b = m.sq_b - m.mean_b * m.mean_b;
        let cov_ab = m.ab.re - m.mean_a * m.mean_b;
        let comm_term = m.ab.im * m.ab.im;
        Self::from_parts(m.mean_a, m.mean_b, var_a, var_b, cov_ab, comm_term)
    }

    pub fn from_parts(mean_a: f64, mean_b: f64, var_a: f64, var_b: f64, cov_ab: f64, comm_term: f64) -> Self {
        let rs_bound = comm_term + cov_ab * cov_ab;
        let product = var_a * var_b;
        Self { mean_a, mean_b, var_a, var_b, cov_ab, comm_term, rs_bound, product, slack: product - rs_bound }
    }

    pub fn sigma_a(&self) -> f64 {
        sqrt_clamped(self.var_a)
    }

    pub fn sigma_b(&self) -> f64 {
        sqrt_clamped(self.var_b)
    }

    /// Report for the swapped pair (B, A).
    pub fn swapped(&self) -> Self {
        Self::from_parts(self.mean_b, self.mean_a, self.var_b, self.var_a, self.cov_ab, self.comm_term)
    }
}

fn moments_dense(a: &ComplexMatrix, b: &ComplexMatrix, rho: &ComplexMatrix) -> Result<Moments, LinalgError> {
    crate::linalg::ensure_same_dim(a, rho)?;
    crate::linalg::ensure_same_dim(b, rho)?;
    let ra = rho * a;
    let rb = rho * b;
    Ok(Moments {
        mean_a: crate::linalg::trace(&ra).re,
        mean_b: crate::linalg::trace(&rb).re,
        sq_a: trace_product(&ra, a)?.re,
        sq_b: trace_product(&rb, b)?.re,
        ab: trace_product(&ra, b)?,
    })
}

fn moments_pure(a: &KronSum, b: &KronSum, psi: &DVector<C64>) -> Moments {
    let apsi = a.apply(psi);
    let bpsi = b.apply(psi);
    Moments {
        mean_a: psi.dotc(&apsi).re,
        mean_b: psi.dotc(&bpsi).re,
        sq_a: apsi.norm_squared(),
        sq_b: bpsi.norm_squared(),
        ab: apsi.dotc(&bpsi),
    }
}

/// Robertson–Schrödinger report for (A, B) in state ρ.
pub fn rs_report(
    a: &HermitianOperator,
    b: &HermitianOperator,
    state: &QuantumState,
) -> Result<UncertaintyReport, LinalgError> {
    rs_report_matrices(a.matrix(), b.matrix(), state.rho())
}

/// As [`rs_report`] on raw matrices assumed Hermitian.
pub fn rs_report_matrices(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    rho: &ComplexMatrix,
) -> Result<UncertaintyReport, LinalgError> {
    Ok(UncertaintyReport::from_moments(moments_dense(a, b, rho)?))
}

/// Operators given on S only, evaluated against ρ_S = Tr_E ρ.
pub fn rs_report_subsystem(
    a_s: &HermitianOperator,
    b_s: &HermitianOperator,
    state: &QuantumState,
    dims: (usize, usize),
) -> Result<UncertaintyReport, LinalgError> {
    let rho_s = partial_trace(state.rho(), dims, Subsystem::S)?;
    rs_report_matrices(a_s.matrix(), b_s.matrix(), &rho_s)
}

/// A state on S⊗E stored either as a density matrix or as a pure vector.
#[derive(Debug, Clone, Copy)]
pub enum JointState<'a> {
    Mixed(&'a QuantumState),
    Pure(&'a DVector<C64>),
}

impl JointState<'_> {
    pub fn dim(&self) -> usize {
        match self {
            JointState::Mixed(s) => s.dim(),
            JointState::Pure(psi) => psi.len(),
        }
    }

    /// ⟨K⟩ for a structured operator.
    pub fn expect(&self, k: &KronSum) -> C64 {
        match self {
            JointState::Pure(psi) => k.expectation(psi),
            JointState::Mixed(s) => {
                let (d_s, d_e) = k.dims();
                let rho = s.rho();
                let mut acc = C64::new(0.0, 0.0);
                for t in k.terms() {
                    // Tr(ρ (L ⊗ R)) = Σ ρ_{(i j),(k l)} L_{k i} R_{l j}
                    let l = t.left.as_ref().map(|o| o.dense().clone()).unwrap_or_else(|| crate::linalg::identity(d_s));
                    let r = t.right.as_ref().map(|o| o.dense().clone()).unwrap_or_else(|| crate::linalg::identity(d_e));
                    let mut s_term = C64::new(0.0, 0.0);
                    for i in 0..d_s {
                        for kk in 0..d_s {
                            let lv = l[(kk, i)];
                            if lv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for j in 0..d_e {
                                for ll in 0..d_e {
                                    let rv = r[(ll, j)];
                                    if rv != C64::new(0.0, 0.0) {
                                        s_term += rho[(i * d_e + j, kk * d_e + ll)] * lv * rv;
                                    }
                                }
                            }
                        }
                    }
                    acc += t.coef * s_term;
                }
                acc
            }
        }
    }
}

/// RS report for structured operators; pure states never form a dense matrix.
pub fn rs_report_structured(a: &KronSum, b: &KronSum, state: JointState<'_>) -> Result<UncertaintyReport, LinalgError> {
    match state {
        JointState::Pure(psi) => {
            if a.dim() != psi.len() || b.dim() != psi.len() {
                return Err(LinalgError::DimensionMismatch { left: a.dim(), right: psi.len() });
            }
            Ok(UncertaintyReport::from_moments(moments_pure(a, b, psi)))
        }
        JointState::Mixed(s) => rs_report_matrices(&a.to_dense(), &b.to_dense(), s.rho()),
    }
}

/// ¼|Tr([A,B]ρ)|²
pub fn commutator_probe(a: &ComplexMatrix, b: &ComplexMatrix, rho: &ComplexMatrix) -> Result<f64, LinalgError> {
    let z = trace_product(&commutator(a, b)?, rho)?;
    Ok(0.25 * z.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TPlusMinus {
    pub t_plus: f64,
    pub t_minus: f64,
}

impl TPlusMinus {
    /// t± = √(comm + cov²) ± cov from the (Q̊, W̊) report.
    pub fn from_report(r: &UncertaintyReport) -> Self {
        let root = sqrt_clamped(r.rs_bound);
        Self { t_plus: root + r.cov_ab, t_minus: root - r.cov_ab }
    }
}

pub fn t_plus_minus(
    q: &HermitianOperator,
    w: &HermitianOperator,
    state: &QuantumState,
) -> Result<TPlusMinus, LinalgError> {
    Ok(TPlusMinus::from_report(&rs_report(q, w, state)?))
}

/// Bracket on σ²_Ů built from σ_Q̊, σ_W̊ and t±.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
}

impl Window {
    pub fn from_report(qw: &UncertaintyReport) -> Self {
        let t = TPlusMinus::from_report(qw);
        let (sq, sw) = (qw.sigma_a(), qw.sigma_b());
        Self { lower: (sq - sw).powi(2) + 2.0 * t.t_plus, upper: (sq + sw).powi(2) - 2.0 * t.t_minus }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lower - tol && x <= self.upper + tol
    }
}

pub fn sigma_udot_window(
    q: &HermitianOperator,
    w: &HermitianOperator,
    state: &QuantumState,
) -> Result<Window, LinalgError> {
    Ok(Window::from_report(&rs_report(q, w, state)?))
}

/// Lower bounds on σ²_U.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaUBounds {
    pub var_u: f64,
    /// rs(U,Ů) over the relaxed denominator (σ_Q̊+σ_W̊)² − 2t₋.
    pub via_udot: f64,
    /// rs(U,Ů) over σ²_Ů itself.
    pub via_udot_direct: f64,
    pub via_qdot: f64,
    pub via_wdot: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= VANISHING_VARIANCE {
        0.0
    } else {
        num / den
    }
}

impl SigmaUBounds {
    /// Reports for the pairs (U,Ů), (U,Q̊), (U,W̊) and (Q̊,W̊).
    pub fn from_reports(
        u_udot: &UncertaintyReport,
        u_q: &UncertaintyReport,
        u_w: &UncertaintyReport,
        q_w: &UncertaintyReport,
    ) -> Self {
        let window = Window::from_report(q_w);
        Self {
            var_u: u_udot.var_a,
            via_udot: ratio(u_udot.rs_bound, window.upper),
            via_udot_direct: ratio(u_udot.rs_bound, u_udot.var_b),
            via_qdot: ratio(u_q.rs_bound, u_q.var_b),
            via_wdot: ratio(u_w.rs_bound, u_w.var_b),
        }
    }

    pub fn max_bound(&self) -> f64 {
        self.via_udot.max(self.via_udot_direct).max(self.via_qdot).max(self.via_wdot)
    }
}

pub fn sigma_u_bounds(
    u: &HermitianOperator,
    q: &HermitianOperator,
    w: &HermitianOperator,
    udot: &HermitianOperator,
    state: &QuantumState,
) -> Result<SigmaUBounds, LinalgError> {
    Ok(SigmaUBounds::from_reports(
        &rs_report(u, udot, state)?,
        &rs_report(u, q, state)?,
        &rs_report(u, w, state)?,
        &rs_report(q, w, state)?,
    ))
}

/// Lower bounds on σ_Q̊σ_W̊ for the two-spin model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSpinBound {
    /// (|d f²/dt|/ħ) √(⟨V⟩² + g²⟨σʸσᶻ⟩²⟨σˣ⊗I⟩²)
    pub exact: f64,
    /// (|d f²/dt|/ħ) |⟨V⟩|, the commutator term alone.
    pub robertson: f64,
}

pub fn qw_bound_two_spins(
    f: f64,
    fdot: f64,
    g: f64,
    hbar: f64,
    state: &QuantumState,
) -> Result<TwoSpinBound, LinalgError> {
    let id = crate::linalg::identity(2);
    let rho = state.rho();
    let v = g * trace_product(&kron(&pauli_z(), &pauli_z()), rho)?.re;
    let yz = trace_product(&kron(&pauli_y(), &pauli_z()), rho)?.re;
    let xi = trace_product(&kron(&pauli_x(), &id), rho)?.re;
    let rate = (2.0 * f * fdot).abs() / hbar;
    Ok(TwoSpinBound { exact: rate * (v * v + (g * yz * xi).powi(2)).sqrt(), robertson: rate * v.abs() })
}

/// Closed-form σ²_Q̊σ²_W̊ lower bound for the coupled oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorBound {
    /// ħ²(ωω̇)²⟨V⟩²
    pub comm_term: f64,
    /// ωω̇(2g⟨x_a²⟩⟨p_a x_b⟩ − iħ⟨V⟩ − ⟨p_a x_a V⟩)
    pub cov: f64,
    /// comm_term + cov², bounds σ²_Q̊σ²_W̊
    pub rs_bound: f64,
    /// √rs_bound, bounds σ_Q̊σ_W̊
    pub bound: f64,
}

pub fn qw_bound_two_oscillators(
    ops: &TwoOscillatorOps,
    omega_a: f64,
    omega_a_dot: f64,
    state: JointState<'_>,
) -> Result<OscillatorBound, LinalgError> {
    let (d_s, d_e) = (ops.a.x.nrows(), ops.b.x.nrows());
    if state.dim() != d_s * d_e {
        return Err(LinalgError::DimensionMismatch { left: d_s * d_e, right: state.dim() });
    }
    let g = ops.g;
    let hbar = ops.a.hbar;
    let (x, p, xb) = (&ops.a.x, &ops.a.p, &ops.b.x);
    let single = |l: &ComplexMatrix, r: Option<&ComplexMatrix>| -> Result<C64, LinalgError> {
        let mut k = KronSum::zero(d_s, d_e);
        match r {
            Some(r) => k.push_product(real(1.0), l, r)?,
            None => k.push_left(real(1.0), l)?,
        }
        Ok(state.expect(&k))
    };
    let x2 = single(&(x * x), None)?.re;
    let pa_xb = single(p, Some(xb))?;
    let v = 2.0 * g * single(x, Some(xb))?.re;
    let pxv = single(&(p * x * x), Some(xb))? * real(2.0 * g);
    let ww = omega_a * omega_a_dot;
    let cov = ww * (pa_xb * real(2.0 * g * x2) - c(0.0, hbar * v) - pxv).re;
    let comm_term = (hbar * ww * v).powi(2);
    let rs_bound = comm_term + cov * cov;
    Ok(OscillatorBound { comm_term, cov, rs_bound, bound: rs_bound.sqrt() })
}

/// ℬ together with the two upper bounds that only see coherences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeBounds {
    pub probe: f64,
    /// min(¼‖[A,C_A(ρ)]‖²‖B‖², ¼‖[B,C_B(ρ)]‖²‖A‖²)
    pub cs_bound: f64,
    /// ‖[A,B]‖²_F
    pub commutator_norm_sq: f64,
    /// 4‖A‖²_F ℂ_A(B)
    pub coherence_bound: f64,
    /// ℂ_A(B) = ‖C_A(B)‖²_F
    pub coherence: f64,
    /// ½ Σ_j ‖[B, Π_j]‖²_F
    pub coherence_dual: f64,
}

pub fn probe_upper_bounds(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    rho: &ComplexMatrix,
) -> Result<ProbeBounds, LinalgError> {
    let basis_a = spectral_basis(a, CLUSTER_TOL)?;
    let basis_b = spectral_basis(b, CLUSTER_TOL)?;
    probe_upper_bounds_with(a, b, rho, &basis_a, &basis_b)
}

pub fn probe_upper_bounds_with(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    rho: &ComplexMatrix,
    basis_a: &SpectralBasis,
    basis_b: &SpectralBasis,
) -> Result<ProbeBounds, LinalgError> {
    let probe = commutator_probe(a, b, rho)?;
    let na = frobenius_norm_sq(a);
    let nb = frobenius_norm_sq(b);
    let via_a = 0.25 * frobenius_norm_sq(&commutator(a, &basis_a.off_diagonal_part(rho))?) * nb;
    let via_b = 0.25 * frobenius_norm_sq(&commutator(b, &basis_b.off_diagonal_part(rho))?) * na;
    let coherence = basis_a.coherence(b);
    Ok(ProbeBounds {
        probe,
        cs_bound: via_a.min(via_b),
        commutator_norm_sq: frobenius_norm_sq(&commutator(a, b)?),
        coherence_bound: 4.0 * na * coherence,
        coherence,
        coherence_dual: basis_a.coherence_via_commutators(b)?,
    })
}

/// ℬ(E_B, P_B^c) for the step-charged qubit with H = α₀ + α⃗·σ⃗ after the step,
/// starting from Bloch vector `beta` at t = 0.
pub fn qubit_battery_bound_exact(h3: f64, v: [f64; 3], beta: &BlochVector, alpha: [f64; 3], t: f64, hbar: f64) -> f64 {
    let b = beta.beta;
    let w = [v[0], v[1], 0.0];
    let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let a2 = dot(alpha, alpha);
    let wb = if a2 == 0.0 {
        dot(w, b)
    } else {
        let a = a2.sqrt();
        let theta = 2.0 * a * t / hbar;
        let axb =
            [alpha[1] * b[2] - alpha[2] * b[1], alpha[2] * b[0] - alpha[0] * b[2], alpha[0] * b[1] - alpha[1] * b[0]];
        (a2 * dot(w, b) * theta.cos()
            + a * dot(w, axb) * theta.sin()
            + dot(w, alpha) * dot(alpha, b) * (1.0 - theta.cos()))
            / a2
    };
    (2.0 * h3 * h3 / hbar * wb).powi(2)
}

/// P = −2α₁γσˣ + (2α₃α₁/ħ)σʸ, the spin-boson battery power.
pub fn spin_boson_power_operator(p: &SpinBosonParams) -> ComplexMatrix {
    pauli_x() * real(-2.0 * p.alpha1 * p.gamma) + pauli_y() * real(2.0 * p.alpha3 * p.alpha1 / p.hbar)
}

/// Closed-form report for (E_B, P) with E_B = α₃σᶻ on a Bloch state.
pub fn spin_boson_report(p: &SpinBosonParams, beta: &BlochVector) -> UncertaintyReport {
    let [b1, b2, b3] = beta.beta;
    let (a1, a3, g, hbar) = (p.alpha1, p.alpha3, p.gamma, p.hbar);
    let k = g * b1 - a3 * b2 / hbar;
    let mean_e = a3 * b3;
    let mean_p = -2.0 * a1 * k;
    let var_e = a3 * a3 * (1.0 - b3 * b3);
    let var_p = 4.0 * a1 * a1 * ((g * g + a3 * a3 / (hbar * hbar)) - k * k);
    let comm = 4.0 * a1 * a1 * a3 * a3 * (a3 * b1 / hbar + g * b2).powi(2);
    let cov = 2.0 * a1 * a3 * b3 * k;
    UncertaintyReport::from_parts(mean_e, mean_p, var_e, var_p, cov, comm)
}

/// Power operator of a Lindblad battery: P_B^c + D*[V_S].
pub fn open_battery_power(parts: &HamiltonianParts, t: f64) -> Result<ComplexMatrix, FlowError> {
    let ops = crate::flows::battery_ops(parts, t)?;
    Ok(ops.p_b_c.matrix() + dissipative_potential_term(parts, t)?)
}

/// ℬ between D*[H_S] and the entropy-rate operator, for the dephasing qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyHeatProbe {
    /// commutator_probe(D*[H_S], D*[log ρ], ρ)
    pub direct: f64,
    /// γ⁴|Tr(σᶻ[H_S, log ρ]σᶻρ)|²
    pub closed_form: f64,
    /// γ⁴α₃²|Tr(σᶻ[σᶻ, log ρ]σᶻρ)|², the V_S = 0 specialisation
    pub reduced_v0: f64,
}

pub fn entropy_heat_probe_spin_boson(
    parts: &HamiltonianParts,
    state: &QuantumState,
    eps: f64,
) -> Result<EntropyHeatProbe, FlowError> {
    let channel = parts.lindblad.first().ok_or(FlowError::Missing("Lindblad channels"))?;
    let gamma = channel.rate;
    let h_s = parts.h_s(0.0);
    let rho = state.rho();
    let log_rho = matrix_log_hermitian(rho, eps)?;
    let channels = parts.embedded_channels();
    let q = dissipator_adjoint(&channels, &h_s);
    let s = dissipator_adjoint(&channels, &log_rho);
    let direct = commutator_probe(&q, &s, rho)?;
    let z = pauli_z();
    let sandwich = |x: &ComplexMatrix| -> Result<f64, LinalgError> {
        Ok(trace_product(&(&z * commutator(x, &log_rho)? * &z), rho)?.norm_sqr())
    };
    let alpha3 = parts.h_0.as_ref().map(|h| 0.5 * trace_product(h, &z).map(|v| v.re).unwrap_or(0.0)).unwrap_or(0.0);
    Ok(EntropyHeatProbe {
        direct,
        closed_form: gamma.powi(4) * sandwich(&h_s)?,
        reduced_v0: gamma.powi(4) * alpha3 * alpha3 * sandwich(&z)?,
    })
}
