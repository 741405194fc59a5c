//! Power, heat-flow and internal-energy-rate operators, the entropy-rate
//! superoperator and battery energy/power operators.

use thiserror::Error;

use crate::dynamics::dissipator_adjoint;
use crate::kron_ops::KronSum;
use crate::linalg::{c, commutator, identity, kron, matrix_log_hermitian, real, ComplexMatrix, LinalgError};
use crate::models::HamiltonianParts;
use crate::operator::{expectation, HermitianOperator, QuantumState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("model has no {0}")]
    Missing(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// W̊, Q̊, Ů = W̊ + Q̊ and U = H_S, all on the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOperators {
    pub t: f64,
    pub w_dot: HermitianOperator,
    pub q_dot: HermitianOperator,
    pub u_dot: HermitianOperator,
    pub u: HermitianOperator,
}

/// The same operators in Kronecker-sum form, for large truncated spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredFlows {
    pub t: f64,
    pub w_dot: KronSum,
    pub q_dot: KronSum,
    pub u_dot: KronSum,
    pub u: KronSum,
}

fn hermitian(m: ComplexMatrix, units: &str) -> Result<HermitianOperator, FlowError> {
    Ok(HermitianOperator::new(m, units)?)
}

/// W̊ = Ḣ_S ⊗ I, Q̊ = −(i/ħ)[H_S ⊗ I, V_SE].
pub fn flow_ops_structured(parts: &HamiltonianParts, t: f64) -> Result<StructuredFlows, FlowError> {
    let v = parts.v_se.as_ref().ok_or(FlowError::Missing("system-environment interaction"))?;
    let (d_s, d_e) = parts.dims();
    let h_s = parts.h_s(t);
    let mut w = KronSum::zero(d_s, d_e);
    w.push_left(real(1.0), &parts.h_s_dot(t))?;
    let q = v.left_commutator(&h_s, c(0.0, -1.0 / parts.hbar))?;
    let mut u = KronSum::zero(d_s, d_e);
    u.push_left(real(1.0), &h_s)?;
    let u_dot = w.plus(&q)?;
    Ok(StructuredFlows { t, w_dot: w, q_dot: q, u_dot, u })
}

pub fn flow_ops_hamiltonian(parts: &HamiltonianParts, t: f64) -> Result<FlowOperators, FlowError> {
    let s = flow_ops_structured(parts, t)?;
    let w_dot = hermitian(s.w_dot.to_dense(), "energy/time")?;
    let q_dot = hermitian(s.q_dot.to_dense(), "energy/time")?;
    let u_dot = hermitian(w_dot.matrix() + q_dot.matrix(), "energy/time")?;
    let u = hermitian(s.u.to_dense(), "energy")?;
    Ok(FlowOperators { t, w_dot, q_dot, u_dot, u })
}

/// W̊ = Ḣ_S, Q̊ = D*_t[H_S].
pub fn flow_ops_lindblad(parts: &HamiltonianParts, t: f64) -> Result<FlowOperators, FlowError> {
    if parts.lindblad.is_empty() {
        return Err(FlowError::Missing("Lindblad channels"));
    }
    let channels = parts.embedded_channels();
    let h_s = parts.embed_s(&parts.h_s(t));
    let w_dot = hermitian(parts.embed_s(&parts.h_s_dot(t)), "energy/time")?;
    let q_dot = hermitian(dissipator_adjoint(&channels, &h_s), "energy/time")?;
    let u_dot = hermitian(w_dot.matrix() + q_dot.matrix(), "energy/time")?;
    let u = hermitian(h_s, "energy")?;
    Ok(FlowOperators { t, w_dot, q_dot, u_dot, u })
}

/// Picks the Lindblad form when channels exist, the Hamiltonian form otherwise.
pub fn flow_ops(parts: &HamiltonianParts, t: f64) -> Result<FlowOperators, FlowError> {
    if parts.lindblad.is_empty() {
        flow_ops_hamiltonian(parts, t)
    } else {
        flow_ops_lindblad(parts, t)
    }
}

/// State-dependent entropy-rate operator −k_B D*[log ρ] and its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRate {
    pub operator: HermitianOperator,
    pub value: f64,
}

pub fn entropy_rate_superoperator(
    parts: &HamiltonianParts,
    state: &QuantumState,
    eps: f64,
    k_b: f64,
) -> Result<EntropyRate, FlowError> {
    if parts.lindblad.is_empty() {
        return Err(FlowError::Missing("Lindblad channels"));
    }
    let log_rho = matrix_log_hermitian(state.rho(), eps)?;
    let op = dissipator_adjoint(&parts.embedded_channels(), &log_rho) * real(-k_b);
    let operator = hermitian(op, "entropy/time")?;
    let value = expectation(&operator, state)?;
    Ok(EntropyRate { operator, value })
}

/// E_B = H₀, P_B^c = −(i/ħ)[H₀, V_S], optional P_B^o, P_B = P_B^c + P_B^o.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOperators {
    pub e_b: HermitianOperator,
    pub p_b_c: HermitianOperator,
    pub p_b_o: Option<HermitianOperator>,
    pub p_b: HermitianOperator,
}

fn closed_power(parts: &HamiltonianParts, t: f64) -> Result<(ComplexMatrix, ComplexMatrix), FlowError> {
    let h0 = parts.h_0.as_ref().ok_or(FlowError::Missing("battery Hamiltonian H0"))?;
    let v_s = parts.v_s_at(t).ok_or(FlowError::Missing("charging potential V_S"))?;
    let p = commutator(h0, &v_s)? * c(0.0, -1.0 / parts.hbar);
    Ok((h0.clone(), p))
}

pub fn battery_ops_closed(parts: &HamiltonianParts, t: f64) -> Result<BatteryOperators, FlowError> {
    let (h0, p) = closed_power(parts, t)?;
    let e_b = hermitian(parts.embed_s(&h0), "energy")?;
    let p_b_c = hermitian(parts.embed_s(&p), "energy/time")?;
    Ok(BatteryOperators { e_b, p_b: p_b_c.clone(), p_b_c, p_b_o: None })
}

/// Open battery: P_B^o = D*[H₀] with Lindblad channels, otherwise
/// P_B^o = −(i/ħ)[H₀ ⊗ I, V_SE].
pub fn battery_ops_open(parts: &HamiltonianParts, t: f64) -> Result<BatteryOperators, FlowError> {
    let h0 = parts.h_0.as_ref().ok_or(FlowError::Missing("battery Hamiltonian H0"))?;
    let p_c = match parts.v_s_at(t) {
        Some(v_s) => commutator(h0, &v_s)? * c(0.0, -1.0 / parts.hbar),
        None => ComplexMatrix::zeros(parts.d_s, parts.d_s),
    };
    let p_o = if !parts.lindblad.is_empty() {
        dissipator_adjoint(&parts.embedded_channels(), &parts.embed_s(h0))
    } else if let Some(v) = &parts.v_se {
        v.left_commutator(h0, c(0.0, -1.0 / parts.hbar))?.to_dense()
    } else {
        return Err(FlowError::Missing("environment coupling or Lindblad channels"));
    };
    let e_b = hermitian(parts.embed_s(h0), "energy")?;
    let p_b_c = hermitian(parts.embed_s(&p_c), "energy/time")?;
    let p_b_o = hermitian(p_o, "energy/time")?;
    let p_b = hermitian(p_b_c.matrix() + p_b_o.matrix(), "energy/time")?;
    Ok(BatteryOperators { e_b, p_b_c, p_b_o: Some(p_b_o), p_b })
}

/// Battery operators for whichever description the model carries.
pub fn battery_ops(parts: &HamiltonianParts, t: f64) -> Result<BatteryOperators, FlowError> {
    if parts.lindblad.is_empty() && parts.v_se.is_none() {
        battery_ops_closed(parts, t)
    } else {
        battery_ops_open(parts, t)
    }
}

/// D*[V_S] embedded on the joint space (Lindblad models).
pub fn dissipative_potential_term(parts: &HamiltonianParts, t: f64) -> Result<ComplexMatrix, FlowError> {
    let v_s = parts.v_s_at(t).ok_or(FlowError::Missing("charging potential V_S"))?;
    Ok(dissipator_adjoint(&parts.embedded_channels(), &parts.embed_s(&v_s)))
}

/// A ⊗ I_E for an operator given on the system only.
pub fn embed_left(a: &ComplexMatrix, d_e: usize) -> ComplexMatrix {
    kron(a, &identity(d_e))
}
