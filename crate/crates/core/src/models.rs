//! The four example systems: two coupled spins, two coupled oscillators in a
//! truncated Fock space, a step-charged qubit battery and a dephasing qubit
//! (spin-boson) battery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kron_ops::KronSum;
use crate::linalg::{self, c, identity, kron, pauli_x, pauli_y, pauli_z, real, ComplexMatrix, LinalgError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("parameter `{name}` out of range: {reason}")]
    OutOfRange { name: &'static str, reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Scalar drive with an analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    /// value
    Constant { value: f64 },
    /// amplitude · exp(−rate · t)
    ExpDecay { amplitude: f64, rate: f64 },
    /// amplitude · sin(frequency · t + phase) + offset
    SinusoidOffset {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        offset: f64,
    },
    /// `before` for t < at, `after` for t ≥ at
    Step { at: f64, before: f64, after: f64 },
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFunction::Constant { value } => value,
            TimeFunction::ExpDecay { amplitude, rate } => amplitude * (-rate * t).exp(),
            TimeFunction::SinusoidOffset { amplitude, frequency, phase, offset } => {
                amplitude * (frequency * t + phase).sin() + offset
            }
            TimeFunction::Step { at, before, after } => {
                if t >= at {
                    after
                } else {
                    before
                }
            }
        }
    }

    /// Derivative away from the step discontinuity (zero there by convention).
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeFunction::Constant { .. } | TimeFunction::Step { .. } => 0.0,
            TimeFunction::ExpDecay { amplitude, rate } => -rate * amplitude * (-rate * t).exp(),
            TimeFunction::SinusoidOffset { amplitude, frequency, phase, .. } => {
                amplitude * frequency * (frequency * t + phase).cos()
            }
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            TimeFunction::Constant { value } => vec![("value", value)],
            TimeFunction::ExpDecay { amplitude, rate } => vec![("amplitude", amplitude), ("rate", rate)],
            TimeFunction::SinusoidOffset { amplitude, frequency, phase, offset } => {
                vec![("amplitude", amplitude), ("frequency", frequency), ("phase", phase), ("offset", offset)]
            }
            TimeFunction::Step { at, before, after } => vec![("at", at), ("before", before), ("after", after)],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.params() {
            finite(name, value)?;
        }
        Ok(())
    }
}

/// `scale · f(t)^power · op`, with f the model drive.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenTerm {
    pub scale: f64,
    pub power: u32,
    pub op: ComplexMatrix,
}

impl DrivenTerm {
    pub fn constant(op: ComplexMatrix) -> Self {
        Self { scale: 1.0, power: 0, op }
    }

    pub fn coefficient(&self, drive: &TimeFunction, t: f64) -> f64 {
        self.scale * drive.eval(t).powi(self.power as i32)
    }

    pub fn coefficient_rate(&self, drive: &TimeFunction, t: f64) -> f64 {
        if self.power == 0 {
            return 0.0;
        }
        let p = self.power as i32;
        self.scale * p as f64 * drive.eval(t).powi(p - 1) * drive.derivative(t)
    }

    pub fn at(&self, drive: &TimeFunction, t: f64) -> ComplexMatrix {
        &self.op * real(self.coefficient(drive, t))
    }
}

/// Jump operator L with constant rate γ, acting on the system factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladChannel {
    pub rate: f64,
    pub op: ComplexMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoSpins,
    TwoOscillators,
    QubitBattery,
    SpinBoson,
}

/// Hamiltonian pieces of a model. Subsystem operators are stored unembedded;
/// `d_e == 1` means there is no explicit environment.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParts {
    pub kind: ModelKind,
    pub hbar: f64,
    pub d_s: usize,
    pub d_e: usize,
    pub drive: TimeFunction,
    pub h_s_terms: Vec<DrivenTerm>,
    pub h_e: Option<ComplexMatrix>,
    pub v_se: Option<KronSum>,
    pub h_0: Option<ComplexMatrix>,
    pub v_s: Option<DrivenTerm>,
    pub lindblad: Vec<LindbladChannel>,
}

impl HamiltonianParts {
    pub fn dims(&self) -> (usize, usize) {
        (self.d_s, self.d_e)
    }

    pub fn total_dim(&self) -> usize {
        self.d_s * self.d_e
    }

    pub fn h_s(&self, t: f64) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.d_s, self.d_s);
        for term in &self.h_s_terms {
            h += term.at(&self.drive, t);
        }
        h
    }

    /// Ḣ_S from the analytic drive derivative.
    pub fn h_s_dot(&self, t: f64) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.d_s, self.d_s);
        for term in &self.h_s_terms {
            h += &term.op * real(term.coefficient_rate(&self.drive, t));
        }
        h
    }

    pub fn v_s_at(&self, t: f64) -> Option<ComplexMatrix> {
        self.v_s.as_ref().map(|v| v.at(&self.drive, t))
    }

    /// H_S ⊗ I + V_SE + I ⊗ H_E in structured form.
    pub fn h_tot_structured(&self, t: f64) -> KronSum {
        let mut k = KronSum::zero(self.d_s, self.d_e);
        for term in &self.h_s_terms {
            let coef = term.coefficient(&self.drive, t);
            if coef != 0.0 {
                k.push_left(real(coef), &term.op).expect("term dims checked at build");
            }
        }
        if let Some(h_e) = &self.h_e {
            k.push_right(real(1.0), h_e).expect("h_e dims checked at build");
        }
        if let Some(v) = &self.v_se {
            k = k.plus(v).expect("v_se dims checked at build");
        }
        k
    }

    pub fn h_tot(&self, t: f64) -> ComplexMatrix {
        self.h_tot_structured(t).to_dense()
    }

    /// Jump operators embedded as L ⊗ I_E.
    pub fn embedded_channels(&self) -> Vec<LindbladChannel> {
        self.lindblad.iter().map(|ch| LindbladChannel { rate: ch.rate, op: self.embed_s(&ch.op) }).collect()
    }

    /// A ⊗ I_E
    pub fn embed_s(&self, a: &ComplexMatrix) -> ComplexMatrix {
        if self.d_e == 1 {
            a.clone()
        } else {
            kron(a, &identity(self.d_e))
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let herm = |m: &ComplexMatrix| -> Result<(), ModelError> {
            linalg::validate_matrix(m)?;
            let deviation = linalg::hermiticity_deviation(m);
            if deviation > 1e-12 * (1.0 + m.norm()) {
                return Err(LinalgError::NotHermitian { deviation }.into());
            }
            Ok(())
        };
        for term in &self.h_s_terms {
            herm(&term.op)?;
        }
        if let Some(h) = &self.h_e {
            herm(h)?;
        }
        if let Some(h) = &self.h_0 {
            herm(h)?;
        }
        if let Some(v) = &self.v_se {
            if v.dim() <= 256 {
                herm(&v.to_dense())?;
            } else {
                check_hermitian_action(v)?;
            }
        }
        Ok(())
    }
}

// ⟨x, V y⟩ = ⟨V x, y⟩ on a few fixed pseudo-random vectors, so large
// structured operators never become dense.
fn check_hermitian_action(v: &KronSum) -> Result<(), ModelError> {
    let d = v.dim();
    let vector = |k: usize| {
        nalgebra::DVector::from_fn(d, |i, _| {
            let phase = ((i * 7919 + k * 104_729) % 1009) as f64;
            C64::new((0.37 * phase).sin(), (0.91 * phase + k as f64).cos())
        })
    };
    for k in 0..3 {
        let (x, y) = (vector(2 * k), vector(2 * k + 1));
        let (vx, vy) = (v.apply(&x), v.apply(&y));
        let lhs = x.dotc(&vy);
        let rhs = vx.dotc(&y);
        let deviation = (lhs - rhs).norm();
        if deviation > 1e-12 * (1.0 + vx.norm() * y.norm()) {
            return Err(LinalgError::NotHermitian { deviation }.into());
        }
    }
    Ok(())
}

fn finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { name, value })
    }
}

/// H_S = f(t) σˣ, V_SE = g σᶻ⊗σᶻ, H_E = σˣ.
pub fn build_two_spins(f: TimeFunction, g: f64, hbar: f64) -> Result<HamiltonianParts, ModelError> {
    f.validate()?;
    finite("g", g)?;
    positive("hbar", hbar)?;
    let mut v = KronSum::zero(2, 2);
    if g != 0.0 {
        v.push_product(real(g), &pauli_z(), &pauli_z())?;
    }
    Ok(HamiltonianParts {
        kind: ModelKind::TwoSpins,
        hbar,
        d_s: 2,
        d_e: 2,
        drive: f,
        h_s_terms: vec![DrivenTerm { scale: 1.0, power: 1, op: pauli_x() }],
        h_e: Some(pauli_x()),
        v_se: Some(v),
        h_0: None,
        v_s: None,
        lindblad: Vec::new(),
    })
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    finite(name, value)?;
    if value <= 0.0 {
        return Err(ModelError::OutOfRange { name, reason: format!("must be positive, got {value}") });
    }
    Ok(())
}

/// Truncated annihilation operator, a|n⟩ = √n |n−1⟩.
pub fn annihilation(cutoff: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = real((n as f64).sqrt());
    }
    a
}

/// Position and momentum in the Fock basis of a reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorOps {
    pub omega_ref: f64,
    pub mass: f64,
    pub hbar: f64,
    pub x: ComplexMatrix,
    pub p: ComplexMatrix,
}

impl OscillatorOps {
    pub fn new(cutoff: usize, omega_ref: f64, mass: f64, hbar: f64) -> Self {
        let a = annihilation(cutoff);
        let ad = a.adjoint();
        let x = (&a + &ad) * real((hbar / (2.0 * mass * omega_ref)).sqrt());
        let p = (&ad - &a) * c(0.0, (hbar * mass * omega_ref / 2.0).sqrt());
        Self { omega_ref, mass, hbar, x, p }
    }

    /// p²/2m + ½ m ω² x², with x² and p² as products of the truncated matrices.
    pub fn hamiltonian(&self, omega: f64) -> ComplexMatrix {
        let x2 = &self.x * &self.x;
        let p2 = &self.p * &self.p;
        p2 * real(0.5 / self.mass) + x2 * real(0.5 * self.mass * omega * omega)
    }

    /// a(ω) = √(mω/2ħ) (x + i p/(mω))
    pub fn ladder(&self, omega: f64) -> ComplexMatrix {
        let s = (self.mass * omega / (2.0 * self.hbar)).sqrt();
        (&self.x + &self.p * c(0.0, 1.0 / (self.mass * omega))) * real(s)
    }
}

/// Operators of the two-oscillator model, kept for cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoOscillatorOps {
    pub a: OscillatorOps,
    pub b: OscillatorOps,
    pub g: f64,
}

impl TwoOscillatorOps {
    /// (ħ g / (m √(ω_a ω_b))) (a + a†) ⊗ (b + b†) with a = a(ω_a(t)).
    pub fn v_se_ladder(&self, omega_a: f64) -> ComplexMatrix {
        let la = self.a.ladder(omega_a);
        let lb = self.b.ladder(self.b.omega_ref);
        let pref = self.a.hbar * self.g / (self.a.mass * (omega_a * self.b.omega_ref).sqrt());
        kron(&(&la + la.adjoint()), &(&lb + lb.adjoint())) * real(pref)
    }

    /// 2g x_a ⊗ x_b
    pub fn v_se_position(&self) -> ComplexMatrix {
        kron(&self.a.x, &self.b.x) * real(2.0 * self.g)
    }
}

/// H_S = p_a²/2m + ½ m ω_a(t)² x_a², H_E = p_b²/2m + ½ m ω_b² x_b²,
/// V_SE = 2g x_a ⊗ x_b, each oscillator truncated to `cutoff` Fock levels of
/// its own frequency (ω_a(0) for the system).
pub fn build_two_oscillators(
    omega_a: TimeFunction,
    omega_b: f64,
    m: f64,
    g: f64,
    hbar: f64,
    cutoff: usize,
) -> Result<(HamiltonianParts, TwoOscillatorOps), ModelError> {
    omega_a.validate()?;
    positive("omega_b", omega_b)?;
    positive("m", m)?;
    finite("g", g)?;
    positive("hbar", hbar)?;
    if cutoff < 2 {
        return Err(ModelError::OutOfRange { name: "cutoff", reason: format!("must be ≥ 2, got {cutoff}") });
    }
    let omega_ref = omega_a.eval(0.0);
    positive("omega_a(0)", omega_ref)?;
    let a = OscillatorOps::new(cutoff, omega_ref, m, hbar);
    let b = OscillatorOps::new(cutoff, omega_b, m, hbar);
    let x2 = &a.x * &a.x;
    let p2 = &a.p * &a.p;
    let mut v = KronSum::zero(cutoff, cutoff);
    if g != 0.0 {
        v.push_product(real(2.0 * g), &a.x, &b.x)?;
    }
    let parts = HamiltonianParts {
        kind: ModelKind::TwoOscillators,
        hbar,
        d_s: cutoff,
        d_e: cutoff,
        drive: omega_a,
        h_s_terms: vec![
            DrivenTerm { scale: 0.5 / m, power: 0, op: p2 },
            DrivenTerm { scale: 0.5 * m, power: 2, op: x2 },
        ],
        h_e: Some(b.hamiltonian(omega_b)),
        v_se: Some(v),
        h_0: None,
        v_s: None,
        lindblad: Vec::new(),
    };
    Ok((parts, TwoOscillatorOps { a, b, g }))
}

/// Parameters of the step-charged qubit for t ≥ 0: H = α₀ σ⁰ + α⃗·σ⃗.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBatteryParams {
    pub h0: f64,
    pub h3: f64,
    pub v0: f64,
    pub v: [f64; 3],
    pub hbar: f64,
}

impl QubitBatteryParams {
    pub fn alpha0(&self) -> f64 {
        self.h0 + self.v0
    }

    pub fn alpha(&self) -> [f64; 3] {
        [self.v[0], self.v[1], self.h3 + self.v[2]]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        finite("h0", self.h0)?;
        finite("h3", self.h3)?;
        finite("v0", self.v0)?;
        for &x in &self.v {
            finite("v", x)?;
        }
        positive("hbar", self.hbar)
    }
}

/// c₀ σ⁰ + c⃗·σ⃗
pub fn pauli_combination(c0: f64, cv: [f64; 3]) -> ComplexMatrix {
    identity(2) * real(c0) + pauli_x() * real(cv[0]) + pauli_y() * real(cv[1]) + pauli_z() * real(cv[2])
}

/// H₀ = h₀σ⁰ + h₃σᶻ, V_S(t) = (v₀σ⁰ + v⃗·σ⃗) θ(t) with θ(0) = 1.
pub fn build_qubit_battery(p: QubitBatteryParams) -> Result<HamiltonianParts, ModelError> {
    p.validate()?;
    let h0 = pauli_combination(p.h0, [0.0, 0.0, p.h3]);
    let vs = DrivenTerm { scale: 1.0, power: 1, op: pauli_combination(p.v0, p.v) };
    Ok(HamiltonianParts {
        kind: ModelKind::QubitBattery,
        hbar: p.hbar,
        d_s: 2,
        d_e: 1,
        drive: TimeFunction::Step { at: 0.0, before: 0.0, after: 1.0 },
        h_s_terms: vec![DrivenTerm::constant(h0.clone()), vs.clone()],
        h_e: None,
        v_se: None,
        h_0: Some(h0),
        v_s: Some(vs),
        lindblad: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    pub alpha1: f64,
    pub alpha3: f64,
    pub gamma: f64,
    pub hbar: f64,
}

impl SpinBosonParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        finite("alpha1", self.alpha1)?;
        finite("alpha3", self.alpha3)?;
        finite("gamma", self.gamma)?;
        if self.gamma < 0.0 {
            return Err(ModelError::OutOfRange { name: "gamma", reason: "must be ≥ 0".into() });
        }
        positive("hbar", self.hbar)
    }
}

/// H₀ = α₃σᶻ, V_S = α₁σˣ, one dephasing channel L = σᶻ with rate γ.
pub fn build_spin_boson(p: SpinBosonParams) -> Result<HamiltonianParts, ModelError> {
    p.validate()?;
    let h0 = pauli_z() * real(p.alpha3);
    let vs = DrivenTerm::constant(pauli_x() * real(p.alpha1));
    Ok(HamiltonianParts {
        kind: ModelKind::SpinBoson,
        hbar: p.hbar,
        d_s: 2,
        d_e: 1,
        drive: TimeFunction::Constant { value: 1.0 },
        h_s_terms: vec![DrivenTerm::constant(h0.clone()), vs.clone()],
        h_e: None,
        v_se: None,
        h_0: Some(h0),
        v_s: Some(vs),
        lindblad: vec![LindbladChannel { rate: p.gamma, op: pauli_z() }],
    })
}

/// Declarative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    TwoSpins {
        drive: TimeFunction,
        g: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
    TwoOscillators {
        omega_a: TimeFunction,
        omega_b: f64,
        m: f64,
        g: f64,
        #[serde(default = "one")]
        hbar: f64,
        #[serde(default = "default_cutoff")]
        fock_cutoff: usize,
    },
    QubitBattery {
        h0: f64,
        h3: f64,
        #[serde(default)]
        v0: f64,
        v: [f64; 3],
        #[serde(default = "one")]
        hbar: f64,
    },
    SpinBoson {
        alpha1: f64,
        alpha3: f64,
        gamma: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
}

fn one() -> f64 {
    1.0
}

pub const DEFAULT_FOCK_CUTOFF: usize = 100;

fn default_cutoff() -> usize {
    DEFAULT_FOCK_CUTOFF
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::TwoSpins { .. } => ModelKind::TwoSpins,
            ModelSpec::TwoOscillators { .. } => ModelKind::TwoOscillators,
            ModelSpec::QubitBattery { .. } => ModelKind::QubitBattery,
            ModelSpec::SpinBoson { .. } => ModelKind::SpinBoson,
        }
    }

    pub fn build(&self) -> Result<HamiltonianParts, ModelError> {
        match *self {
            ModelSpec::TwoSpins { drive, g, hbar } => build_two_spins(drive, g, hbar),
            ModelSpec::TwoOscillators { omega_a, omega_b, m, g, hbar, fock_cutoff } => {
                build_two_oscillators(omega_a, omega_b, m, g, hbar, fock_cutoff).map(|(p, _)| p)
            }
            ModelSpec::QubitBattery { h0, h3, v0, v, hbar } => {
                build_qubit_battery(QubitBatteryParams { h0, h3, v0, v, hbar })
            }
            ModelSpec::SpinBoson { alpha1, alpha3, gamma, hbar } => {
                build_spin_boson(SpinBosonParams { alpha1, alpha3, gamma, hbar })
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.build().and_then(|p| p.validate())
    }

    pub fn hbar(&self) -> f64 {
        match *self {
            ModelSpec::TwoSpins { hbar, .. }
            | ModelSpec::TwoOscillators { hbar, .. }
            | ModelSpec::QubitBattery { hbar, .. }
            | ModelSpec::SpinBoson { hbar, .. } => hbar,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &ComplexMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fig3_drive_at_zero() {
        let f = TimeFunction::ExpDecay { amplitude: 2.0, rate: 0.5 };
        let parts = build_two_spins(f, 1.0, 1.0).unwrap();
        assert_eq!(parts.h_s(0.0), pauli_x() * real(2.0));
    }

    #[test]
    fn drive_derivatives_match_finite_differences() {
        let fs = [
            TimeFunction::ExpDecay { amplitude: 2.0, rate: 0.5 },
            TimeFunction::SinusoidOffset { amplitude: 1.0, frequency: 1.0, phase: 0.3, offset: 2.0 },
            TimeFunction::Constant { value: 3.0 },
        ];
        let h = 1e-5;
        for f in fs {
            for t in [0.1, 1.0, 4.2] {
                let fd = (f.eval(t + h) - f.eval(t - h)) / (2.0 * h);
                assert!((fd - f.derivative(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_spins_total_matches_explicit_construction() {
        let f = TimeFunction::SinusoidOffset { amplitude: 1.0, frequency: 1.0, phase: 0.0, offset: 2.0 };
        let g = 0.7;
        let parts = build_two_spins(f, g, 1.0).unwrap();
        let t: f64 = 1.3;
        let ft = t.sin() + 2.0;
        // σˣ⊗I, σᶻ⊗σᶻ and I⊗σˣ written out in the |s e⟩ basis
        let r = real;
        let z = r(0.0);
        let explicit = ComplexMatrix::from_row_slice(
            4,
            4,
            &[r(g), r(1.0), r(ft), z, r(1.0), r(-g), z, r(ft), r(ft), z, r(-g), r(1.0), z, r(ft), r(1.0), r(g)],
        );
        assert!(max_abs(&(parts.h_tot(t) - explicit)) < 1e-15);
    }

    #[test]
    fn decoupled_spins_have_no_interaction() {
        let parts = build_two_spins(TimeFunction::Constant { value: 1.0 }, 0.0, 1.0).unwrap();
        assert!(parts.v_se.as_ref().unwrap().is_zero());
    }

    #[test]
    fn annihilation_cutoff_two() {
        let a = annihilation(2);
        let want = ComplexMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
        assert_eq!(a, want);
    }

    #[test]
    fn ladder_commutator_is_identity_below_top_level() {
        let n = 12;
        let a = annihilation(n);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        let block = comm.view((0, 0), (n - 1, n - 1)).into_owned();
        assert!(max_abs(&(block - identity(n - 1))) < 1e-13);
        assert!((comm[(n - 1, n - 1)].re - (1.0 - n as f64)).abs() < 1e-12);
    }

    #[test]
    fn oscillator_ground_state_energy() {
        let (omega_b, m, hbar) = (1.3, 0.8, 1.1);
        let (parts, _) =
            build_two_oscillators(TimeFunction::Constant { value: 2.0 }, omega_b, m, 1.0, hbar, 10).unwrap();
        let h_e = parts.h_e.unwrap();
        assert!((h_e[(0, 0)].re - hbar * omega_b / 2.0).abs() < 1e-13);
    }

    #[test]
    fn oscillator_ladder_and_position_couplings_agree() {
        let omega = TimeFunction::SinusoidOffset { amplitude: 1.0, frequency: 1.0, phase: 0.0, offset: 2.0 };
        let (_, ops) = build_two_oscillators(omega, 1.0, 1.0, 1.0, 1.0, 8).unwrap();
        for t in [0.0, 0.7, 2.5] {
            let diff = ops.v_se_ladder(omega.eval(t)) - ops.v_se_position();
            assert!(max_abs(&diff) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn oscillator_work_operator_is_m_omega_omegadot_x2() {
        let omega = TimeFunction::ExpDecay { amplitude: 2.0, rate: 0.5 };
        let (parts, ops) = build_two_oscillators(omega, 1.0, 1.5, 1.0, 1.0, 6).unwrap();
        let t = 0.9;
        let want = &ops.a.x * &ops.a.x * real(1.5 * omega.eval(t) * omega.derivative(t));
        assert!(max_abs(&(parts.h_s_dot(t) - want)) < 1e-13);
    }

    #[test]
    fn qubit_battery_alpha() {
        let p = QubitBatteryParams { h0: 1.2, h3: 0.2, v0: 0.0, v: [0.5, 0.6, 0.0], hbar: 1.0 };
        assert_eq!(p.alpha(), [0.5, 0.6, 0.2]);
        assert_eq!(p.alpha0(), 1.2);
        let parts = build_qubit_battery(p).unwrap();
        let want = pauli_combination(1.2, [0.5, 0.6, 0.2]);
        assert!(max_abs(&(parts.h_s(0.0) - want)) < 1e-15);
        assert!(max_abs(&(parts.h_s(-1.0) - parts.h_0.clone().unwrap())) < 1e-15);
    }

    #[test]
    fn large_interactions_are_checked_without_densifying() {
        let (mut parts, ops) =
            build_two_oscillators(TimeFunction::Constant { value: 1.0 }, 1.0, 1.0, 1.0, 1.0, 20).unwrap();
        parts.validate().unwrap();
        let mut skew = KronSum::zero(20, 20);
        skew.push_product(c(0.0, 1.0), &ops.a.x, &ops.b.x).unwrap();
        parts.v_se = Some(skew);
        assert!(matches!(parts.validate(), Err(ModelError::Linalg(LinalgError::NotHermitian { .. }))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_two_spins(TimeFunction::Constant { value: f64::NAN }, 1.0, 1.0).is_err());
        assert!(build_two_oscillators(TimeFunction::Constant { value: 1.0 }, 1.0, 1.0, 1.0, 1.0, 1).is_err());
        let p = SpinBosonParams { alpha1: 1.0, alpha3: 1.0, gamma: -0.1, hbar: 1.0 };
        assert!(build_spin_boson(p).is_err());
    }
}
