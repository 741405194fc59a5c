//! Haar-averaged commutator probes from second-moment twirling, with a
//! Monte Carlo oracle over Haar-random unitaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, c, commutator, ensure_square, kron, trace, trace_product, ComplexMatrix, LinalgError};
use crate::sampling::{conjugate, diagonal_state_with_purity, haar_random_unitary};
use crate::uncertainty::{commutator_probe, rs_report_matrices};

/// Samples handled by one RNG stream in [`mc_probe_oracle`].
pub const MC_CHUNK: usize = 250;
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaarError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("purity {purity} outside [1/{dim}, 1]")]
    Purity { purity: f64, dim: usize },
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("twirling V_E needs an environment")]
    NoEnvironment,
}

/// Second-moment twirl of G on C^d ⊗ C^d:
/// ∫ (U⊗U) G (U⊗U)† dU = l_i I + l_s S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwirlResult {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub l_i: f64,
    pub l_s: f64,
}

impl TwirlResult {
    /// From Tr G and Tr(G S).
    pub fn from_traces(d: usize, tr_g: f64, tr_gs: f64) -> Self {
        let d = d as f64;
        let lambda_plus = (tr_g + tr_gs) / (d * (d + 1.0));
        let lambda_minus = if d > 1.0 { (tr_g - tr_gs) / (d * (d - 1.0)) } else { 0.0 };
        Self {
            lambda_plus,
            lambda_minus,
            l_i: 0.5 * (lambda_plus + lambda_minus),
            l_s: 0.5 * (lambda_plus - lambda_minus),
        }
    }
}

/// Twirl coefficients of a d² × d² matrix.
pub fn twirl2(g: &ComplexMatrix) -> Result<TwirlResult, HaarError> {
    let n = ensure_square(g)?;
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(LinalgError::BadFactorization { dim: n, d_s: d, d_e: d }.into());
    }
    // Tr(G S) = Σ G_{(i,j),(j,i)}
    let mut tr_gs = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_gs += g[(i * d + j, j * d + i)].re;
        }
    }
    Ok(TwirlResult::from_traces(d, trace(g).re, tr_gs))
}

/// Twirl of A ⊗ B without forming the product.
pub fn twirl2_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<TwirlResult, HaarError> {
    let d = linalg::ensure_same_dim(a, b)?;
    Ok(TwirlResult::from_traces(d, (trace(a) * trace(b)).re, trace_product(a, b)?.re))
}

/// l_s = (d𝒫 − 1)/(d(d² − 1)) for ρ ⊗ ρ.
pub fn l_s(purity: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * purity - 1.0) / (d * (d * d - 1.0))
}

fn check_purity(purity: f64, d: usize) -> Result<(), HaarError> {
    let lo = 1.0 / d as f64;
    if !(purity >= lo - 1e-12 && purity <= 1.0 + 1e-12) {
        return Err(HaarError::Purity { purity, dim: d });
    }
    Ok(())
}

/// X computed both as Tr([H₀,[H₀,V]]²) and as the expanded trace
/// Tr(H₀²(6VH₀²V − 8(H₀V)² + 2H₀²V²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XIdentity {
    pub nested: f64,
    pub expanded: f64,
}

pub fn x_identity(h0: &ComplexMatrix, v: &ComplexMatrix) -> Result<XIdentity, HaarError> {
    let k = commutator(h0, &commutator(h0, v)?)?;
    let h2 = h0 * h0;
    let hv = h0 * v;
    let inner = v * &h2 * v * c(6.0, 0.0) - &hv * &hv * c(8.0, 0.0) + &h2 * v * v * c(2.0, 0.0);
    Ok(XIdentity { nested: trace_product(&k, &k)?.re, expanded: trace_product(&h2, &inner)?.re })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedRhoProbe {
    pub value: f64,
    pub l_s: f64,
    pub x: XIdentity,
}

/// Haar average of ℬ(H₀, P_B^c) over initial states of fixed purity:
/// l_s X / (2ħ)².
pub fn probe_closed_rho(
    h0: &ComplexMatrix,
    v_s: &ComplexMatrix,
    purity: f64,
    hbar: f64,
) -> Result<ClosedRhoProbe, HaarError> {
    let d = linalg::ensure_same_dim(h0, v_s)?;
    check_purity(purity, d)?;
    let x = x_identity(h0, v_s)?;
    let ls = l_s(purity, d);
    Ok(ClosedRhoProbe { value: ls * x.nested / (4.0 * hbar * hbar), l_s: ls, x })
}

/// 4(2𝒫 − 1) α₃⁴ v₁² / (3ħ²), the single-qubit case of [`probe_closed_rho`]
/// with H₀ = α₃σᶻ and V = v₁σˣ.
pub fn single_qubit_closed_rho(alpha3: f64, v1: f64, purity: f64, hbar: f64) -> f64 {
    4.0 * (2.0 * purity - 1.0) * alpha3.powi(4) * v1 * v1 / (3.0 * hbar * hbar)
}

/// The same expression with α₃³ in place of α₃⁴.
pub fn single_qubit_closed_rho_cubic(alpha3: f64, v1: f64, purity: f64, hbar: f64) -> f64 {
    4.0 * (2.0 * purity - 1.0) * alpha3.powi(3) * v1 * v1 / (3.0 * hbar * hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedVProbe {
    /// m_s Tr([H₀,[H₀,ρ]]²)/(2ħ)² with the exact m_s = (d𝒱 − (Tr V)²)/(d(d²−1)).
    pub value: f64,
    /// The same with m_s = (d𝒱 − 1)/(d(d²−1)).
    pub value_trace_one: f64,
    pub m_s: f64,
    pub m_s_trace_one: f64,
    /// Tr([H₀,[H₀,ρ]]²)
    pub nested: f64,
}

/// Haar average of ℬ(H₀, P_B^c) over V_S → U V_S U† at fixed ρ_t.
pub fn probe_closed_v(
    h0: &ComplexMatrix,
    rho_t: &ComplexMatrix,
    v_s: &ComplexMatrix,
    hbar: f64,
) -> Result<ClosedVProbe, HaarError> {
    let d = linalg::ensure_same_dim(h0, rho_t)?;
    linalg::ensure_same_dim(h0, v_s)?;
    let r = commutator(h0, &commutator(h0, rho_t)?)?;
    let nested = trace_product(&r, &r)?.re;
    let m_s = twirl2_product(v_s, v_s)?.l_s;
    let vv = trace_product(v_s, v_s)?.re;
    let df = d as f64;
    let m_s_trace_one = (df * vv - 1.0) / (df * (df * df - 1.0));
    let scale = 1.0 / (4.0 * hbar * hbar);
    Ok(ClosedVProbe {
        value: m_s * nested * scale,
        value_trace_one: m_s_trace_one * nested * scale,
        m_s,
        m_s_trace_one,
        nested,
    })
}

/// Haar average of ℬ(H₀⊗I, P_B^o) over ρ_S of fixed purity, with
/// V_SE = V_S ⊗ V_E and ρ = ρ_S ⊗ ρ_E.
pub fn probe_open_rho(
    h0: &ComplexMatrix,
    v_s: &ComplexMatrix,
    v_e: &ComplexMatrix,
    rho_e: &ComplexMatrix,
    purity_s: f64,
    hbar: f64,
) -> Result<f64, HaarError> {
    linalg::ensure_same_dim(v_e, rho_e)?;
    let closed = probe_closed_rho(h0, v_s, purity_s, hbar)?;
    Ok(closed.value * trace_product(rho_e, v_e)?.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpenVProbe {
    /// 𝓜̄_E/(4ħ²) |Tr([H₀,[H₀,V_S]]ρ_S)|²
    pub value: f64,
    /// The same with the large-d_E coefficient.
    pub value_large_d: f64,
    /// [λ₊(1+𝒫_E) + λ₋(1−𝒫_E)]/2 of V_E ⊗ V_E
    pub m_e: f64,
    /// (Tr V_E² (1+𝒫_E) − d_E ΔV²)/d_E² with ΔV² = (Tr V_E² − (Tr V_E)²)/d_E
    pub m_e_large_d: f64,
}

/// Haar average of ℬ(H₀⊗I, P_B^o) over V_E → U V_E U†.
pub fn probe_open_v(
    h0: &ComplexMatrix,
    v_s: &ComplexMatrix,
    v_e: &ComplexMatrix,
    rho_e: &ComplexMatrix,
    rho_s_t: &ComplexMatrix,
    hbar: f64,
) -> Result<OpenVProbe, HaarError> {
    let d_e = linalg::ensure_same_dim(v_e, rho_e)?;
    linalg::ensure_same_dim(h0, rho_s_t)?;
    let k = commutator(h0, &commutator(h0, v_s)?)?;
    let kr = trace_product(&k, rho_s_t)?.norm_sqr();
    let tw = twirl2_product(v_e, v_e)?;
    let p_e = trace_product(rho_e, rho_e)?.re;
    let m_e = 0.5 * (tw.lambda_plus * (1.0 + p_e) + tw.lambda_minus * (1.0 - p_e));
    let tr = trace(v_e).re;
    let vv = trace_product(v_e, v_e)?.re;
    let d = d_e as f64;
    let dv_inf = (vv - tr * tr) / d;
    let m_e_large_d = (vv * (1.0 + p_e) - d * dv_inf) / (d * d);
    let scale = kr / (4.0 * hbar * hbar);
    Ok(OpenVProbe { value: m_e * scale, value_large_d: m_e_large_d * scale, m_e, m_e_large_d })
}

/// Battery operators whose probe is averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSetup {
    pub h0: ComplexMatrix,
    pub v_s: ComplexMatrix,
    /// (V_E, ρ_E) for an open battery with V_SE = V_S ⊗ V_E.
    pub environment: Option<(ComplexMatrix, ComplexMatrix)>,
    pub hbar: f64,
}

/// Which object is replaced by its Haar conjugate.
#[derive(Debug, Clone, PartialEq)]
pub enum TwirlTarget {
    /// ρ_S = U diag(p) U† with spectrum of the given purity.
    RhoS {
        purity: f64,
    },
    VS {
        rho_s: ComplexMatrix,
    },
    VE {
        rho_s: ComplexMatrix,
    },
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// |mean − x| in units of the standard error.
    pub fn z_score(&self, x: f64) -> f64 {
        if self.se == 0.0 {
            if self.mean == x {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - x).abs() / self.se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McResult {
    /// ℬ
    pub probe: Estimate,
    /// σ²_A σ²_B
    pub product: Estimate,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Acc) -> Acc {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Acc {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64,
        }
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate { mean: self.mean, se: (var.max(0.0) / self.n as f64).sqrt(), n: self.n }
    }
}

fn sample_pair(
    setup: &ProbeSetup,
    rho_s: &ComplexMatrix,
    v_s: &ComplexMatrix,
    v_e: Option<&ComplexMatrix>,
) -> Result<(f64, f64), LinalgError> {
    let minus_i_over_hbar = c(0.0, -1.0 / setup.hbar);
    match &setup.environment {
        None => {
            let p = commutator(&setup.h0, v_s)? * minus_i_over_hbar;
            let r = rs_report_matrices(&setup.h0, &p, rho_s)?;
            Ok((commutator_probe(&setup.h0, &p, rho_s)?, r.product))
        }
        Some((v_e0, rho_e)) => {
            let v_e = v_e.unwrap_or(v_e0);
            let d_e = v_e.nrows();
            let e_b = kron(&setup.h0, &linalg::identity(d_e));
            let p = kron(&commutator(&setup.h0, v_s)?, v_e) * minus_i_over_hbar;
            let rho = kron(rho_s, rho_e);
            let r = rs_report_matrices(&e_b, &p, &rho)?;
            Ok((commutator_probe(&e_b, &p, &rho)?, r.product))
        }
    }
}

/// Monte Carlo average of ℬ (and of σ²_Aσ²_B) under Haar twirling of one
/// object. Samples are split into chunks of [`MC_CHUNK`], chunk k drawing
/// from ChaCha stream k of `seed`, so results do not depend on thread count.
pub fn mc_probe_oracle(
    setup: &ProbeSetup,
    target: &TwirlTarget,
    n_samples: usize,
    seed: u64,
) -> Result<McResult, HaarError> {
    if n_samples < MIN_SAMPLES {
        return Err(HaarError::TooFewSamples(n_samples));
    }
    let d_s = linalg::ensure_same_dim(&setup.h0, &setup.v_s)?;
    let base_rho = match target {
        TwirlTarget::RhoS { purity } => {
            check_purity(*purity, d_s)?;
            diagonal_state_with_purity(d_s, *purity)
        }
        TwirlTarget::VS { rho_s } | TwirlTarget::VE { rho_s } => {
            linalg::ensure_same_dim(&setup.h0, rho_s)?;
            rho_s.clone()
        }
    };
    if matches!(target, TwirlTarget::VE { .. }) && setup.environment.is_none() {
        return Err(HaarError::NoEnvironment);
    }
    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    let chunks: Vec<Result<(Acc, Acc), LinalgError>> = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = MC_CHUNK.min(n_samples - k * MC_CHUNK);
            let (mut probe, mut product) = (Acc::default(), Acc::default());
            for _ in 0..count {
                let (b, prod) = match target {
                    TwirlTarget::RhoS { .. } => {
                        let u = haar_random_unitary(d_s, &mut rng);
                        sample_pair(setup, &conjugate(&u, &base_rho), &setup.v_s, None)?
                    }
                    TwirlTarget::VS { .. } => {
                        let u = haar_random_unitary(d_s, &mut rng);
                        sample_pair(setup, &base_rho, &conjugate(&u, &setup.v_s), None)?
                    }
                    TwirlTarget::VE { .. } => {
                        let v_e = &setup.environment.as_ref().expect("checked").0;
                        let u = haar_random_unitary(v_e.nrows(), &mut rng);
                        sample_pair(setup, &base_rho, &setup.v_s, Some(&conjugate(&u, v_e)))?
                    }
                };
                probe.push(b);
                product.push(prod);
            }
            Ok((probe, product))
        })
        .collect();
    let (mut probe, mut product) = (Acc::default(), Acc::default());
    for r in chunks {
        let (a, b) = r?;
        probe = probe.merge(a);
        product = product.merge(b);
    }
    Ok(McResult { probe: probe.estimate(), product: product.estimate() })
}

/// Gibbs state e^{−βH}/Z.
pub fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<ComplexMatrix, LinalgError> {
    let (vals, _) = linalg::hermitian_eigh(h)?;
    let shift = vals.first().copied().unwrap_or(0.0);
    let unnorm = linalg::hermitian_function(h, |x| c((-beta * (x - shift)).exp(), 0.0))?;
    let z = trace(&unnorm).re;
    Ok(unnorm / c(z, 0.0))
}
