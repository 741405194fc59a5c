//! Adaptive Dormand–Prince 5(4) for complex vector ODEs.
//!
//! Steps are clipped so that every requested output time is hit exactly; no
//! interpolation is involved.

use thiserror::Error;

use crate::linalg::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("output times must be finite and nondecreasing")]
    BadTimes,
    #[error("observer aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, max_steps: 5_000_000 }
    }
}

impl IntegratorOptions {
    pub fn with_tolerance(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates y' = rhs(t, y) from `times[0]` (where y = `y0`) and calls
/// `observe(k, times[k], y)` for every output time, including the first.
pub fn integrate<F, O>(
    mut rhs: F,
    y0: &[C64],
    times: &[f64],
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<IntegratorStats, IntegratorError>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<(), String>,
{
    if times.is_empty() {
        return Ok(IntegratorStats::default());
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(IntegratorError::BadTimes);
    }
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut stats = IntegratorStats::default();
    observe(0, t, &y).map_err(|reason| IntegratorError::Aborted { t, reason })?;
    if times.len() == 1 {
        return Ok(stats);
    }

    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];

    rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;
    let span = times[times.len() - 1] - times[0];
    let mut h = initial_step(&mut rhs, t, &y, &k1, opts, span, &mut stats);

    for (idx, &t_out) in times.iter().enumerate().skip(1) {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(IntegratorError::StepBudget { t, max_steps: opts.max_steps });
            }
            let remaining = t_out - t;
            let clipped = h >= remaining;
            let h_step = if clipped { remaining } else { h };
            if h_step <= 1e-14 * t.abs().max(1.0) && !clipped {
                return Err(IntegratorError::StepUnderflow { t, h: h_step });
            }

            let hs = C64::new(h_step, 0.0);
            stage(&mut tmp, &y, hs, &[(A21, &k1)]);
            rhs(t + C2 * h_step, &tmp, &mut k2);
            stage(&mut tmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
            rhs(t + C3 * h_step, &tmp, &mut k3);
            stage(&mut tmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            rhs(t + C4 * h_step, &tmp, &mut k4);
            stage(&mut tmp, &y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            rhs(t + C5 * h_step, &tmp, &mut k5);
            stage(&mut tmp, &y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            rhs(t + h_step, &tmp, &mut k6);
            stage(&mut y_new, &y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            rhs(t + h_step, &y_new, &mut k7);
            stats.rhs_evals += 6;

            let mut acc = 0.0;
            for i in 0..n {
                let e = hs * (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7);
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                acc += (e.norm() / scale).powi(2);
            }
            let err = (acc / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                if y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) && h_step < 1e-10 {
                    return Err(IntegratorError::NonFinite { t });
                }
                h = h_step * 0.1;
                stats.rejected += 1;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if clipped { t_out } else { t + h_step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                // A clipped step says nothing about the natural step size.
                h = if clipped { h.max(h_step * factor) } else { h_step * factor };
            } else {
                stats.rejected += 1;
                h = h_step * factor.min(1.0);
            }
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(IntegratorError::NonFinite { t });
        }
        observe(idx, t, &y).map_err(|reason| IntegratorError::Aborted { t, reason })?;
    }
    Ok(stats)
}

fn stage(out: &mut [C64], y: &[C64], h: C64, terms: &[(f64, &Vec<C64>)]) {
    for i in 0..out.len() {
        let mut s = C64::new(0.0, 0.0);
        for (a, k) in terms {
            s += k[i] * *a;
        }
        out[i] = y[i] + h * s;
    }
}

// Hairer–Wanner starting step heuristic.
fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[C64],
    f0: &[C64],
    opts: &IntegratorOptions,
    span: f64,
    stats: &mut IntegratorStats,
) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len().max(1) as f64;
    let scale: Vec<f64> = y.iter().map(|z| opts.atol + opts.rtol * z.norm()).collect();
    let rms = |v: &[C64]| (v.iter().zip(&scale).map(|(z, s)| (z.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    if span > 0.0 {
        h0 = h0.min(span);
    }
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
    rhs(t + h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    let h = (100.0 * h0).min(h1);
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}
