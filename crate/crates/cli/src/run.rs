//! Runs a scenario and assembles the time series and summary in memory.

use std::collections::BTreeMap;

use log::{info, warn};
use nalgebra::DVector;
use qflow_core::dynamics::{
    evolve_bloch_spin_boson, evolve_lindblad_at, evolve_qubit_exact, evolve_schrodinger_observe, evolve_von_neumann_at,
    product_basis_vector, spin_boson_gamma_eigenvalues, DynamicsError, Trajectory,
};
use qflow_core::finite_diff::{derivative, interior};
use qflow_core::flows::{battery_ops, entropy_rate_superoperator, flow_ops, flow_ops_structured};
use qflow_core::haar::{mc_probe_oracle, probe_closed_rho, probe_closed_v, ProbeSetup, TwirlTarget};
use qflow_core::kron_ops::KronSum;
use qflow_core::linalg::{pauli_z, real, ComplexMatrix, C64, DEFAULT_LOG_EPS};
use qflow_core::measurement::{measure_nonselective_schedule, spectral_basis, SpectralBasis, CLUSTER_TOL};
use qflow_core::models::{
    build_two_oscillators, HamiltonianParts, ModelSpec, QubitBatteryParams, SpinBosonParams, TwoOscillatorOps,
};
use qflow_core::operator::{BlochVector, HermitianOperator, QuantumState};
use qflow_core::uncertainty::{
    entropy_heat_probe_spin_boson, open_battery_power, probe_upper_bounds, qubit_battery_bound_exact,
    qw_bound_two_oscillators, qw_bound_two_spins, rs_report, rs_report_structured, spin_boson_report, JointState,
    SigmaUBounds, UncertaintyReport, Window,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Analysis, Engine, InitialState, MeasurementBasis, ScenarioConfig};
use crate::CliError;

/// Relative tolerance of every row-wise invariant check.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Fock-tail weight below which the oscillator truncation is trusted.
pub const TAIL_TOL: f64 = 1e-6;
const FD_ORDER: usize = 6;
const MAX_REPORTED: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct HaarSummary {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub purity: f64,
    pub closed_form: f64,
    pub z_score: f64,
    pub product_mean: f64,
    pub product_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub preset: String,
    pub params: Value,
    pub violations: usize,
    pub violation_examples: Vec<String>,
    pub finals: BTreeMap<String, f64>,
    pub haar: Option<HaarSummary>,
    pub diagnostics: BTreeMap<String, Value>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Summary,
}

impl ScenarioOutput {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

type Row = Vec<(String, f64)>;

fn push(row: &mut Row, name: impl Into<String>, value: f64) {
    row.push((name.into(), value));
}

fn push_pair(row: &mut Row, a: &str, b: &str, r: &UncertaintyReport) {
    push(row, format!("cov_{a}_{b}"), r.cov_ab);
    push(row, format!("comm_{a}_{b}"), r.comm_term);
    push(row, format!("bound_{a}_{b}"), r.rs_bound);
}

fn push_single(row: &mut Row, name: &str, mean: f64, var: f64) {
    push(row, format!("exp_{name}"), mean);
    push(row, format!("var_{name}"), var);
}

enum ModelData {
    Spins,
    Oscillators(TwoOscillatorOps),
    Qubit(QubitBatteryParams),
    SpinBoson(SpinBosonParams),
}

struct Evaluator<'c> {
    cfg: &'c ScenarioConfig,
    parts: HamiltonianParts,
    data: ModelData,
    violations: usize,
    examples: Vec<String>,
    /// (t, β) the qubit closed form restarts from after each measurement
    battery_ref: Option<(f64, BlochVector)>,
    post_probes: Vec<f64>,
    saturation_gap: f64,
}

impl<'c> Evaluator<'c> {
    fn new(cfg: &'c ScenarioConfig) -> Result<Self, CliError> {
        let config = |e: qflow_core::models::ModelError| CliError::Config(e.to_string());
        let (parts, data) = match cfg.model {
            ModelSpec::TwoOscillators { omega_a, omega_b, m, g, hbar, fock_cutoff } => {
                let (p, ops) = build_two_oscillators(omega_a, omega_b, m, g, hbar, fock_cutoff).map_err(config)?;
                (p, ModelData::Oscillators(ops))
            }
            ModelSpec::QubitBattery { h0, h3, v0, v, hbar } => {
                (cfg.model.build().map_err(config)?, ModelData::Qubit(QubitBatteryParams { h0, h3, v0, v, hbar }))
            }
            ModelSpec::SpinBoson { alpha1, alpha3, gamma, hbar } => (
                cfg.model.build().map_err(config)?,
                ModelData::SpinBoson(SpinBosonParams { alpha1, alpha3, gamma, hbar }),
            ),
            ModelSpec::TwoSpins { .. } => (cfg.model.build().map_err(config)?, ModelData::Spins),
        };
        Ok(Self {
            cfg,
            parts,
            data,
            violations: 0,
            examples: Vec::new(),
            battery_ref: None,
            post_probes: Vec::new(),
            saturation_gap: 0.0,
        })
    }

    fn flag(&mut self, t: f64, what: String) {
        self.violations += 1;
        if self.examples.len() < MAX_REPORTED {
            self.examples.push(format!("t = {t}: {what}"));
        }
    }

    fn check_report(&mut self, t: f64, label: &str, r: &UncertaintyReport) {
        let scale_a = 1f64.max(r.mean_a * r.mean_a + r.var_a.abs());
        let scale_b = 1f64.max(r.mean_b * r.mean_b + r.var_b.abs());
        if r.var_a < -VIOLATION_TOL * scale_a || r.var_b < -VIOLATION_TOL * scale_b {
            self.flag(t, format!("{label}: negative variance ({}, {})", r.var_a, r.var_b));
        }
        if r.slack < -VIOLATION_TOL * 1f64.max(r.product) {
            self.flag(t, format!("{label}: RS slack {}", r.slack));
        }
    }

    fn h_s_expectations(&self, t: f64, state: JointState<'_>) -> Result<Row, CliError> {
        let (d_s, d_e) = self.parts.dims();
        let mut row = Row::new();
        if d_e == 1 {
            let s = mixed(state)?;
            let b = BlochVector::from_state(s).beta;
            for (name, v) in ["sigma_x", "sigma_y", "sigma_z"].iter().zip(b) {
                push(&mut row, format!("exp_{name}"), v);
            }
            return Ok(row);
        }
        let mut h = KronSum::zero(d_s, d_e);
        h.push_left(real(1.0), &self.parts.h_s(t)).map_err(eval)?;
        push(&mut row, "exp_h_s", state.expect(&h).re);
        if let Some(he) = &self.parts.h_e {
            let mut k = KronSum::zero(d_s, d_e);
            k.push_right(real(1.0), he).map_err(eval)?;
            push(&mut row, "exp_h_e", state.expect(&k).re);
        }
        Ok(row)
    }

    fn row(&mut self, t: f64, state: JointState<'_>, post_measurement: bool) -> Result<Row, CliError> {
        let mut row = vec![("t".to_string(), t)];
        row.extend(self.h_s_expectations(t, state)?);
        if self.cfg.has(Analysis::Flows) {
            self.flows(t, state, &mut row)?;
        }
        if self.cfg.has(Analysis::Battery) {
            self.battery(t, state, post_measurement, &mut row)?;
        }
        if self.cfg.has(Analysis::HaarProbe) {
            let (h0, v_s) = self.h0_v_s(t)?;
            let p = probe_closed_v(&h0, mixed(state)?.rho(), &v_s, self.parts.hbar).map_err(eval)?;
            push(&mut row, "comm_e_b_p_b_haar_cf", p.value);
            push(&mut row, "comm_e_b_p_b_haar_trace_one_cf", p.value_trace_one);
        }
        if self.cfg.has(Analysis::EntropyRate) {
            let s = mixed(state)?;
            let rate = entropy_rate_superoperator(&self.parts, s, DEFAULT_LOG_EPS, 1.0).map_err(eval)?;
            let probe = entropy_heat_probe_spin_boson(&self.parts, s, DEFAULT_LOG_EPS).map_err(eval)?;
            push(&mut row, "exp_s", s.von_neumann_entropy());
            push(&mut row, "exp_s_dot", rate.value);
            push(&mut row, "comm_q_dot_s_dot", probe.direct);
            push(&mut row, "comm_q_dot_s_dot_cf", probe.closed_form);
            push(&mut row, "comm_q_dot_s_dot_v0_cf", probe.reduced_v0);
        }
        if let ModelData::Oscillators(_) = self.data {
            push(&mut row, "exp_fock_tail", fock_tail(state, self.parts.dims()));
        }
        Ok(row)
    }

    fn h0_v_s(&self, t: f64) -> Result<(ComplexMatrix, ComplexMatrix), CliError> {
        let h0 = self.parts.h_0.clone().ok_or_else(|| eval("model has no H0"))?;
        let v = self.parts.v_s_at(t.max(0.0)).ok_or_else(|| eval("model has no V_S"))?;
        Ok((h0, v))
    }

    fn flows(&mut self, t: f64, state: JointState<'_>, row: &mut Row) -> Result<(), CliError> {
        let [qw, uud, uq, uw] = if let ModelData::SpinBoson(_) = self.data {
            let f = flow_ops(&self.parts, t).map_err(eval)?;
            let s = mixed(state)?;
            let r = |a: &HermitianOperator, b: &HermitianOperator| rs_report(a, b, s).map_err(eval);
            [r(&f.q_dot, &f.w_dot)?, r(&f.u, &f.u_dot)?, r(&f.u, &f.q_dot)?, r(&f.u, &f.w_dot)?]
        } else {
            let f = flow_ops_structured(&self.parts, t).map_err(eval)?;
            let r = |a: &KronSum, b: &KronSum| rs_report_structured(a, b, state).map_err(eval);
            [r(&f.q_dot, &f.w_dot)?, r(&f.u, &f.u_dot)?, r(&f.u, &f.q_dot)?, r(&f.u, &f.w_dot)?]
        };
        push_single(row, "u", uud.mean_a, uud.var_a);
        push_single(row, "w_dot", qw.mean_b, qw.var_b);
        push_single(row, "q_dot", qw.mean_a, qw.var_a);
        push_single(row, "u_dot", uud.mean_b, uud.var_b);
        for (label, r) in [("q_dot/w_dot", &qw), ("u/u_dot", &uud), ("u/q_dot", &uq), ("u/w_dot", &uw)] {
            self.check_report(t, label, r);
        }
        if !self.cfg.has(Analysis::QurPairs) {
            return Ok(());
        }
        push_pair(row, "q_dot", "w_dot", &qw);
        push_pair(row, "u", "u_dot", &uud);
        push_pair(row, "u", "q_dot", &uq);
        push_pair(row, "u", "w_dot", &uw);

        let window = Window::from_report(&qw);
        push(row, "bound_u_dot_lower", window.lower);
        push(row, "bound_u_dot_upper", window.upper);
        if !window.contains(uud.var_b, VIOLATION_TOL * 1f64.max(window.upper.abs())) {
            self.flag(t, format!("σ²_Ů = {} outside [{}, {}]", uud.var_b, window.lower, window.upper));
        }
        let su = SigmaUBounds::from_reports(&uud, &uq, &uw, &qw);
        push(row, "bound_u_via_udot", su.via_udot);
        push(row, "bound_u_via_udot_direct", su.via_udot_direct);
        push(row, "bound_u_via_qdot", su.via_qdot);
        push(row, "bound_u_via_wdot", su.via_wdot);
        if su.max_bound() > su.var_u + VIOLATION_TOL * 1f64.max(su.var_u) {
            self.flag(t, format!("σ²_U = {} below a lower bound {}", su.var_u, su.max_bound()));
        }
        if su.var_u > 0.0 {
            self.saturation_gap = self.saturation_gap.max((su.var_u - su.via_wdot) / su.var_u);
        }

        let drive = self.parts.drive;
        match &self.data {
            ModelData::Spins => {
                let g = match self.cfg.model {
                    ModelSpec::TwoSpins { g, .. } => g,
                    _ => unreachable!("spin data implies a spin model"),
                };
                let b = match state {
                    JointState::Mixed(s) => {
                        qw_bound_two_spins(drive.eval(t), drive.derivative(t), g, self.parts.hbar, s)
                    }
                    JointState::Pure(psi) => {
                        let s = QuantumState::pure(psi).map_err(eval)?;
                        qw_bound_two_spins(drive.eval(t), drive.derivative(t), g, self.parts.hbar, &s)
                    }
                }
                .map_err(eval)?;
                push(row, "comm_q_dot_w_dot_cf", b.robertson * b.robertson);
                push(row, "bound_q_dot_w_dot_cf", b.exact * b.exact);
            }
            ModelData::Oscillators(ops) => {
                let b = qw_bound_two_oscillators(ops, drive.eval(t), drive.derivative(t), state).map_err(eval)?;
                push(row, "cov_q_dot_w_dot_cf", b.cov);
                push(row, "comm_q_dot_w_dot_cf", b.comm_term);
                push(row, "bound_q_dot_w_dot_cf", b.rs_bound);
            }
            _ => {}
        }
        Ok(())
    }

    fn battery(&mut self, t: f64, state: JointState<'_>, post: bool, row: &mut Row) -> Result<(), CliError> {
        let s = mixed(state)?;
        let ops = battery_ops(&self.parts, t).map_err(eval)?;
        let r = rs_report(&ops.e_b, &ops.p_b, s).map_err(eval)?;
        push_single(row, "e_b", r.mean_a, r.var_a);
        push_single(row, "p_b", r.mean_b, r.var_b);
        push_pair(row, "e_b", "p_b", &r);
        self.check_report(t, "e_b/p_b", &r);
        let ub = probe_upper_bounds(ops.e_b.matrix(), ops.p_b.matrix(), s.rho()).map_err(eval)?;
        push(row, "bound_e_b_p_b_cs_upper", ub.cs_bound);
        if ub.probe > ub.cs_bound + VIOLATION_TOL * 1f64.max(ub.cs_bound) {
            self.flag(t, format!("ℬ = {} above its upper bound {}", ub.probe, ub.cs_bound));
        }
        if post {
            self.post_probes.push(r.comm_term);
        }

        match self.data {
            ModelData::Qubit(p) => {
                let beta = BlochVector::from_state(s);
                let (t_ref, b_ref) = match (&self.battery_ref, post) {
                    (Some(r), false) => *r,
                    _ => {
                        self.battery_ref = Some((t, beta));
                        (t, beta)
                    }
                };
                let cf = qubit_battery_bound_exact(p.h3, p.v, &b_ref, p.alpha(), t - t_ref, p.hbar);
                push(row, "comm_e_b_p_b_cf", cf);
            }
            ModelData::SpinBoson(p) => {
                let power = HermitianOperator::new(open_battery_power(&self.parts, t).map_err(eval)?, "energy/time")
                    .map_err(eval)?;
                let r = rs_report(&ops.e_b, &power, s).map_err(eval)?;
                push_single(row, "p_tot", r.mean_b, r.var_b);
                push_pair(row, "e_b", "p_tot", &r);
                self.check_report(t, "e_b/p_tot", &r);
                let cf = spin_boson_report(&p, &BlochVector::from_state(s));
                push(row, "var_e_b_cf", cf.var_a);
                push(row, "var_p_tot_cf", cf.var_b);
                push(row, "cov_e_b_p_tot_cf", cf.cov_ab);
                push(row, "comm_e_b_p_tot_cf", cf.comm_term);
                push(row, "bound_e_b_p_tot_cf", cf.rs_bound);
            }
            _ => {}
        }
        Ok(())
    }
}

fn eval(e: impl std::fmt::Display) -> CliError {
    CliError::Evaluation(e.to_string())
}

fn mixed<'a>(state: JointState<'a>) -> Result<&'a QuantumState, CliError> {
    match state {
        JointState::Mixed(s) => Ok(s),
        JointState::Pure(_) => Err(eval("analysis needs a density matrix")),
    }
}

/// Weight in the top tenth of either oscillator's Fock levels.
fn fock_tail(state: JointState<'_>, (d_s, d_e): (usize, usize)) -> f64 {
    let edge = |d: usize| d - (d / 10).max(1);
    let (cs, ce) = (edge(d_s), edge(d_e));
    let mut acc = 0.0;
    for i in 0..d_s {
        for j in 0..d_e {
            if i >= cs || j >= ce {
                let k = i * d_e + j;
                acc += match state {
                    JointState::Pure(psi) => psi[k].norm_sqr(),
                    JointState::Mixed(s) => s.rho()[(k, k)].re,
                };
            }
        }
    }
    acc
}

fn initial_vector(cfg: &ScenarioConfig, dims: (usize, usize)) -> Option<DVector<C64>> {
    match cfg.initial_state {
        InitialState::UpUp | InitialState::Ground => Some(product_basis_vector(dims, 0, 0)),
        InitialState::Product { s, e } => Some(product_basis_vector(dims, s, e)),
        _ => None,
    }
}

fn initial_state(cfg: &ScenarioConfig, parts: &HamiltonianParts) -> Result<QuantumState, CliError> {
    if let Some(psi) = initial_vector(cfg, parts.dims()) {
        return QuantumState::pure(&psi).map_err(|e| CliError::Config(e.to_string()));
    }
    match cfg.initial_state {
        InitialState::Bloch { beta } => {
            Ok(BlochVector::new(beta).map_err(|e| CliError::Config(e.to_string()))?.to_state())
        }
        _ => Ok(QuantumState::maximally_mixed(parts.total_dim())),
    }
}

fn measurement_basis(cfg: &ScenarioConfig, parts: &HamiltonianParts) -> Result<SpectralBasis, CliError> {
    let a = match cfg.measurement.as_ref().map(|m| m.basis) {
        Some(MeasurementBasis::H0) => parts.h_0.clone().ok_or_else(|| CliError::Config("model has no H0".into()))?,
        _ => pauli_z(),
    };
    spectral_basis(&a, CLUSTER_TOL).map_err(eval)
}

fn integration(e: impl std::fmt::Display) -> CliError {
    CliError::Integration(e.to_string())
}

/// Feeds `visit(t, state, post_measurement)` every output state in time order.
fn drive<F>(cfg: &ScenarioConfig, parts: &HamiltonianParts, mut visit: F) -> Result<Value, CliError>
where
    F: FnMut(f64, JointState<'_>, bool) -> Result<(), CliError>,
{
    let times = cfg.grid.times();
    let opts = cfg.integrator_options();
    if cfg.engine == Engine::Schrodinger {
        let psi0 = initial_vector(cfg, parts.dims())
            .ok_or_else(|| CliError::Config("schrodinger needs a pure state".into()))?;
        let mut row_error = None;
        let result = evolve_schrodinger_observe(parts, &psi0, &times, &opts, |_, t, psi| {
            visit(t, JointState::Pure(psi), false).map_err(|e| {
                let msg = e.to_string();
                row_error = Some(e);
                msg
            })
        });
        if let Some(e) = row_error {
            return Err(e);
        }
        let stats = result.map_err(integration)?;
        return Ok(json!({ "accepted_steps": stats.accepted, "rejected_steps": stats.rejected }));
    }

    let rho0 = initial_state(cfg, parts)?;
    let exact = |p: &QubitBatteryParams, s: &QuantumState, ts: &[f64]| -> Result<Trajectory, DynamicsError> {
        let states = ts.iter().map(|t| evolve_qubit_exact(p, s, t - ts[0])).collect::<Result<_, _>>()?;
        Ok(Trajectory { times: ts.to_vec(), states })
    };
    let qubit = match cfg.model {
        ModelSpec::QubitBattery { h0, h3, v0, v, hbar } => Some(QubitBatteryParams { h0, h3, v0, v, hbar }),
        _ => None,
    };
    let propagate = |s: &QuantumState, ts: &[f64]| -> Result<Trajectory, DynamicsError> {
        match cfg.engine {
            Engine::VonNeumann => evolve_von_neumann_at(parts, s, ts, &opts),
            Engine::Lindblad => evolve_lindblad_at(parts, s, ts, &opts),
            Engine::QubitExact => exact(qubit.as_ref().expect("validated"), s, ts),
            _ => unreachable!("handled separately"),
        }
    };

    let (trajectory, post) = match cfg.engine {
        Engine::Bloch => {
            let p = match cfg.model {
                ModelSpec::SpinBoson { alpha1, alpha3, gamma, hbar } => SpinBosonParams { alpha1, alpha3, gamma, hbar },
                _ => return Err(CliError::Config("bloch engine needs a spin_boson model".into())),
            };
            let beta0 = BlochVector::from_state(&rho0);
            let betas = evolve_bloch_spin_boson(&p, &beta0, &cfg.grid).map_err(integration)?;
            (Trajectory { times: times.clone(), states: betas.iter().map(|b| b.to_state()).collect() }, vec![])
        }
        _ if cfg.has(Analysis::MeasurementSchedule) => {
            let basis = measurement_basis(cfg, parts)?;
            let sched = measure_nonselective_schedule(propagate, &rho0, &times, &basis, &cfg.measurement_times())
                .map_err(integration)?;
            (sched.trajectory, sched.post_measurement)
        }
        _ => (propagate(&rho0, &times).map_err(integration)?, vec![]),
    };
    for (k, (t, s)) in trajectory.times.iter().zip(&trajectory.states).enumerate() {
        visit(*t, JointState::Mixed(s), post.contains(&k))?;
    }
    Ok(json!({ "post_measurement_rows": post }))
}

fn haar_summary(cfg: &ScenarioConfig, parts: &HamiltonianParts) -> Result<HaarSummary, CliError> {
    let h = cfg.haar.clone().unwrap_or_default();
    let purity = match h.purity {
        Some(p) => p,
        None => initial_state(cfg, parts)?.purity(),
    };
    let h0 = parts.h_0.clone().ok_or_else(|| eval("model has no H0"))?;
    let v_s = parts.v_s_at(cfg.grid.t_start.max(0.0)).ok_or_else(|| eval("model has no V_S"))?;
    let closed = probe_closed_rho(&h0, &v_s, purity, parts.hbar).map_err(eval)?;
    let setup = ProbeSetup { h0, v_s, environment: None, hbar: parts.hbar };
    let mc = mc_probe_oracle(&setup, &TwirlTarget::RhoS { purity }, h.n_samples, cfg.rng_seed).map_err(eval)?;
    Ok(HaarSummary {
        mean: mc.probe.mean,
        se: mc.probe.se,
        n: mc.probe.n,
        purity,
        closed_form: closed.value,
        z_score: mc.probe.z_score(closed.value),
        product_mean: mc.product.mean,
        product_se: mc.product.se,
    })
}

/// Runs a validated scenario. Invariant violations are counted in the
/// summary, not returned as errors.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, CliError> {
    cfg.validate()?;
    let mut ev = Evaluator::new(cfg)?;
    let parts = ev.parts.clone();
    info!("running {} ({:?} engine, dimension {})", cfg.name, cfg.engine, parts.total_dim());

    let mut header: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let engine_info = drive(cfg, &parts, |t, state, post| {
        let row = ev.row(t, state, post)?;
        if header.is_empty() {
            header = row.iter().map(|(n, _)| n.clone()).collect();
        } else if row.len() != header.len() || row.iter().zip(&header).any(|((n, _), h)| n != h) {
            return Err(eval("row schema changed mid-run"));
        }
        rows.push(row.into_iter().map(|(_, v)| v).collect());
        Ok(())
    })?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("engine".to_string(), engine_info);
    let col = |name: &str, header: &[String]| header.iter().position(|h| h == name);

    // Post-hoc first-law check on the uniform grid.
    if let (Some(iu), Some(iud), false) =
        (col("exp_u", &header), col("exp_u_dot", &header), cfg.has(Analysis::MeasurementSchedule))
    {
        let u: Vec<f64> = rows.iter().map(|r| r[iu]).collect();
        let fd = derivative(&u, cfg.grid.dt(), FD_ORDER);
        let mut worst = 0.0f64;
        for i in interior(rows.len(), FD_ORDER) {
            worst = worst.max((fd[i] - rows[i][iud]).abs());
        }
        diagnostics.insert("first_law_max_residual".into(), json!(worst));
        if let Some(it) = col("exp_fock_tail", &header) {
            let end = rows.iter().take_while(|r| r[it] <= TAIL_TOL).count();
            let t_end = if end == 0 { cfg.grid.t_start } else { rows[end - 1][0] };
            let mut in_window = 0.0f64;
            for i in interior(rows.len(), FD_ORDER).filter(|&i| i + FD_ORDER / 2 < end) {
                in_window = in_window.max((fd[i] - rows[i][iud]).abs());
            }
            diagnostics.insert("truncation_window_end".into(), json!(t_end));
            diagnostics.insert("first_law_max_residual_window".into(), json!(in_window));
            if end < rows.len() {
                warn!("Fock tail exceeds {TAIL_TOL:e} after t = {t_end}; truncation error grows beyond this point");
            }
        }
        header.push("exp_dudt_fd".into());
        for (r, d) in rows.iter_mut().zip(fd) {
            r.push(d);
        }
    }
    if cfg.has(Analysis::QurPairs) && !matches!(cfg.model, ModelSpec::SpinBoson { .. }) {
        diagnostics.insert("max_rel_gap_var_u_via_wdot".into(), json!(ev.saturation_gap));
    }
    if cfg.has(Analysis::MeasurementSchedule) {
        diagnostics.insert("post_measurement_comm_e_b_p_b".into(), json!(ev.post_probes));
    }
    if let ModelSpec::SpinBoson { alpha1, alpha3, gamma, hbar } = cfg.model {
        let ev = spin_boson_gamma_eigenvalues(&SpinBosonParams { alpha1, alpha3, gamma, hbar });
        diagnostics.insert("gamma_eigenvalues".into(), json!(ev.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()));
    }

    let haar = if cfg.has(Analysis::HaarProbe) { Some(haar_summary(cfg, &parts)?) } else { None };
    let finals = match rows.last() {
        Some(last) => header.iter().cloned().zip(last.iter().copied()).collect(),
        None => BTreeMap::new(),
    };
    if ev.violations > 0 {
        warn!("{} invariant violations, first: {:?}", ev.violations, ev.examples.first());
    }
    let summary = Summary {
        preset: cfg.name.clone(),
        params: serde_json::to_value(cfg).map_err(eval)?,
        violations: ev.violations,
        violation_examples: ev.examples,
        finals,
        haar,
        diagnostics,
    };
    Ok(ScenarioOutput { header, rows, summary })
}
