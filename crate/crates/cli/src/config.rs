//! Scenario files: one TOML document per run.

use std::path::{Path, PathBuf};

use qflow_core::dynamics::TimeGrid;
use qflow_core::integrator::IntegratorOptions;
use qflow_core::models::{ModelKind, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    VonNeumann,
    Lindblad,
    QubitExact,
    Bloch,
    Schrodinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Flows,
    QurPairs,
    Battery,
    MeasurementSchedule,
    HaarProbe,
    EntropyRate,
}

/// Initial state. Labels index the computational (spins, qubits) or Fock
/// (oscillators) basis of each factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// |↑⟩⊗|↑⟩ for two spins
    UpUp,
    /// |0⟩⊗|0⟩ for two oscillators
    Ground,
    Product {
        s: usize,
        e: usize,
    },
    Bloch {
        beta: [f64; 3],
    },
    MaximallyMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementBasis {
    /// eigenbasis of the bare system Hamiltonian H₀
    H0,
    SigmaZ,
}

/// Non-selective projective measurements. Either explicit `times` or a
/// `count` of equally spaced instants strictly inside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub basis: MeasurementBasis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarConfig {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Purity of the twirled state; the initial-state purity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
}

fn default_samples() -> usize {
    10_000
}

impl Default for HaarConfig {
    fn default() -> Self {
        Self { n_samples: default_samples(), purity: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl IntegratorConfig {
    pub fn options(&self) -> IntegratorOptions {
        let mut o = IntegratorOptions::with_tolerance(self.rtol, self.atol);
        if let Some(m) = self.max_steps {
            o.max_steps = m;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub engine: Engine,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default)]
    pub rng_seed: u64,
    pub model: ModelSpec,
    pub grid: TimeGrid,
    pub initial_state: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar: Option<HaarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn has(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        self.integrator.map(|i| i.options()).unwrap_or_default()
    }

    /// Overrides the Fock cutoff of an oscillator model.
    pub fn set_fock_cutoff(&mut self, cutoff: usize) -> Result<(), CliError> {
        match &mut self.model {
            ModelSpec::TwoOscillators { fock_cutoff, .. } => {
                *fock_cutoff = cutoff;
                Ok(())
            }
            _ => Err(CliError::Config("--fock-cutoff only applies to two_oscillators".into())),
        }
    }

    pub fn measurement_times(&self) -> Vec<f64> {
        match &self.measurement {
            Some(MeasurementConfig { times: Some(t), .. }) => t.clone(),
            Some(MeasurementConfig { count: Some(n), .. }) => {
                qflow_core::measurement::equally_spaced_times(self.grid.t_start, self.grid.t_end, *n)
            }
            _ => Vec::new(),
        }
    }

    /// Checks everything that can be checked without running the dynamics.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(i) = &self.integrator {
            if !(i.rtol > 0.0 && i.atol > 0.0) {
                return bad("integrator tolerances must be positive".into());
            }
        }
        let kind = self.model.kind();
        let qubit = matches!(kind, ModelKind::QubitBattery | ModelKind::SpinBoson);

        let engine_ok = match self.engine {
            Engine::QubitExact => kind == ModelKind::QubitBattery,
            Engine::Bloch => kind == ModelKind::SpinBoson,
            Engine::Schrodinger => matches!(kind, ModelKind::TwoSpins | ModelKind::TwoOscillators),
            Engine::VonNeumann => kind != ModelKind::SpinBoson,
            Engine::Lindblad => true,
        };
        if !engine_ok {
            return bad(format!("engine {:?} cannot run a {kind:?} model", self.engine));
        }
        if self.engine == Engine::QubitExact && self.grid.t_start < 0.0 {
            return bad("qubit_exact needs t_start ≥ 0 (the drive is switched on at t = 0)".into());
        }
        let dim = self.model.build().map_err(|e| CliError::Config(e.to_string()))?.total_dim();
        if matches!(self.engine, Engine::VonNeumann | Engine::Lindblad) && dim > 400 {
            return bad(format!("density-matrix engines are limited to dimension 400 (got {dim}); use schrodinger"));
        }

        match (&self.initial_state, kind) {
            (InitialState::UpUp, ModelKind::TwoSpins) | (InitialState::Ground, ModelKind::TwoOscillators) => {}
            (InitialState::Product { .. }, ModelKind::TwoSpins | ModelKind::TwoOscillators) => {
                let (d_s, d_e) = self.model.build().map_err(|e| CliError::Config(e.to_string()))?.dims();
                if let InitialState::Product { s, e } = self.initial_state {
                    if s >= d_s || e >= d_e {
                        return bad(format!("product label ({s}, {e}) outside {d_s}×{d_e}"));
                    }
                }
            }
            (InitialState::Bloch { beta }, _) if qubit => {
                let n = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
                if n.is_nan() || n > 1.0 + 1e-12 {
                    return bad(format!("Bloch vector length {n} exceeds 1"));
                }
            }
            (InitialState::MaximallyMixed, _) => {}
            (s, k) => return bad(format!("initial state {s:?} does not apply to a {k:?} model")),
        }
        if self.engine == Engine::Schrodinger && self.initial_state == InitialState::MaximallyMixed {
            return bad("schrodinger needs a pure initial state".into());
        }
        if self.engine == Engine::Bloch
            && !matches!(self.initial_state, InitialState::Bloch { .. } | InitialState::MaximallyMixed)
        {
            return bad("bloch engine needs a Bloch initial state".into());
        }

        for a in &self.analyses {
            let ok = match a {
                Analysis::Flows | Analysis::QurPairs => kind != ModelKind::QubitBattery,
                Analysis::Battery => qubit,
                Analysis::HaarProbe => kind == ModelKind::QubitBattery,
                Analysis::EntropyRate => kind == ModelKind::SpinBoson && self.engine != Engine::VonNeumann,
                Analysis::MeasurementSchedule => {
                    qubit && matches!(self.engine, Engine::QubitExact | Engine::VonNeumann | Engine::Lindblad)
                }
            };
            if !ok {
                return bad(format!("analysis {a:?} is not defined for a {kind:?} model on engine {:?}", self.engine));
            }
        }
        if self.has(Analysis::QurPairs) && !self.has(Analysis::Flows) {
            return bad("qur_pairs needs the flows analysis".into());
        }
        match (&self.measurement, self.has(Analysis::MeasurementSchedule)) {
            (None, true) => return bad("measurement_schedule needs a [measurement] table".into()),
            (Some(_), false) => return bad("[measurement] given without the measurement_schedule analysis".into()),
            (Some(m), true) => {
                if m.times.is_some() == m.count.is_some() {
                    return bad("[measurement] needs exactly one of times or count".into());
                }
                let times = self.measurement_times();
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("measurement times must be strictly increasing".into());
                }
                if times.iter().any(|t| !(self.grid.t_start..=self.grid.t_end).contains(t)) {
                    return bad("measurement times must lie inside the grid".into());
                }
            }
            (None, false) => {}
        }
        if let Some(h) = &self.haar {
            if !self.has(Analysis::HaarProbe) {
                return bad("[haar] given without the haar_probe analysis".into());
            }
            if h.n_samples < qflow_core::haar::MIN_SAMPLES {
                return bad(format!("haar.n_samples must be ≥ {}", qflow_core::haar::MIN_SAMPLES));
            }
            if let Some(p) = h.purity {
                if !(0.5..=1.0).contains(&p) {
                    return bad(format!("haar.purity {p} outside [1/2, 1]"));
                }
            }
        }
        Ok(())
    }
}
