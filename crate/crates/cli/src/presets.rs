//! Built-in scenarios. Every preset uses ħ = 1.

use qflow_core::dynamics::TimeGrid;
use qflow_core::models::{ModelSpec, TimeFunction, DEFAULT_FOCK_CUTOFF};

use crate::config::{
    Analysis, Engine, HaarConfig, InitialState, IntegratorConfig, MeasurementBasis, MeasurementConfig, ScenarioConfig,
};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: [Preset; 8] = [
    Preset {
        name: "fig3_left",
        description: "two interacting spins, f(t) = 2 exp(-t/2), hbar = g = 1, start |up>|up>, t in [0, 10]; flows and QUR pairs",
    },
    Preset {
        name: "fig3_right",
        description: "two interacting spins, f(t) = sin(t) + 2, hbar = g = 1, start |up>|up>, t in [0, 10]; flows and QUR pairs",
    },
    Preset {
        name: "fig4_left",
        description: "two coupled oscillators, omega_a(t) = 2 exp(-t/2), hbar = g = m = omega_b = 1, start |0>|0>, 100 Fock levels each, t in [0, 10]",
    },
    Preset {
        name: "fig4_right",
        description: "two coupled oscillators, omega_a(t) = sin(t) + 2, hbar = g = m = omega_b = 1, start |0>|0>, 100 Fock levels each, t in [0, 10]",
    },
    Preset {
        name: "fig5_plain",
        description: "closed qubit battery, h0 = 1.2, h3 = 0.2, v0 = 0, v = (0.5, 0.6, 0), beta(0) = (0, 0, 0.5), hbar = 1, t in [0, 10]; no measurements",
    },
    Preset {
        name: "fig5_measured",
        description: "closed qubit battery as fig5_plain with two equally-spaced measurements in the sigma_z basis",
    },
    Preset {
        name: "fig6",
        description: "dephasing spin-boson battery, gamma = 0.25, alpha1 = alpha3 = hbar = 1, beta(0) = (1, 1, 1)/sqrt(3), t in [0, 50]",
    },
    Preset {
        name: "fig7_probe",
        description: "first-law check on two interacting spins, f(t) = sin(t) + 2, hbar = g = 1, start |up>|up>, t in [0, 10]",
    },
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn list_text() -> String {
    PRESETS.iter().map(|p| format!("{:<14} {}\n", p.name, p.description)).collect()
}

fn grid(t_end: f64, n_points: usize) -> TimeGrid {
    TimeGrid::with_points(0.0, t_end, n_points).expect("preset grids are valid")
}

fn spins(name: &str, drive: TimeFunction, analyses: Vec<Analysis>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        engine: Engine::VonNeumann,
        analyses,
        output_path: format!("out/{name}").into(),
        rng_seed: 0,
        model: ModelSpec::TwoSpins { drive, g: 1.0, hbar: 1.0 },
        grid: grid(10.0, 1000),
        initial_state: InitialState::UpUp,
        measurement: None,
        haar: None,
        integrator: None,
    }
}

fn oscillators(name: &str, omega_a: TimeFunction) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        engine: Engine::Schrodinger,
        analyses: vec![Analysis::Flows, Analysis::QurPairs],
        output_path: format!("out/{name}").into(),
        rng_seed: 0,
        model: ModelSpec::TwoOscillators {
            omega_a,
            omega_b: 1.0,
            m: 1.0,
            g: 1.0,
            hbar: 1.0,
            fock_cutoff: DEFAULT_FOCK_CUTOFF,
        },
        grid: grid(10.0, 1000),
        initial_state: InitialState::Ground,
        measurement: None,
        haar: None,
        // The coupled modes are unstable while ω_a < 2, so the state spreads
        // over many Fock levels and the default tolerances lose the norm.
        integrator: Some(IntegratorConfig { rtol: 1e-10, atol: 1e-12, max_steps: None }),
    }
}

fn qubit_battery(name: &str, measured: bool) -> ScenarioConfig {
    let mut analyses = vec![Analysis::Battery, Analysis::HaarProbe];
    if measured {
        analyses.push(Analysis::MeasurementSchedule);
    }
    ScenarioConfig {
        name: name.into(),
        engine: Engine::QubitExact,
        analyses,
        output_path: format!("out/{name}").into(),
        rng_seed: 5,
        model: ModelSpec::QubitBattery { h0: 1.2, h3: 0.2, v0: 0.0, v: [0.5, 0.6, 0.0], hbar: 1.0 },
        grid: grid(10.0, 1000),
        initial_state: InitialState::Bloch { beta: [0.0, 0.0, 0.5] },
        measurement: measured.then_some(MeasurementConfig {
            basis: MeasurementBasis::SigmaZ,
            times: None,
            count: Some(2),
        }),
        haar: Some(HaarConfig::default()),
        integrator: None,
    }
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let exp_decay = |amplitude| TimeFunction::ExpDecay { amplitude, rate: 0.5 };
    let sin_plus_two = TimeFunction::SinusoidOffset { amplitude: 1.0, frequency: 1.0, phase: 0.0, offset: 2.0 };
    let pairs = vec![Analysis::Flows, Analysis::QurPairs];
    Some(match name {
        "fig3_left" => spins(name, exp_decay(2.0), pairs),
        "fig3_right" => spins(name, sin_plus_two, pairs),
        "fig4_left" => oscillators(name, exp_decay(2.0)),
        "fig4_right" => oscillators(name, sin_plus_two),
        "fig5_plain" => qubit_battery(name, false),
        "fig5_measured" => qubit_battery(name, true),
        "fig6" => {
            let s = 1.0 / 3f64.sqrt();
            ScenarioConfig {
                name: name.into(),
                engine: Engine::Lindblad,
                analyses: vec![Analysis::Flows, Analysis::QurPairs, Analysis::Battery, Analysis::EntropyRate],
                output_path: "out/fig6".into(),
                rng_seed: 0,
                model: ModelSpec::SpinBoson { alpha1: 1.0, alpha3: 1.0, gamma: 0.25, hbar: 1.0 },
                grid: grid(50.0, 2001),
                initial_state: InitialState::Bloch { beta: [s, s, s] },
                measurement: None,
                haar: None,
                integrator: None,
            }
        }
        "fig7_probe" => spins(name, sin_plus_two, vec![Analysis::Flows]),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_builds_and_validates() {
        for p in &PRESETS {
            let c = preset(p.name).unwrap();
            assert_eq!(c.name, p.name);
            c.validate().unwrap();
        }
        assert!(preset("nope").is_none());
    }
}
