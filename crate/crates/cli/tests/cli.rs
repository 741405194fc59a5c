use std::process::Command;

use qflow_cli::config::{Analysis, ScenarioConfig};
use qflow_cli::output::csv_string;
use qflow_cli::presets::{self, PRESETS};
use qflow_cli::run_scenario;

fn qflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qflow"))
}

#[test]
fn eight_presets() {
    assert_eq!(PRESETS.len(), 8);
    assert_eq!(
        presets::names(),
        ["fig3_left", "fig3_right", "fig4_left", "fig4_right", "fig5_plain", "fig5_measured", "fig6", "fig7_probe"]
    );
}

#[test]
fn presets_round_trip_through_toml() {
    for name in presets::names() {
        let c = presets::preset(name).unwrap();
        let text = c.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
        assert_eq!(back, c, "{name}");
    }
}

#[test]
fn list_presets_prints_all_names() {
    let out = qflow().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    let measured = text.lines().find(|l| l.starts_with("fig5_measured")).unwrap();
    assert!(measured.contains("two equally-spaced measurements"));
}

#[test]
fn identical_config_gives_identical_csv() {
    for name in ["fig3_left", "fig5_measured", "fig6"] {
        let c = presets::preset(name).unwrap();
        let a = csv_string(&run_scenario(&c).unwrap()).unwrap();
        let b = csv_string(&run_scenario(&c).unwrap()).unwrap();
        assert_eq!(a, b, "{name}");
        assert!(!a.contains('\r'));
    }
}

#[test]
fn haar_summary_depends_only_on_seed() {
    let c = presets::preset("fig5_plain").unwrap();
    let a = run_scenario(&c).unwrap().summary.haar.unwrap();
    let b = run_scenario(&c).unwrap().summary.haar.unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    let mut other = c.clone();
    other.rng_seed += 1;
    assert_ne!(run_scenario(&other).unwrap().summary.haar.unwrap().mean, a.mean);
}

#[test]
fn empty_analyses_give_bare_expectations() {
    let mut c = presets::preset("fig3_left").unwrap();
    c.analyses.clear();
    let out = run_scenario(&c).unwrap();
    assert_eq!(out.header, ["t", "exp_h_s", "exp_h_e"]);
    assert_eq!(out.rows.len(), 1000);

    let mut q = presets::preset("fig6").unwrap();
    q.analyses.clear();
    assert_eq!(run_scenario(&q).unwrap().header, ["t", "exp_sigma_x", "exp_sigma_y", "exp_sigma_z"]);
}

#[test]
fn csv_numbers_use_seventeen_significant_digits() {
    let out = run_scenario(&presets::preset("fig7_probe").unwrap()).unwrap();
    let text = csv_string(&out).unwrap();
    let second = text.lines().nth(1).unwrap();
    for field in second.split(',') {
        let (mantissa, _) = field.split_once('e').unwrap();
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{field}");
    }
    assert_eq!(text.lines().next().unwrap().split(',').next(), Some("t"));
}

#[test]
fn bloch_engine_agrees_with_lindblad() {
    let lindblad = presets::preset("fig6").unwrap();
    let mut bloch = lindblad.clone();
    bloch.engine = qflow_cli::config::Engine::Bloch;
    bloch.analyses = vec![Analysis::Battery];
    let a = run_scenario(&lindblad).unwrap();
    let b = run_scenario(&bloch).unwrap();
    for col in ["exp_sigma_x", "exp_sigma_z", "var_p_tot"] {
        let (x, y) = (a.column(col).unwrap(), b.column(col).unwrap());
        let worst = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-7, "{col}: {worst}");
    }
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let status = qflow().args(["run", "--preset", "fig5_measured", "--out"]).arg(dir.path()).status().unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig5_measured.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["preset"], "fig5_measured");
    assert!(summary["haar"]["se"].as_f64().unwrap() > 0.0);
    assert!(summary["finals"]["exp_e_b"].is_number());
    let csv = std::fs::read_to_string(dir.path().join("fig5_measured.csv")).unwrap();
    // header + 1000 grid points + one post-measurement row per measurement
    assert_eq!(csv.lines().count(), 1003);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\nengine = \"warp\"\n").unwrap();
    assert_eq!(qflow().arg("validate").arg(&bad).status().unwrap().code(), Some(1));
    assert_eq!(qflow().args(["run", "--preset", "nope"]).status().unwrap().code(), Some(1));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, presets::preset("fig3_left").unwrap().to_toml().unwrap()).unwrap();
    assert_eq!(qflow().arg("validate").arg(&good).status().unwrap().code(), Some(0));
}

#[test]
fn integration_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::preset("fig3_right").unwrap();
    c.integrator = Some(qflow_cli::config::IntegratorConfig { rtol: 1e-9, atol: 1e-11, max_steps: Some(3) });
    c.output_path = dir.path().to_path_buf();
    let path = dir.path().join("short.toml");
    std::fs::write(&path, c.to_toml().unwrap()).unwrap();
    assert_eq!(qflow().arg("run").arg(&path).status().unwrap().code(), Some(2));
}

#[test]
fn fock_cutoff_override_only_for_oscillators() {
    let dir = tempfile::tempdir().unwrap();
    let code = |preset: &str| {
        qflow()
            .args(["run", "--preset", preset, "--fock-cutoff", "8", "--out"])
            .arg(dir.path())
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(code("fig3_left"), Some(1));
    assert_eq!(code("fig4_left"), Some(0));
}
