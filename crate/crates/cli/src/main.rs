use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use qflow_cli::{output, presets, run_scenario, CliError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qflow", version, about = "Thermodynamic flow and uncertainty scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in preset.
    Run {
        /// TOML scenario file
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Output directory; overrides output_path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fock levels per oscillator
        #[arg(long)]
        fock_cutoff: Option<usize>,
    },
    /// Print the built-in presets.
    ListPresets,
    /// Parse and check a scenario file without running it.
    Validate { config: PathBuf },
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> Result<ScenarioConfig, CliError> {
    match (config, preset) {
        (Some(path), _) => ScenarioConfig::load(&path),
        (None, Some(name)) => presets::preset(&name).ok_or_else(|| {
            CliError::Config(format!("unknown preset {name:?}; known: {}", presets::names().join(", ")))
        }),
        (None, None) => Err(CliError::Config("give a config file or --preset".into())),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ListPresets => {
            print!("{}", presets::list_text());
            Ok(())
        }
        Command::Validate { config } => {
            ScenarioConfig::load(&config)?.validate()?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Run { config, preset, out, fock_cutoff } => {
            let mut cfg = load(config, preset)?;
            if let Some(n) = fock_cutoff {
                cfg.set_fock_cutoff(n)?;
            }
            if let Some(dir) = out {
                cfg.output_path = dir;
            }
            let result = run_scenario(&cfg)?;
            let (csv, json) = output::write_outputs(&result, &cfg.output_path)?;
            info!("wrote {} and {}", csv.display(), json.display());
            match result.summary.violations {
                0 => Ok(()),
                n => Err(CliError::Violations(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
