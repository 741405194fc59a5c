//! CSV and JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::run::ScenarioOutput;
use crate::CliError;

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// 17 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(out: &ScenarioOutput, w: W) -> Result<(), CliError> {
    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    csv.write_record(&out.header).map_err(io)?;
    for row in &out.rows {
        csv.write_record(row.iter().map(|&x| format_number(x))).map_err(io)?;
    }
    csv.flush().map_err(io)
}

pub fn csv_string(out: &ScenarioOutput) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(out, &mut buf)?;
    String::from_utf8(buf).map_err(io)
}

/// Writes `<name>.csv` and `<name>.json` into `dir`, returning both paths.
pub fn write_outputs(out: &ScenarioOutput, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = &out.summary.preset;
    let csv_path = dir.join(format!("{name}.csv"));
    let json_path = dir.join(format!("{name}.json"));
    write_csv(out, std::io::BufWriter::new(std::fs::File::create(&csv_path).map_err(io)?))?;
    let mut json = serde_json::to_string_pretty(&out.summary).map_err(io)?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(io)?;
    Ok((csv_path, json_path))
}
