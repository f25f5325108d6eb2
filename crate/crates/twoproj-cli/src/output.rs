//! Report envelope and emission.

use std::path::Path;

use serde::Serialize;

use crate::args::Format;
use crate::run::CliError;

/// Config echoed into every report so a run is reproducible from the
/// document alone.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub input: Option<String>,
    pub seed: u64,
    pub dim: usize,
    pub grid: usize,
    /// Resolved pass/fail threshold, default or `--tol`.
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a ConfigEcho,
    report: &'a T,
}

/// Renders the selected format and writes it to stdout or `--out`. The
/// structured document is a single JSON object; identical runs produce
/// identical bytes.
pub fn emit<T: Serialize>(
    command: &str,
    config: &ConfigEcho,
    report: &T,
    human: &str,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = match format {
        Format::Human => {
            let mut s = human.to_owned();
            if !s.ends_with('\n') {
                s.push('\n');
            }
            s
        }
        Format::Structured => {
            let envelope = Envelope { command, config, report };
            let mut s = serde_json::to_string_pretty(&envelope)
                .map_err(|e| CliError::Usage(format!("cannot serialize the report: {e}")))?;
            s.push('\n');
            s
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// One indented `key: value` line per field, for report types whose fields
/// are already self-describing. Keys come out in alphabetical order.
pub fn field_lines<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::Object(map)) => {
            let mut s = String::new();
            for (k, v) in map {
                s.push_str(&format!("  {k}: {v}\n"));
            }
            s
        }
        Ok(other) => format!("  {other}\n"),
        Err(_) => String::new(),
    }
}
