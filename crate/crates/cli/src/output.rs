//! Report rendering and atomic writes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use rockrelax::experiments::{SolveReport, SCHEMA_VERSION};

use crate::config::Format;

/// JSON document of a diagnostic subcommand.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: u32,
    pub command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub result: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, seed: Option<u64>, result: T) -> Self {
        Envelope { schema: SCHEMA_VERSION, command, seed, result }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("output serializes") + "\n"
    }
}

/// JSON, or CSV preceded by one `#` line carrying schema, preset and seed.
pub fn render_report(report: &SolveReport, format: Format) -> rockrelax::Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        Format::Csv => {
            let seed = report.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
            Ok(format!("# schema={} preset={} seed={}\n{}", report.schema, report.preset, seed, report.to_csv()?))
        }
    }
}

/// Writes through a temporary file in the target directory, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes to `path`, or to stdout when `path` is `None` or `-`.
pub fn emit(path: Option<&Path>, contents: &str) -> std::io::Result<()> {
    match path {
        Some(p) if p != Path::new("-") => write_atomic(p, contents),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()
        }
    }
}
