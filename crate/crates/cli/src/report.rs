use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Identifies the layout below; bumped on any incompatible change.
pub const SCHEMA: &str = "trilinear.run-report/1";

/// The JSON document every subcommand emits.
///
/// Floats are written by `serde_json` in shortest round-trip form, so each
/// parses back to the identical `f64`. Non-finite values become `null`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub options: Value,
    pub result: Value,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, seed: Option<u64>, options: Value) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            options,
            result: Value::Null,
            warnings: vec![],
            wall_time_s: 0.0,
        }
    }

    pub fn emit(&self, out: Option<&Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        match out {
            Some(path) => std::fs::write(path, text + "\n"),
            None => {
                let mut stdout = std::io::stdout().lock();
                writeln!(stdout, "{text}")
            }
        }
    }
}
