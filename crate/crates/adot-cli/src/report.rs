//! Run reports: a deterministic JSON record of what was computed, from
//! which inputs, with which residuals. `wall_time_ms` is the only
//! nondeterministic field and is excluded from golden comparisons.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_constraint_residual: Option<f64>,
    pub lp_iterations: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    /// The invoked subcommand with its flags, space-joined.
    pub command: String,
    /// Input path -> SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    /// Named scalar results (value, price, max_mass, ...).
    pub values: BTreeMap<String, f64>,
    /// Structured payloads (coupling, dual, strategy, certificate, ...).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub payloads: BTreeMap<String, serde_json::Value>,
    pub diagnostics: Diagnostics,
    /// Process exit code the command will terminate with.
    pub status: i32,
}

impl RunReport {
    pub fn new(command: String) -> RunReport {
        RunReport {
            command,
            inputs: BTreeMap::new(),
            values: BTreeMap::new(),
            payloads: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
            status: 0,
        }
    }

    pub fn digest_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let hex: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.insert(path.display().to_string(), hex);
        Ok(())
    }

    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match out {
            Some(path) => std::fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))?,
            None => println!("{text}"),
        }
        Ok(())
    }
}
