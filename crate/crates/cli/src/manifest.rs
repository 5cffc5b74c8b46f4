use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "command.json";

/// What a command read and wrote, with the resolved settings needed to run
/// it again.
#[derive(Debug, Serialize)]
pub struct CommandManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub argv: Vec<String>,
    pub command: String,
    pub config: RunConfig,
    pub settings: Value,
    pub threads: usize,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn hash_into(map: &mut BTreeMap<String, String>, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        if p.is_file() {
            let h = pdeup_core::dataset::sha256_file(p)?;
            map.insert(p.display().to_string(), h);
        }
    }
    Ok(())
}

impl CommandManifest {
    pub fn new(command: &str, config: &RunConfig, settings: Value) -> Self {
        Self {
            tool: "pdeup",
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            command: command.into(),
            config: config.clone(),
            settings,
            threads: rayon::current_num_threads(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn write(mut self, inputs: &[PathBuf], outputs: &[PathBuf], path: &Path) -> Result<()> {
        hash_into(&mut self.inputs, inputs)?;
        hash_into(&mut self.outputs, outputs)?;
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Runtime(e.into()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display())))
    }
}
