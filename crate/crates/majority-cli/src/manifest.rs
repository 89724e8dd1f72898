//! Run manifests: what was run, with which parameters, and what came out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{CliError, Common};

#[derive(Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
    /// Headline numbers of the run, for reading without opening the CSV.
    pub summary: Value,
}

/// Collects output files of one run and writes the manifest at the end.
pub struct Run {
    command: &'static str,
    parameters: Value,
    seed: Option<u64>,
    main: PathBuf,
    start: Instant,
    outputs: Vec<OutputFile>,
}

impl Run {
    pub fn start<P: Serialize>(command: &'static str, common: &Common, params: &P, seed: Option<u64>) -> Run {
        let main = common.out.clone().unwrap_or_else(|| PathBuf::from(format!("{command}.csv")));
        Run {
            command,
            parameters: serde_json::to_value(params).expect("parameters serialize"),
            seed,
            main,
            start: Instant::now(),
            outputs: Vec::new(),
        }
    }

    /// Sibling of the main CSV: `<stem>_<suffix>.csv`.
    pub fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self.main.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        self.main.with_file_name(format!("{stem}_{suffix}.csv"))
    }

    /// Writes `bytes` to `path` and records its digest.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, bytes)?;
        self.outputs.push(OutputFile { path: path.to_path_buf(), sha256: hex(&Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn write_main(&mut self, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.main.clone();
        self.write(&path, bytes)
    }

    /// Writes `<stem>.manifest.json` and prints its summary to stdout.
    pub fn finish(self, summary: Value) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            parameters: self.parameters,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
            outputs: self.outputs,
            summary,
        };
        let path = self.main.with_extension("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(majority::Error::from)?;
        std::fs::write(&path, text + "\n")?;
        println!("{}", serde_json::to_string_pretty(&manifest.summary).map_err(majority::Error::from)?);
        eprintln!("wrote {} and {}", self.main.display(), path.display());
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
