use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::write_json;

/// Everything needed to rerun a subcommand: its arguments, the fully
/// resolved configuration and the files it touched.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: serde_json::Value,
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub wall_time_s: f64,
}

pub struct Recorder {
    started: Instant,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(subcommand: &str, args: serde_json::Value, config: &RunConfig) -> Self {
        Recorder {
            started: Instant::now(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                args,
                config: config.clone(),
                seed: config.seed,
                threads: rayon::current_num_threads(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                wall_time_s: 0.0,
            },
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest to `path` and returns it.
    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        write_json(path, &self.manifest)?;
        Ok(self.manifest)
    }
}

/// `<out>.manifest.json` next to the primary output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
