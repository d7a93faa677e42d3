// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Context, Result};

/// Everything needed to rerun a command: the resolved configuration, seed,
/// thread cap and tool version. Outputs are listed relative to `--out`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub openblas_coretype: Option<String>,
}

pub struct Run {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(out: PathBuf, seed: u64, threads: Option<usize>) -> Result<Self> {
        std::fs::create_dir_all(&out).context(|| format!("creating {}", out.display()))?;
        Ok(Self { out, seed, threads, outputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        crate::config::resolve(&self.out, name)
    }

    /// Records `path` as an output of this run.
    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(&path, text + "\n").context(|| format!("writing {}", path.display()))?;
        self.record(&path);
        Ok(path)
    }

    pub fn finish<C: Serialize>(self, command: &str, config: &C) -> Result<PathBuf> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| p.strip_prefix(&self.out).unwrap_or(p).display().to_string())
            .collect();
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            threads: self.threads,
            config: serde_json::to_value(config)?,
            outputs,
            openblas_coretype: std::env::var("OPENBLAS_CORETYPE").ok(),
        };
        let path = self.out.join(format!("manifest-{command}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
