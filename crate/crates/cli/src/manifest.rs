use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use trustsim::Result;

use crate::config::RunConfig;

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

#[derive(Debug, Serialize)]
pub struct Input {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run. Deliberately free of timestamps and
/// absolute output paths so identical runs give identical manifests.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, Input>,
    pub artifacts: BTreeMap<String, String>,
}

/// Collects artifacts as they are written into one run directory.
pub struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    pub fn create(command: &'static str, config: &RunConfig) -> Result<Self> {
        let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)?;
        let mut config = config.clone();
        // The run directory is not part of what makes a run reproducible.
        config.out = None;
        Ok(Run {
            dir,
            manifest: Manifest {
                tool: "trustsim",
                version: env!("CARGO_PKG_VERSION"),
                command,
                config,
                seeds: BTreeMap::new(),
                inputs: BTreeMap::new(),
                artifacts: BTreeMap::new(),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.into(), value);
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.insert(
            role.into(),
            Input {
                path: path.to_path_buf(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(self.path(name), contents)?;
        self.record(name)
    }

    /// Registers a file that was written to `self.path(name)` by other means.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let hash = sha256_file(&self.path(name))?;
        self.manifest.artifacts.insert(name.into(), hash);
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        let toml = self.manifest.config.to_toml()?;
        self.write("config.toml", toml)?;
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(self.path("manifest.json"), json + "\n")?;
        Ok(self.dir)
    }
}
