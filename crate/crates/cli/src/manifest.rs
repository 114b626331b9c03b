use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Context};

/// Provenance record written next to every command's outputs as
/// `<command>.manifest.json`: the resolved configuration (also saved as
/// `<command>.config.toml`), its hash, the seed, the tool versions and a
/// SHA-256 per output file. Commands sharing an output directory keep
/// separate records.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub library_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: BTreeMap<String, String>,
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(config: &RunConfig) -> Result<Self, CliError> {
        let root = config.out_dir();
        std::fs::create_dir_all(&root).context("cli", "create-output")?;
        Ok(OutputDir { root, written: Vec::new() })
    }

    /// Path of an output file, recorded for hashing in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.root.join(name);
        self.written.push(PathBuf::from(name));
        p
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<Manifest, CliError> {
        std::fs::write(self.root.join(format!("{command}.config.toml")), config.to_toml()).context("cli", "write-config")?;
        let mut outputs = BTreeMap::new();
        for rel in &self.written {
            let path = self.root.join(rel);
            for file in files_under(&path).context("cli", "hash-outputs")? {
                let bytes = std::fs::read(&file).context("cli", "hash-outputs")?;
                let key = file.strip_prefix(&self.root).unwrap_or(&file).to_string_lossy().into_owned();
                outputs.insert(key, hex::encode(Sha256::digest(&bytes)));
            }
        }
        let m = Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: nplcm::VERSION.to_string(),
            config_hash: config.hash(),
            seed: config.seed(),
            outputs,
        };
        let text = serde_json::to_string_pretty(&m).context("cli", "write-manifest")?;
        std::fs::write(self.root.join(format!("{command}.manifest.json")), text).context("cli", "write-manifest")?;
        Ok(m)
    }
}

fn files_under(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    let mut out = Vec::new();
    for e in entries {
        out.extend(files_under(&e)?);
    }
    Ok(out)
}
