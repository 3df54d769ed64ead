//! Config loading, output bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use graphspde_core::experiment::RunConfig;
use graphspde_core::graph::{EDGES_FILE, FEATURES_FILE, LABELS_FILE};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Common;

pub struct Run {
    command: &'static str,
    pub config: RunConfig,
    config_path: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    written: Vec<PathBuf>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    Ok(toml::from_str(text)?)
}

/// Fails when any value is NaN or infinite.
pub fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if let Some(v) = values.into_iter().find(|v| !v.is_finite()) {
        bail!("{what} contains a non-finite value ({v})");
    }
    Ok(())
}

impl Run {
    pub fn start(command: &'static str, common: &Common) -> Result<Self> {
        let text = fs::read_to_string(&common.config)
            .with_context(|| format!("reading config {}", common.config.display()))?;
        let mut config = parse_config(&text).with_context(|| format!("parsing {}", common.config.display()))?;
        if let Some(seed) = common.seed {
            config.seeds = vec![seed];
        }
        if let Some(out) = &common.out {
            config.output = out.clone();
        }
        let Some(&seed) = config.seeds.first() else {
            bail!("config lists no seeds");
        };
        let out = config.output.clone();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            command,
            config,
            config_path: common.config.clone(),
            seed,
            out,
            written: Vec::new(),
        })
    }

    /// Write `contents` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(PathBuf::from(name));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Record a file that was written by other means.
    pub fn record(&mut self, name: impl Into<PathBuf>) {
        self.written.push(name.into());
    }

    fn inputs(&self) -> Result<Vec<Value>> {
        let mut files = vec![self.config_path.clone()];
        if let Some(dir) = &self.config.data.dataset {
            for name in [EDGES_FILE, LABELS_FILE, FEATURES_FILE] {
                let p = dir.join(name);
                if p.exists() {
                    files.push(p);
                }
            }
        }
        files
            .iter()
            .map(|p| Ok(json!({ "path": p.display().to_string(), "sha256": sha256_file(p)? })))
            .collect()
    }

    /// Write `manifest.json` listing the effective config, the seed and
    /// content hashes of every input and output.
    pub fn finish(mut self) -> Result<()> {
        let outputs: Vec<Value> = self
            .written
            .iter()
            .map(|p| {
                Ok(json!({
                    "path": p.display().to_string(),
                    "sha256": sha256_file(&self.out.join(p))?,
                }))
            })
            .collect::<Result<_>>()?;
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": serde_json::to_value(&self.config)?,
            "inputs": self.inputs()?,
            "outputs": outputs,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}
