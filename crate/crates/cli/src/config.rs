//! Pipeline configuration: one flat `key = value` file with dotted
//! sections, overridable key by key from the command line.
//!
//! ```text
//! seed = 42
//! paths.workdir = run
//! synthetic.n_users = 2000
//! graph.min_co_users = 8
//! hgnn.epochs = 5
//! two_tower.use_gnn_features = true
//! eval.k = 10
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use gfm_core::corpus::SyntheticConfig;
use gfm_core::eval::ExperimentConfig;
use gfm_core::kv::KvMap;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

const SECTIONS: [&str; 6] = ["paths", "synthetic", "graph", "hgnn", "two_tower", "eval"];

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub workdir: PathBuf,
    /// Defaults to `<workdir>/interactions.tsv`.
    pub interactions: PathBuf,
    /// Defaults to `<workdir>/catalog.tsv`.
    pub catalog: PathBuf,
}

impl Paths {
    pub fn in_workdir(workdir: impl Into<PathBuf>) -> Self {
        let workdir = workdir.into();
        Paths { interactions: workdir.join("interactions.tsv"), catalog: workdir.join("catalog.tsv"), workdir }
    }

    pub fn graph(&self) -> PathBuf {
        self.workdir.join("graph.snapshot")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.workdir.join("embeddings.tsv")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.workdir.join("two_tower.ckpt")
    }

    pub fn report(&self) -> PathBuf {
        self.workdir.join("report.tsv")
    }

    pub fn ablation_report(&self) -> PathBuf {
        self.workdir.join("ablation.tsv")
    }

    pub fn recommendations(&self, user: u64) -> PathBuf {
        self.workdir.join(format!("recommendations-{user}.tsv"))
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.workdir.join(format!("manifest-{command}.txt"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub synthetic: SyntheticConfig,
    pub experiment: ExperimentConfig,
    /// Copied into every seeded component.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::from_kv(&KvMap::default()).expect("defaults are valid")
    }
}

impl PipelineConfig {
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        for (key, _) in kv.iter() {
            let known = key == "seed" || key.split_once('.').is_some_and(|(s, _)| SECTIONS.contains(&s));
            if !known {
                return Err(CliError::BadConfig(format!("unknown key `{key}`")));
            }
        }
        let mut seed = 42u64;
        kv.read("seed", &mut seed)?;
        let p = kv.section("paths");
        let mut paths = Paths::in_workdir(p.get("workdir").unwrap_or("run"));
        if let Some(v) = p.get("interactions") {
            paths.interactions = v.into();
        }
        if let Some(v) = p.get("catalog") {
            paths.catalog = v.into();
        }
        let mut synthetic = SyntheticConfig::from_kv(&kv.section("synthetic"))?;
        let mut experiment = ExperimentConfig::from_kv(kv)?;
        synthetic.seed = seed;
        experiment.hgnn.seed = seed;
        experiment.two_tower.seed = seed;
        experiment.validate()?;
        Ok(PipelineConfig { paths, synthetic, experiment, seed })
    }

    /// Reads `path` (if any) then applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|source| CliError::UnreadableConfig { path: p.to_path_buf(), source })?;
                KvMap::parse(&text).map_err(|e| CliError::BadConfig(format!("{}: {e}", p.display())))?
            }
            None => KvMap::default(),
        };
        for (k, v) in overrides {
            kv.insert(k.clone(), v);
        }
        PipelineConfig::from_kv(&kv)
    }

    /// Every setting, fully resolved, one `key = value` per line.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = self.experiment.to_kv();
        for (k, v) in self.synthetic.to_kv().iter() {
            kv.insert(format!("synthetic.{k}"), v);
        }
        kv.insert("paths.workdir", self.paths.workdir.display());
        kv.insert("paths.interactions", self.paths.interactions.display());
        kv.insert("paths.catalog", self.paths.catalog.display());
        kv.insert("seed", self.seed);
        kv
    }

    /// SHA-256 of the resolved settings, paths excluded.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_kv()
            .iter()
            .filter(|(k, _)| !k.starts_with("paths."))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
