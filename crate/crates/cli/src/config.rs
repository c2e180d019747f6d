//! Run configuration for the `experiment` command: a JSON file mirroring the
//! experiment grid plus corpus parameters, fully validated before any work
//! starts. Unknown keys are rejected.

use std::path::Path;

use privtraj_core::eval::GridConfig;
use privtraj_core::synth::SynthParams;
use privtraj_core::{porto, synth, trajectory::Corpus, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Synth,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: CorpusSource,
    /// Porto-format CSV path when `source` is `file`.
    pub path: Option<String>,
    pub synth: SynthParams,
    /// Point-count filter applied when ingesting a file corpus.
    pub min_points: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            source: CorpusSource::Synth,
            path: None,
            synth: SynthParams::default(),
            min_points: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    pub jobs: Option<usize>,
    pub corpus: CorpusConfig,
    pub grid: GridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: "out".to_string(),
            jobs: None,
            corpus: CorpusConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("bad config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.source == CorpusSource::File && self.corpus.path.is_none() {
            return Err(Error::invalid("corpus.source = file requires corpus.path"));
        }
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(Error::invalid("jobs must be at least 1"));
            }
        }
        self.grid.validate()
    }

    /// The master seed overrides the grid's own seed and the synthetic
    /// corpus seed, so one number pins the whole run.
    pub fn resolve_seeds(&mut self) {
        self.grid.seed = self.seed;
        self.corpus.synth.seed = self.seed;
    }

    pub fn build_corpus(&self) -> Result<Corpus> {
        match self.corpus.source {
            CorpusSource::Synth => synth::synth_corpus(&self.corpus.synth),
            CorpusSource::File => {
                let path = self.corpus.path.as_ref().expect("validated");
                let (corpus, _) = porto::ingest_porto(Path::new(path), self.corpus.min_points)?;
                Ok(corpus)
            }
        }
    }
}
