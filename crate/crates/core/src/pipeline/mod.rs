//! Staged, resumable pipeline driven by a [`RunConfig`].
//!
//! Every stage writes its artifacts into its own directory and seals them
//! with a [`Manifest`]. A stage first checks that each upstream manifest
//! exists, matches the current configuration and still hashes to the
//! recorded content; otherwise it fails with a staleness error naming the
//! upstream stage. A stage whose own manifest is already current is skipped
//! unless forced.

mod config;
mod manifest;
mod stages;
mod tables;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use config::{
    BaselineConfig, CrossvalConfig, FeatureConfig, GraphConfig, GridConfig, RunConfig, SplitConfig,
    TAU_CHOICES,
};
pub use manifest::{content_hash, list_files, require_fresh, Manifest, MANIFEST_FILE};
pub use stages::{NodeTable, MODEL_NAMES};
pub use tables::{read_table, write_table, AblationRow, FoldRow, ModelSummary, SummaryRow};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Generate,
    Ingest,
    Featurize,
    Graph,
    Train,
    Grid,
    Ablate,
    Crossval,
    Report,
}

impl Stage {
    /// Execution order of a full run.
    pub const ALL: [Stage; 9] = [
        Stage::Generate,
        Stage::Ingest,
        Stage::Featurize,
        Stage::Graph,
        Stage::Train,
        Stage::Grid,
        Stage::Ablate,
        Stage::Crossval,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Ingest => "ingest",
            Stage::Featurize => "featurize",
            Stage::Graph => "graph",
            Stage::Train => "train",
            Stage::Grid => "grid",
            Stage::Ablate => "ablate",
            Stage::Crossval => "crossval",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this one reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Generate => &[],
            Stage::Ingest => &[Stage::Generate],
            Stage::Featurize => &[Stage::Generate, Stage::Ingest],
            Stage::Graph => &[Stage::Featurize],
            Stage::Train | Stage::Grid | Stage::Crossval => &[Stage::Featurize, Stage::Graph],
            Stage::Ablate => &[Stage::Featurize],
            Stage::Report => &[Stage::Ingest, Stage::Graph, Stage::Train],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config("stage", format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    /// Manifest current; nothing was recomputed.
    UpToDate,
}

pub struct Pipeline {
    config: RunConfig,
    force: bool,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Pipeline> {
        config.validate()?;
        Ok(Pipeline { config, force: false })
    }

    /// Recompute stages even when their manifests are current.
    pub fn force(mut self, force: bool) -> Pipeline {
        self.force = force;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        match stage {
            Stage::Generate => self.config.data_dir.clone(),
            s => self.config.artifact_dir.join(s.name()),
        }
    }

    pub fn run_all(&self) -> Result<Vec<(Stage, StageOutcome)>> {
        Stage::ALL.iter().map(|&s| Ok((s, self.run(s)?))).collect()
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        let mut inputs = BTreeMap::new();
        let mut deps: Vec<Stage> = stage.upstream().to_vec();
        if stage == Stage::Report {
            // optional sections are included whenever they have been run
            for s in [Stage::Grid, Stage::Ablate, Stage::Crossval] {
                if Manifest::load(&self.stage_dir(s))?.is_some() {
                    deps.push(s);
                }
            }
        }
        for &dep in &deps {
            let m = require_fresh(&self.stage_dir(dep), dep.name(), &self.config.stage_hash(dep))?;
            inputs.insert(dep.name().to_string(), m.content_hash);
        }
        let dir = self.stage_dir(stage);
        let hash = self.config.stage_hash(stage);
        if !self.force {
            if let Some(m) = Manifest::load(&dir)? {
                if m.config_hash == hash && m.inputs == inputs && m.intact(&dir) {
                    log::info!("{stage}: up to date");
                    return Ok(StageOutcome::UpToDate);
                }
            }
        }
        self.clear(stage)?;
        log::info!("{stage}: running");
        let ctx = stages::Context {
            config: &self.config,
            dir: &dir,
            config_hash: &hash,
            pipeline: self,
        };
        match stage {
            Stage::Generate => stages::generate(&ctx)?,
            Stage::Ingest => stages::ingest(&ctx)?,
            Stage::Featurize => stages::featurize(&ctx)?,
            Stage::Graph => stages::graph(&ctx)?,
            Stage::Train => stages::train(&ctx)?,
            Stage::Grid => stages::grid(&ctx)?,
            Stage::Ablate => stages::ablate(&ctx)?,
            Stage::Crossval => stages::crossval(&ctx)?,
            Stage::Report => stages::report(&ctx, &deps)?,
        }
        Manifest::seal(&dir, stage.name(), &hash, self.config.seed, inputs)?;
        Ok(StageOutcome::Ran)
    }

    /// Removes previous output. The data directory may hold unrelated
    /// files, so only its manifest is dropped there.
    fn clear(&self, stage: Stage) -> Result<()> {
        let dir = self.stage_dir(stage);
        if stage == Stage::Generate {
            let m = dir.join(MANIFEST_FILE);
            if m.exists() {
                std::fs::remove_file(m)?;
            }
        } else if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        Ok(())
    }
}
