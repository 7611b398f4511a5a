//! Stage orchestration: each stage reads the artifacts of earlier stages
//! from the output directory, writes its own, renders report tables and
//! records a manifest.

mod config;
mod manifest;
mod stages;
mod table;

use std::error::Error as StdError;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub use config::RunConfig;
pub use manifest::{sha256_file, version_string, FileHash, Manifest, MANIFEST_FORMAT};
pub use stages::{
    emit_reports, load_features, run_pipeline, run_report, run_stage, stage_tables, AccuracyRow,
    EvaluationArtifact, IngestArtifact, TrainingArtifact, REPORT_DIR,
};
pub use table::{key_value_table, parse_csv, round_sig6, Cell, CsvParts, Format, Table};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: missing artifact {} (run `{needs}` first)", path.display())]
    MissingArtifact {
        stage: Stage,
        needs: Stage,
        path: PathBuf,
    },
    #[error("stage {stage} failed")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn stage<E: Into<Box<dyn StdError + Send + Sync>>>(stage: Stage, e: E) -> Self {
        PipelineError::Stage {
            stage,
            source: e.into(),
        }
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Influence,
    Features,
    Applicability,
    Train,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Influence,
        Stage::Features,
        Stage::Applicability,
        Stage::Train,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Influence => "influence",
            Stage::Features => "features",
            Stage::Applicability => "applicability",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}
