use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::table::{hex, Format};
use super::PipelineError;
use crate::applicability::TimeUnit;
use crate::eval::{BucketScheme, SplitSpec};
use crate::ingest::ViewKind;
use crate::model::Conditioning;

/// Every setting of a pipeline run.
///
/// Config files hold one `key = value` per line; `#` starts a comment. Keys
/// are the field names below.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Check-in TSV.
    pub dataset: PathBuf,
    /// `leaf_id,root_label` CSV.
    pub roots: PathBuf,
    /// `leaf_id,leaf_label` CSV.
    pub labels: PathBuf,
    /// Where artifacts and reports go. Not part of the config hash.
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Gain-ratio threshold for pair selection.
    pub delta: f64,
    /// Restrict later stages to the pairs that pass `delta`.
    pub enforce_selection: bool,
    /// Compare per-period distributions instead of raw counts.
    pub normalize_monthly: bool,
    pub time_unit: TimeUnit,
    pub split: SplitSpec,
    pub target_view: ViewKind,
    pub conditioning: Conditioning,
    pub filters: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub ks: Vec<usize>,
    pub buckets: BucketScheme,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("checkins.tsv"),
            roots: PathBuf::from("leaf_roots.csv"),
            labels: PathBuf::from("leaf_labels.csv"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            delta: 0.0,
            enforce_selection: false,
            normalize_monthly: false,
            time_unit: TimeUnit::Month,
            split: SplitSpec::default(),
            target_view: ViewKind::RootCategory,
            conditioning: Conditioning::Indicator,
            filters: 8,
            hidden: 128,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 10,
            ks: vec![1, 5, 10],
            buckets: BucketScheme::Deciles,
            format: Format::Csv,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| PipelineError::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, PipelineError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(PipelineError::Config(format!(
            "{key} = {value:?}: expected true or false"
        ))),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_text(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.roots, &mut cfg.labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        match key {
            "dataset" => self.dataset = value.into(),
            "roots" => self.roots = value.into(),
            "labels" => self.labels = value.into(),
            "out_dir" => self.out_dir = value.into(),
            "seed" => self.seed = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "enforce_selection" => self.enforce_selection = parse_bool(key, value)?,
            "normalize_monthly" => self.normalize_monthly = parse_bool(key, value)?,
            "time_unit" => self.time_unit = parse(key, value)?,
            "split_train" => self.split.train = parse(key, value)?,
            "split_validation" => self.split.validation = parse(key, value)?,
            "target_view" => self.target_view = parse(key, value)?,
            "conditioning" => self.conditioning = parse(key, value)?,
            "filters" => self.filters = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "k" => {
                self.ks = value
                    .split(',')
                    .map(|s| parse(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "buckets" => {
                self.buckets = match value {
                    "deciles" => BucketScheme::Deciles,
                    "absolute" => BucketScheme::absolute_grid(),
                    _ => {
                        return Err(PipelineError::Config(format!(
                            "buckets = {value:?}: expected deciles or absolute"
                        )))
                    }
                }
            }
            "format" => self.format = parse(key, value)?,
            _ => return Err(PipelineError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Range checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be a finite non-negative number");
        }
        self.split
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("k must list positive integers");
        }
        if self.filters == 0 || self.hidden == 0 || self.batch_size == 0 {
            return bad("filters, hidden and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    /// Checks that the input files exist.
    pub fn validate_inputs(&self) -> Result<(), PipelineError> {
        for p in [&self.dataset, &self.roots, &self.labels] {
            if !p.is_file() {
                return Err(PipelineError::Config(format!(
                    "{} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// The effective settings as `(key, value)` in a fixed order, without
    /// `out_dir`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let ks: Vec<String> = self.ks.iter().map(ToString::to_string).collect();
        let buckets = match self.buckets {
            BucketScheme::Deciles => "deciles",
            BucketScheme::Absolute { .. } => "absolute",
        };
        let unit = match self.time_unit {
            TimeUnit::Month => "month",
            TimeUnit::Week => "week",
        };
        let conditioning = match self.conditioning {
            Conditioning::Indicator => "indicator",
            Conditioning::Mask => "mask",
        };
        vec![
            ("dataset", self.dataset.display().to_string()),
            ("roots", self.roots.display().to_string()),
            ("labels", self.labels.display().to_string()),
            ("seed", self.seed.to_string()),
            ("delta", self.delta.to_string()),
            ("enforce_selection", self.enforce_selection.to_string()),
            ("normalize_monthly", self.normalize_monthly.to_string()),
            ("time_unit", unit.to_string()),
            ("split_train", self.split.train.to_string()),
            ("split_validation", self.split.validation.to_string()),
            ("target_view", self.target_view.name().to_string()),
            ("conditioning", conditioning.to_string()),
            ("filters", self.filters.to_string()),
            ("hidden", self.hidden.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("k", ks.join(",")),
            ("buckets", buckets.to_string()),
            ("format", self.format.extension().to_string()),
        ]
    }

    /// [`RunConfig::entries`] in config-file syntax.
    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("k", "1, 3").unwrap();
        cfg.set("target_view", "leaf").unwrap();
        cfg.set("buckets", "absolute").unwrap();
        cfg.set("conditioning", "mask").unwrap();
        cfg.set("time_unit", "week").unwrap();
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = RunConfig::from_text("# run\nseed = 4 # trailing\n\nepochs=2\n").unwrap();
        assert_eq!((cfg.seed, cfg.epochs), (4, 2));
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn out_dir_does_not_change_hash() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("nope = 1").is_err());
        assert!(RunConfig::from_text("seed").is_err());
        assert!(RunConfig::from_text("seed = x").is_err());
        assert!(RunConfig::from_text("enforce_selection = maybe").is_err());
        let mut cfg = RunConfig::default();
        cfg.set("k", "0").unwrap();
        assert!(cfg.validate().is_err());
        cfg.dataset = "/nonexistent/checkins.tsv".into();
        assert!(cfg.validate_inputs().is_err());
    }
}
