use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::manifest::{sha256_file, FileHash, Manifest};
use super::table::{key_value_table, Cell, Format, Table};
use super::{PipelineError, RunConfig, Stage};
use crate::applicability::{analyze, ApplicabilityOptions, ApplicabilityReport};
use crate::eval::{
    accuracy_at_k, build_queries, run_rq1, run_rq2, split_dataset, EvalQuery, FrequencyBaseline,
    Rq1Row, Rq2Result,
};
use crate::features::{build_all, read_pair_file, write_pair_file, FeatureError, UserFeatureSet};
use crate::influence::{influence_analysis, InfluenceResult};
use crate::ingest::{
    estimate_homes, load_dataset, CategoryHierarchy, ContextKind, Dataset, FeatureSpace,
    HomeLocation, IngestSummary, Pair, ViewKind,
};
use crate::model::{
    build_examples, predict_proba_batch, rank_labels, train, user_inputs, Checkpoint, EpochLog,
    ModelConfig,
};

/// Subdirectory of the output directory that holds report tables.
pub const REPORT_DIR: &str = "reports";

const HIER_ROOTS: &str = "hierarchy/leaf_roots.csv";
const HIER_LABELS: &str = "hierarchy/leaf_labels.csv";
const TRAIN_SPLIT: &str = "split/train.tsv";
const VALIDATION_SPLIT: &str = "split/validation.tsv";
const TEST_SPLIT: &str = "split/test.tsv";
const HOMES: &str = "homes.json";
const INGEST: &str = "ingest.json";
const INFLUENCE: &str = "influence.json";
const PAIRS: &str = "features/pairs.json";
const APPLICABILITY: &str = "applicability.json";
const CHECKPOINT: &str = "model.checkpoint.json";
const TRAINING: &str = "training.json";
const EVALUATION: &str = "evaluation.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub summary: IngestSummary,
    pub train_checkins: usize,
    pub validation_checkins: usize,
    pub test_checkins: usize,
    /// Users too small for the split fractions; all their records are in train.
    pub degenerate_users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingArtifact {
    pub train_examples: usize,
    pub validation_examples: usize,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: String,
    pub k: usize,
    /// `k` capped at the number of classes.
    pub k_effective: usize,
    pub queries: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub pairs: Vec<Pair>,
    pub accuracy: Vec<AccuracyRow>,
    pub rq1: Vec<Rq1Row>,
    pub rq2: Rq2Result,
}

/// Book-keeping for one stage: what it read and wrote.
struct Run<'a> {
    cfg: &'a RunConfig,
    stage: Stage,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, stage: Stage) -> Self {
        Self {
            cfg,
            stage,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out_dir.join(rel)
    }

    fn err<E: Into<Box<dyn std::error::Error + Send + Sync>>>(&self, e: E) -> PipelineError {
        PipelineError::stage(self.stage, e)
    }

    fn require(&mut self, needs: Stage, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        if !p.is_file() {
            return Err(PipelineError::MissingArtifact {
                stage: self.stage,
                needs,
                path: p,
            });
        }
        if !self.inputs.iter().any(|i| i == rel) {
            self.inputs.push(rel.to_string());
        }
        Ok(p)
    }

    fn read_json<T: DeserializeOwned>(
        &mut self,
        needs: Stage,
        rel: &str,
    ) -> Result<T, PipelineError> {
        let p = self.require(needs, rel)?;
        let text = fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| self.err(format!("{}: {e}", p.display())))
    }

    /// Creates the parent directory and records `rel` as an output.
    fn output(&mut self, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        self.outputs.push(rel.to_string());
        Ok(p)
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let p = self.output(rel)?;
        let mut s = serde_json::to_string_pretty(value).map_err(|e| self.err(e))?;
        s.push('\n');
        fs::write(&p, s).map_err(|e| PipelineError::io(&p, e))
    }

    fn hierarchy(&mut self) -> Result<CategoryHierarchy, PipelineError> {
        let roots = self.require(Stage::Ingest, HIER_ROOTS)?;
        let labels = self.require(Stage::Ingest, HIER_LABELS)?;
        CategoryHierarchy::load(&roots, &labels).map_err(|e| self.err(e))
    }

    fn split(&mut self, rel: &str, h: &CategoryHierarchy) -> Result<Dataset, PipelineError> {
        let p = self.require(Stage::Ingest, rel)?;
        Ok(load_dataset(&p, h).map_err(|e| self.err(e))?.0)
    }

    fn homes(&mut self) -> Result<BTreeMap<String, HomeLocation>, PipelineError> {
        self.read_json(Stage::Ingest, HOMES)
    }

    fn dataset_sha(&mut self) -> Result<String, PipelineError> {
        let rel = Manifest::file_name(Stage::Ingest.name());
        let p = self.require(Stage::Ingest, &rel)?;
        Ok(Manifest::load(&p)?.dataset_sha256)
    }

    fn pairs(&mut self) -> Result<Vec<Pair>, PipelineError> {
        let codes: Vec<String> = self.read_json(Stage::Features, PAIRS)?;
        codes
            .iter()
            .map(|c| c.parse().map_err(|e: String| self.err(e)))
            .collect()
    }

    fn features(
        &mut self,
        pairs: &[Pair],
    ) -> Result<BTreeMap<String, UserFeatureSet>, PipelineError> {
        for p in pairs {
            self.require(Stage::Features, &pair_file(*p))?;
        }
        load_features(&self.cfg.out_dir, pairs).map_err(|e| self.err(e))
    }

    /// Writes reports and the manifest; returns the manifest path.
    fn finish(
        mut self,
        dataset_sha: String,
        extra_inputs: Vec<FileHash>,
        tables: &[Table],
    ) -> Result<PathBuf, PipelineError> {
        let name = Manifest::file_name(self.stage.name());
        let reports = emit_reports(&self.cfg.out_dir, tables, self.cfg.format, &name)?;
        self.outputs.extend(reports);
        let mut m = Manifest::new(self.stage.name(), self.cfg, dataset_sha);
        m.inputs = extra_inputs;
        for rel in &self.inputs {
            m.inputs.push(FileHash {
                file: rel.clone(),
                sha256: sha256_file(&self.path(rel))?,
            });
        }
        for rel in &self.outputs {
            m.outputs.push(FileHash {
                file: rel.clone(),
                sha256: sha256_file(&self.path(rel))?,
            });
        }
        let path = self.path(&name);
        m.save(&path)?;
        log::info!("{}: wrote {} files", self.stage, m.outputs.len());
        Ok(path)
    }
}

fn pair_file(p: Pair) -> String {
    format!("features/{}.csv", p.code())
}

/// Reads the per-pair matrix files under `out_dir` into feature sets with
/// matrices in `pairs` order.
pub fn load_features(
    out_dir: &Path,
    pairs: &[Pair],
) -> Result<BTreeMap<String, UserFeatureSet>, FeatureError> {
    let mut out: BTreeMap<String, UserFeatureSet> = BTreeMap::new();
    for &p in pairs {
        for m in read_pair_file(&out_dir.join(pair_file(p)))? {
            out.entry(m.user_id.clone())
                .or_insert_with(|| UserFeatureSet {
                    user_id: m.user_id.clone(),
                    matrices: Vec::new(),
                })
                .matrices
                .push(m);
        }
    }
    Ok(out)
}

/// Writes each table under `REPORT_DIR`; returns the relative paths.
pub fn emit_reports(
    out_dir: &Path,
    tables: &[Table],
    format: Format,
    manifest: &str,
) -> Result<Vec<String>, PipelineError> {
    let dir = out_dir.join(REPORT_DIR);
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    let mut written = Vec::with_capacity(tables.len());
    for t in tables {
        let rel = format!("{REPORT_DIR}/{}", t.file_name(format));
        let p = out_dir.join(&rel);
        fs::write(&p, t.render(format, manifest)).map_err(|e| PipelineError::io(&p, e))?;
        written.push(rel);
    }
    Ok(written)
}

fn ingest(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Ingest);
    cfg.validate_inputs()?;
    let h = CategoryHierarchy::load(&cfg.roots, &cfg.labels).map_err(|e| run.err(e))?;
    let (dataset, summary) = load_dataset(&cfg.dataset, &h).map_err(|e| run.err(e))?;
    if dataset.is_empty() {
        return Err(run.err("no usable check-ins"));
    }
    let split = split_dataset(&dataset, cfg.split).map_err(|e| run.err(e))?;
    let homes = estimate_homes(&split.train);

    let (roots, labels) = (run.output(HIER_ROOTS)?, run.output(HIER_LABELS)?);
    h.write(&roots, &labels)
        .map_err(|e| PipelineError::io(&roots, e))?;
    for (rel, part) in [
        (TRAIN_SPLIT, &split.train),
        (VALIDATION_SPLIT, &split.validation),
        (TEST_SPLIT, &split.test),
    ] {
        let p = run.output(rel)?;
        part.write_tsv(&p).map_err(|e| PipelineError::io(&p, e))?;
    }
    run.write_json(HOMES, &homes)?;
    let artifact = IngestArtifact {
        summary,
        train_checkins: split.train.num_checkins(),
        validation_checkins: split.validation.num_checkins(),
        test_checkins: split.test.num_checkins(),
        degenerate_users: split.degenerate_users,
    };
    run.write_json(INGEST, &artifact)?;

    let mut inputs = Vec::new();
    for p in [&cfg.dataset, &cfg.roots, &cfg.labels] {
        inputs.push(FileHash {
            file: p.display().to_string(),
            sha256: sha256_file(p)?,
        });
    }
    let dataset_sha = inputs[0].sha256.clone();
    run.finish(dataset_sha, inputs, &ingest_tables(&artifact))
}

fn ingest_tables(a: &IngestArtifact) -> Vec<Table> {
    let s = &a.summary;
    vec![key_value_table(
        "ingest_summary",
        &[
            ("users", Cell::count(s.users)),
            ("pois", Cell::count(s.pois)),
            ("checkins", Cell::count(s.checkins)),
            ("lines_read", Cell::count(s.lines_read)),
            ("header_skipped", Cell::Bool(s.header_skipped)),
            ("malformed_lines", Cell::count(s.malformed_lines)),
            (
                "unknown_category_records",
                Cell::count(s.unknown_category_records),
            ),
            ("train_checkins", Cell::count(a.train_checkins)),
            ("validation_checkins", Cell::count(a.validation_checkins)),
            ("test_checkins", Cell::count(a.test_checkins)),
            ("degenerate_users", Cell::count(a.degenerate_users.len())),
        ],
    )]
}

fn influence(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Influence);
    let sha = run.dataset_sha()?;
    let h = run.hierarchy()?;
    let train = run.split(TRAIN_SPLIT, &h)?;
    let homes = run.homes()?;
    let space = FeatureSpace::new(&h);
    let results = influence_analysis::<f64>(
        &train,
        &homes,
        &space,
        &[ContextKind::Time, ContextKind::Distance],
        &[ViewKind::RootCategory, ViewKind::LeafCategory],
        cfg.delta,
    )
    .map_err(|e| run.err(e))?;
    run.write_json(INFLUENCE, &results)?;
    run.finish(sha, Vec::new(), &influence_tables(&results))
}

fn influence_tables(results: &[InfluenceResult<f64>]) -> Vec<Table> {
    let mut t = Table::new(
        "influence",
        [
            "context",
            "view",
            "entropy",
            "gain",
            "gain_ratio",
            "selected",
        ],
    );
    for r in results {
        t.push(vec![
            Cell::Text(r.context.name().into()),
            Cell::Text(r.view.name().into()),
            Cell::float(r.entropy),
            Cell::float(r.gain),
            Cell::float(r.gain_ratio),
            Cell::Bool(r.selected),
        ]);
    }
    vec![t]
}

fn features(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Features);
    let sha = run.dataset_sha()?;
    let h = run.hierarchy()?;
    let train = run.split(TRAIN_SPLIT, &h)?;
    let homes = run.homes()?;
    let space = FeatureSpace::new(&h);
    let pairs: Vec<Pair> = if cfg.enforce_selection {
        let results: Vec<InfluenceResult<f64>> = run.read_json(Stage::Influence, INFLUENCE)?;
        let selected: Vec<Pair> = results
            .iter()
            .filter(|r| r.selected)
            .map(|r| Pair::new(r.context, r.view))
            .collect();
        Pair::CANONICAL
            .into_iter()
            .filter(|p| selected.contains(p))
            .collect()
    } else {
        Pair::CANONICAL.to_vec()
    };
    if pairs.is_empty() {
        return Err(run.err(format!(
            "no pair has gain ratio above delta = {}",
            cfg.delta
        )));
    }
    let features = build_all(&train, &homes, &pairs, &space).map_err(|e| run.err(e))?;
    for &p in &pairs {
        let path = run.output(&pair_file(p))?;
        write_pair_file(&path, features.values().filter_map(|u| u.get(p)))
            .map_err(|e| run.err(e))?;
    }
    let codes: Vec<&str> = pairs.iter().map(|p| p.code()).collect();
    run.write_json(PAIRS, &codes)?;
    run.finish(sha, Vec::new(), &features_tables(&pairs, &features))
}

fn features_tables(pairs: &[Pair], features: &BTreeMap<String, UserFeatureSet>) -> Vec<Table> {
    let mut t = Table::new(
        "features_summary",
        ["pair", "rows", "cols", "users", "checkins"],
    );
    for &p in pairs {
        let ms: Vec<_> = features.values().filter_map(|u| u.get(p)).collect();
        let (rows, cols) = ms.first().map_or((0, 0), |m| m.shape());
        t.push(vec![
            Cell::Text(p.code().into()),
            Cell::count(rows),
            Cell::count(cols),
            Cell::count(ms.len()),
            Cell::Int(ms.iter().map(|m| m.total() as i64).sum()),
        ]);
    }
    vec![t]
}

fn applicability(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Applicability);
    let sha = run.dataset_sha()?;
    let pairs = run.pairs()?;
    let h = run.hierarchy()?;
    let train = run.split(TRAIN_SPLIT, &h)?;
    let homes = run.homes()?;
    let space = FeatureSpace::new(&h);
    let options = ApplicabilityOptions {
        unit: cfg.time_unit,
        normalize_periods: cfg.normalize_monthly,
    };
    let report =
        analyze::<f64>(&train, &homes, &space, &pairs, &pairs, options).map_err(|e| run.err(e))?;
    run.write_json(APPLICABILITY, &report)?;
    run.finish(sha, Vec::new(), &applicability_tables(&report))
}

fn applicability_tables(report: &ApplicabilityReport<f64>) -> Vec<Table> {
    let codes: Vec<&str> = report.pairs.iter().map(|p| p.code()).collect();
    let mut columns = vec!["user_id".to_string()];
    columns.extend(codes.iter().map(|c| format!("sum_{c}")));
    columns.extend(codes.iter().map(|c| format!("rank_{c}")));
    columns.push("assigned_pair".into());
    let mut users = Table::new("assignments", columns);
    for a in &report.assignments {
        let mut row = vec![Cell::Text(a.user_id.clone())];
        row.extend(a.records.iter().map(|r| Cell::float(r.sum_diff)));
        row.extend(a.records.iter().map(|r| Cell::count(r.rank)));
        row.push(Cell::Text(a.assigned.code().into()));
        users.push(row);
    }
    let mut columns: Vec<String> = codes.iter().map(|c| c.to_string()).collect();
    columns.push("total".into());
    let mut summary = Table::new("assignment_summary", columns);
    let mut row: Vec<Cell> = report
        .counts()
        .iter()
        .map(|(_, n)| Cell::count(*n))
        .collect();
    row.push(Cell::count(report.assignments.len()));
    summary.push(row);
    vec![users, summary]
}

fn train_stage(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Train);
    let sha = run.dataset_sha()?;
    let pairs = run.pairs()?;
    let features = run.features(&pairs)?;
    let report: ApplicabilityReport<f64> = run.read_json(Stage::Applicability, APPLICABILITY)?;
    let h = run.hierarchy()?;
    let train_set = run.split(TRAIN_SPLIT, &h)?;
    let val_set = run.split(VALIDATION_SPLIT, &h)?;
    let homes = run.homes()?;
    let space = FeatureSpace::new(&h);

    let mut mc = ModelConfig::canonical(&space, &pairs, cfg.target_view);
    mc.filters = cfg.filters;
    mc.hidden = cfg.hidden;
    mc.learning_rate = cfg.learning_rate;
    mc.batch_size = cfg.batch_size;
    mc.epochs = cfg.epochs;
    mc.conditioning = cfg.conditioning;
    mc.seed = cfg.seed;

    let inputs = user_inputs::<f64>(
        &features,
        &report.assignment_map(),
        &pairs,
        &space,
        mc.conditioning,
    );
    let tr = build_examples(&train_set, &homes, &space, &inputs, mc.target);
    let va = build_examples(&val_set, &homes, &space, &inputs, mc.target);
    log::info!(
        "training on {} examples, validating on {}",
        tr.len(),
        va.len()
    );
    let outcome = train(&mc, &tr, &va, cfg.seed).map_err(|e| run.err(e))?;

    let path = run.output(CHECKPOINT)?;
    Checkpoint::new(&mc, cfg.seed, outcome.best_epoch, &outcome.params)
        .save(&path)
        .map_err(|e| run.err(e))?;
    let artifact = TrainingArtifact {
        train_examples: tr.len(),
        validation_examples: va.len(),
        best_epoch: outcome.best_epoch,
        log: outcome.log,
    };
    run.write_json(TRAINING, &artifact)?;
    run.finish(sha, Vec::new(), &training_tables(&artifact))
}

fn training_tables(a: &TrainingArtifact) -> Vec<Table> {
    let mut t = Table::new(
        "training_log",
        ["epoch", "train_loss", "val_loss", "val_top1"],
    );
    for l in &a.log {
        t.push(vec![
            Cell::count(l.epoch),
            Cell::float(l.train_loss),
            Cell::Float(l.val_loss),
            Cell::Float(l.val_top1),
        ]);
    }
    vec![t]
}

fn evaluate(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut run = Run::new(cfg, Stage::Evaluate);
    let sha = run.dataset_sha()?;
    let ck_path = run.require(Stage::Train, CHECKPOINT)?;
    let ck = Checkpoint::load(&ck_path).map_err(|e| run.err(e))?;
    let params = ck.params::<f64>().map_err(|e| run.err(e))?;
    let mc = ck.config;
    let pairs = run.pairs()?;
    let features = run.features(&pairs)?;
    let report: ApplicabilityReport<f64> = run.read_json(Stage::Applicability, APPLICABILITY)?;
    let h = run.hierarchy()?;
    let train_set = run.split(TRAIN_SPLIT, &h)?;
    let test_set = run.split(TEST_SPLIT, &h)?;
    let homes = run.homes()?;
    let space = FeatureSpace::new(&h);
    let assignments = report.assignment_map();

    let inputs = user_inputs::<f64>(&features, &assignments, &pairs, &space, mc.conditioning);
    let examples = build_examples(&test_set, &homes, &space, &inputs, mc.target);
    let queries: Vec<EvalQuery> = build_queries(&test_set, &homes, &space);
    let model_queries: Vec<&EvalQuery> = queries
        .iter()
        .filter(|q| inputs.contains_key(&q.user_id))
        .collect();
    if model_queries.len() != examples.len() {
        return Err(run.err(format!(
            "{} test examples for {} queries",
            examples.len(),
            model_queries.len()
        )));
    }

    let probs = predict_proba_batch(&params, &mc, &examples).map_err(|e| run.err(e))?;
    let model_rank: Vec<Vec<usize>> = probs.iter().map(|p| rank_labels(p)).collect();
    let labels: Vec<usize> = model_queries.iter().map(|q| q.label(mc.target)).collect();
    let baseline =
        FrequencyBaseline::fit(&train_set, &homes, &space, mc.target).map_err(|e| run.err(e))?;
    let base_rank: Vec<Vec<usize>> = model_queries
        .iter()
        .map(|q| baseline.rank(&q.user_id, q.time, q.distance))
        .collect();

    let mut accuracy = Vec::new();
    for (method, ranks) in [("model", &model_rank), ("baseline", &base_rank)] {
        for &k in &cfg.ks {
            let k_effective = k.min(mc.classes);
            let acc = accuracy_at_k(ranks, &labels, k_effective).map_err(|e| run.err(e))?;
            accuracy.push(AccuracyRow {
                method: method.into(),
                k,
                k_effective,
                queries: labels.len(),
                accuracy: acc,
            });
        }
    }
    let artifact = EvaluationArtifact {
        rq1: run_rq1(&features, &report, &queries, &space, cfg.buckets),
        rq2: run_rq2(&features, &assignments, &pairs, &queries, &space),
        pairs,
        accuracy,
    };
    run.write_json(EVALUATION, &artifact)?;
    run.finish(sha, Vec::new(), &evaluation_tables(&artifact))
}

fn evaluation_tables(a: &EvaluationArtifact) -> Vec<Table> {
    let mut acc = Table::new(
        "accuracy",
        ["method", "k", "k_effective", "queries", "accuracy"],
    );
    for r in &a.accuracy {
        acc.push(vec![
            Cell::Text(r.method.clone()),
            Cell::count(r.k),
            Cell::count(r.k_effective),
            Cell::count(r.queries),
            Cell::float(r.accuracy),
        ]);
    }

    let mut columns = vec!["bucket".to_string()];
    for p in &a.pairs {
        for f in ["users", "min_diff", "max_diff", "queries", "accuracy"] {
            columns.push(format!("{}_{f}", p.code()));
        }
    }
    let mut rq1 = Table::new("rq1", columns);
    for row in &a.rq1 {
        let mut cells = vec![Cell::count(row.bucket)];
        for c in &row.cells {
            cells.extend([
                Cell::count(c.users),
                Cell::Float(c.min_diff),
                Cell::Float(c.max_diff),
                Cell::count(c.queries),
                Cell::Float(c.accuracy),
            ]);
        }
        rq1.push(cells);
    }

    let mut columns = vec!["queries".to_string()];
    columns.extend(a.rq2.single.iter().map(|(p, _)| p.code().to_string()));
    columns.push("partitioned".into());
    let mut rq2 = Table::new("rq2", columns);
    let mut row = vec![Cell::count(a.rq2.queries)];
    row.extend(a.rq2.single.iter().map(|(_, x)| Cell::float(*x)));
    row.push(Cell::float(a.rq2.partitioned));
    rq2.push(row);
    vec![acc, rq1, rq2]
}

/// Report tables of `stage`, rebuilt from its stored artifacts.
pub fn stage_tables(cfg: &RunConfig, stage: Stage) -> Result<Vec<Table>, PipelineError> {
    let mut run = Run::new(cfg, stage);
    Ok(match stage {
        Stage::Ingest => ingest_tables(&run.read_json(stage, INGEST)?),
        Stage::Influence => {
            let r: Vec<InfluenceResult<f64>> = run.read_json(stage, INFLUENCE)?;
            influence_tables(&r)
        }
        Stage::Features => {
            let pairs = run.pairs()?;
            let features = run.features(&pairs)?;
            features_tables(&pairs, &features)
        }
        Stage::Applicability => applicability_tables(&run.read_json(stage, APPLICABILITY)?),
        Stage::Train => training_tables(&run.read_json(stage, TRAINING)?),
        Stage::Evaluate => evaluation_tables(&run.read_json(stage, EVALUATION)?),
    })
}

/// Re-renders the reports of every stage whose artifacts exist, in the
/// configured format, under a `report` manifest.
pub fn run_report(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let mut tables = Vec::new();
    for stage in Stage::ALL {
        match stage_tables(cfg, stage) {
            Ok(t) => tables.extend(t),
            Err(PipelineError::MissingArtifact { .. }) if stage != Stage::Ingest => {}
            Err(e) => return Err(e),
        }
    }
    let name = Manifest::file_name("report");
    let written = emit_reports(&cfg.out_dir, &tables, cfg.format, &name)?;
    let ingest = cfg.out_dir.join(Manifest::file_name(Stage::Ingest.name()));
    let mut m = Manifest::new("report", cfg, Manifest::load(&ingest)?.dataset_sha256);
    for rel in written {
        m.outputs.push(FileHash {
            sha256: sha256_file(&cfg.out_dir.join(&rel))?,
            file: rel,
        });
    }
    let path = cfg.out_dir.join(name);
    m.save(&path)?;
    Ok(path)
}

/// Runs one stage; returns the path of its manifest.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    log::info!("stage {stage}");
    match stage {
        Stage::Ingest => ingest(cfg),
        Stage::Influence => influence(cfg),
        Stage::Features => features(cfg),
        Stage::Applicability => applicability(cfg),
        Stage::Train => train_stage(cfg),
        Stage::Evaluate => evaluate(cfg),
    }
}

/// Runs the requested stages in pipeline order.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut order = stages.to_vec();
    order.sort();
    order.dedup();
    order.into_iter().map(|s| run_stage(cfg, s)).collect()
}
