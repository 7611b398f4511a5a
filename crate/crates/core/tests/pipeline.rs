use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ucvf::eval::{generate_synthetic, SynthSpec};
use ucvf::pipeline::*;

fn synth_dir(users: usize, seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    generate_synthetic(&SynthSpec::planted(users, 3, 0.1, seed))
        .unwrap()
        .write(dir.path())
        .unwrap();
    dir
}

fn config(data: &Path, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        dataset: data.join("checkins.tsv"),
        roots: data.join("leaf_roots.csv"),
        labels: data.join("leaf_labels.csv"),
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.epochs = 1;
    cfg.hidden = 16;
    cfg
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn train_without_features_is_a_missing_artifact() {
    let data = synth_dir(12, 1);
    let out = tempfile::tempdir().unwrap();
    let cfg = config(data.path(), out.path());
    run_pipeline(&cfg, &[Stage::Ingest]).unwrap();
    match run_pipeline(&cfg, &[Stage::Train]) {
        Err(PipelineError::MissingArtifact { stage, needs, .. }) => {
            assert_eq!((stage, needs), (Stage::Train, Stage::Features));
        }
        other => panic!("expected MissingArtifact, got {other:?}"),
    }
}

#[test]
fn missing_input_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let cfg = config(Path::new("/nonexistent"), out.path());
    assert!(matches!(
        run_pipeline(&cfg, &[Stage::Ingest]),
        Err(PipelineError::Config(_))
    ));
}

#[test]
fn full_pipeline_is_reproducible_and_traceable() {
    let data = synth_dir(30, 2);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let manifests = run_pipeline(&config(data.path(), a.path()), &Stage::ALL).unwrap();
    assert_eq!(manifests.len(), 6);
    run_pipeline(&config(data.path(), b.path()), &Stage::ALL).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs", k.display());
    }

    // every report names a manifest that lists it with the right hash
    let cfg = config(data.path(), a.path());
    for (rel, bytes) in &fa {
        if !rel.starts_with(REPORT_DIR) {
            continue;
        }
        let text = String::from_utf8(bytes.clone()).unwrap();
        let (manifest, _, _) = parse_csv(&text).unwrap();
        let m = Manifest::load(&a.path().join(&manifest)).unwrap();
        assert_eq!(m.config_sha256, cfg.hash());
        assert_eq!(m.seed, cfg.seed);
        let entry = m
            .outputs
            .iter()
            .find(|o| Path::new(&o.file) == rel)
            .unwrap();
        assert_eq!(entry.sha256, sha256_file(&a.path().join(rel)).unwrap());
    }

    // rerunning one stage rewrites identical files
    run_pipeline(&cfg, &[Stage::Applicability]).unwrap();
    assert_eq!(files(a.path()), fa);
}

#[test]
fn json_and_csv_reports_agree() {
    let data = synth_dir(20, 3);
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(data.path(), out.path());
    run_pipeline(&cfg, &Stage::ALL).unwrap();
    let csv = files(&out.path().join(REPORT_DIR));
    cfg.format = Format::Json;
    run_report(&cfg).unwrap();
    let mut compared = 0;
    for (rel, bytes) in &csv {
        let json_path = out.path().join(REPORT_DIR).join(rel.with_extension("json"));
        let (_, header, rows) = parse_csv(std::str::from_utf8(bytes).unwrap()).unwrap();
        let (manifest, table) = Table::from_json(&fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(manifest, "report.manifest.json");
        assert_eq!(header, table.columns);
        let rendered: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::render).collect())
            .collect();
        assert_eq!(rows, rendered, "{}", rel.display());
        compared += 1;
    }
    assert_eq!(compared, 9);
}

#[test]
fn assignment_summary_sums_to_user_total() {
    let data = synth_dir(24, 4);
    let out = tempfile::tempdir().unwrap();
    let cfg = config(data.path(), out.path());
    run_pipeline(
        &cfg,
        &[Stage::Ingest, Stage::Features, Stage::Applicability],
    )
    .unwrap();
    let text = fs::read_to_string(out.path().join("reports/assignment_summary.csv")).unwrap();
    let (_, header, rows) = parse_csv(&text).unwrap();
    assert_eq!(header, ["tr", "tc", "dr", "dc", "total"]);
    let n: Vec<usize> = rows[0].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(n[..4].iter().sum::<usize>(), n[4]);
    assert_eq!(n[4], 24);
}

#[test]
fn enforced_selection_restricts_pairs() {
    let data = synth_dir(12, 5);
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(data.path(), out.path());
    cfg.enforce_selection = true;
    assert!(matches!(
        run_pipeline(&cfg, &[Stage::Ingest, Stage::Features]),
        Err(PipelineError::MissingArtifact {
            needs: Stage::Influence,
            ..
        })
    ));
    cfg.delta = 1e9;
    run_pipeline(&cfg, &[Stage::Influence]).unwrap();
    assert!(matches!(
        run_pipeline(&cfg, &[Stage::Features]),
        Err(PipelineError::Stage {
            stage: Stage::Features,
            ..
        })
    ));
    let influence = fs::read_to_string(out.path().join("influence.json")).unwrap();
    let results: Vec<serde_json::Value> = serde_json::from_str(&influence).unwrap();
    let best = results
        .iter()
        .map(|r| r["gain_ratio"].as_f64().unwrap())
        .fold(0.0, f64::max);
    cfg.delta = best / 2.0;
    run_pipeline(&cfg, &[Stage::Influence, Stage::Features]).unwrap();
    let pairs: Vec<String> =
        serde_json::from_str(&fs::read_to_string(out.path().join("features/pairs.json")).unwrap())
            .unwrap();
    assert!(!pairs.is_empty() && pairs.len() <= 4);
    let kept = results
        .iter()
        .filter(|r| r["gain_ratio"].as_f64().unwrap() > cfg.delta)
        .count();
    assert_eq!(pairs.len(), kept);
}

#[test]
fn empty_report_table_is_header_only() {
    let out = tempfile::tempdir().unwrap();
    let t = Table::new("empty", ["a", "b"]);
    let written = emit_reports(out.path(), &[t], Format::Csv, "x.manifest.json").unwrap();
    let text = fs::read_to_string(out.path().join(&written[0])).unwrap();
    assert_eq!(text, "# manifest: x.manifest.json\na,b\n");
}
