use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucvf::applicability::{analyze, ApplicabilityOptions};
use ucvf::eval::*;
use ucvf::features::build_all;
use ucvf::ingest::{
    annotate, estimate_homes, load_dataset, AnnotatedCheckIn, CategoryHierarchy, CheckIn, Dataset,
    HomeLocation,
};
use ucvf::{FeatureSpace, Pair, ViewKind};

fn at(day: u32, hour: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2012, 4, day)
        .unwrap()
        .and_hms_opt(hour, 0, 0)
        .unwrap()
}

fn record(user: &str, ts: NaiveDateTime, leaf: usize, root: usize) -> AnnotatedCheckIn {
    AnnotatedCheckIn {
        checkin: CheckIn {
            user_id: user.into(),
            poi_id: format!("p{leaf}"),
            category_id: format!("c{leaf}"),
            category_name: String::new(),
            latitude: 40.0,
            longitude: -74.0,
            timestamp: ts,
        },
        leaf,
        root,
    }
}

fn dataset(users: &[(&str, Vec<AnnotatedCheckIn>)]) -> Dataset {
    Dataset {
        users: users
            .iter()
            .map(|(u, r)| (u.to_string(), r.clone()))
            .collect(),
    }
}

fn user_with(n: usize) -> Vec<AnnotatedCheckIn> {
    // reverse chronological so the split has to sort
    (0..n)
        .rev()
        .map(|i| record("u", at(1 + i as u32 / 24, i as u32 % 24), 0, 0))
        .collect()
}

fn sizes(split: &DatasetSplit, user: &str) -> (usize, usize, usize) {
    let len = |d: &Dataset| d.users.get(user).map_or(0, Vec::len);
    (len(&split.train), len(&split.validation), len(&split.test))
}

#[test]
fn split_cuts_follow_floor_rule() {
    let d = dataset(&[
        ("a", user_with(10)),
        ("b", user_with(7)),
        ("c", user_with(1)),
    ]);
    let s = split_dataset(&d, SplitSpec::default()).unwrap();
    assert_eq!(sizes(&s, "a"), (8, 1, 1));
    assert_eq!(sizes(&s, "b"), (5, 1, 1));
    assert_eq!(sizes(&s, "c"), (1, 0, 0));
    assert_eq!(s.degenerate_users, vec!["c".to_string()]);
}

#[test]
fn split_is_chronological() {
    let d = dataset(&[("u", user_with(10))]);
    let s = split_dataset(&d, SplitSpec::default()).unwrap();
    let last_train = s.train.users["u"]
        .iter()
        .map(|r| r.checkin.timestamp)
        .max()
        .unwrap();
    let first_test = s.test.users["u"][0].checkin.timestamp;
    assert!(last_train < first_test);
}

#[test]
fn split_rejects_bad_fractions() {
    let spec = SplitSpec {
        train: 0.8,
        validation: 0.3,
    };
    assert!(matches!(
        split_dataset(&Dataset::default(), spec),
        Err(EvalError::InvalidSpec(_))
    ));
}

proptest! {
    #[test]
    fn split_partitions_records(lens in prop::collection::vec(1usize..40, 1..8)) {
        let users: Vec<(String, Vec<AnnotatedCheckIn>)> = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| (i.to_string(), user_with(n)))
            .collect();
        let d = Dataset { users: users.into_iter().collect() };
        let s = split_dataset(&d, SplitSpec::default()).unwrap();
        prop_assert_eq!(&s, &split_dataset(&d, SplitSpec::default()).unwrap());
        for (u, records) in &d.users {
            let (a, b, c) = sizes(&s, u);
            prop_assert_eq!(a + b + c, records.len());
            prop_assert!(a >= 1);
            let mut all: Vec<_> = s.train.users[u].clone();
            all.extend(s.validation.users.get(u).cloned().unwrap_or_default());
            all.extend(s.test.users.get(u).cloned().unwrap_or_default());
            let mut expect = records.clone();
            expect.sort_by_key(|r| r.checkin.timestamp);
            prop_assert_eq!(all, expect);
        }
    }
}

#[test]
fn accuracy_counts_top1_hits() {
    let preds = vec![vec![0], vec![1], vec![2], vec![0]];
    assert_eq!(accuracy_at_k(&preds, &[0, 1, 2, 1], 1).unwrap(), 0.75);
}

#[test]
fn accuracy_with_full_list_is_one() {
    let preds = vec![vec![2, 0, 1], vec![1, 2, 0]];
    assert_eq!(accuracy_at_k(&preds, &[0, 0], 3).unwrap(), 1.0);
}

#[test]
fn accuracy_errors() {
    assert!(matches!(
        accuracy_at_k(&[vec![0]], &[0, 1], 1),
        Err(EvalError::LengthMismatch {
            predictions: 1,
            queries: 2
        })
    ));
    assert!(matches!(
        accuracy_at_k(&[vec![0]], &[0], 2),
        Err(EvalError::ShortList {
            index: 0,
            len: 1,
            k: 2
        })
    ));
    assert!(matches!(
        accuracy_at_k(&[vec![0]], &[0], 0),
        Err(EvalError::BadK(0))
    ));
    assert_eq!(accuracy_at_k(&[], &[], 1).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn accuracy_matches_recount(seed in any::<u64>(), n in 1usize..30, labels in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..n {
            let mut p: Vec<usize> = (0..labels).collect();
            for i in (1..labels).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            preds.push(p);
            truth.push(rng.random_range(0..labels));
        }
        let mut prev = 0.0;
        for k in 1..=labels {
            let mut hits = 0;
            for (p, &y) in preds.iter().zip(&truth) {
                if p.iter().position(|&l| l == y).unwrap() < k {
                    hits += 1;
                }
            }
            let acc = accuracy_at_k(&preds, &truth, k).unwrap();
            prop_assert_eq!(acc, hits as f64 / n as f64);
            prop_assert!(acc >= prev);
            prev = acc;
        }
        prop_assert_eq!(prev, 1.0);
    }
}

#[test]
fn spearman_of_monotone_sequences() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]), Some(-1.0));
    assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
}

fn small_hierarchy() -> CategoryHierarchy {
    CategoryHierarchy::from_entries([
        ("c0", "Cafe", "Food"),
        ("c1", "Gym", "Outdoors & Recreation"),
        ("c2", "Office", "Professional & Other Places"),
    ])
    .unwrap()
}

fn near_home(user: &str) -> HomeLocation {
    HomeLocation {
        user_id: user.into(),
        latitude: 40.0,
        longitude: -74.0,
        support_count: 1,
    }
}

#[test]
fn baseline_prefers_the_cell_then_backs_off() {
    let h = small_hierarchy();
    let space = FeatureSpace::new(&h);
    let food = 0;
    let d = dataset(&[(
        "u",
        vec![
            record("u", at(1, 9), 0, food),
            record("u", at(2, 9), 0, food),
            record("u", at(3, 18), 1, 1),
            record("u", at(4, 18), 1, 1),
            record("u", at(5, 18), 1, 1),
        ],
    )]);
    let homes: BTreeMap<_, _> = [("u".to_string(), near_home("u"))].into();
    let b = FrequencyBaseline::fit(&d, &homes, &space, ViewKind::RootCategory).unwrap();
    assert_eq!(b.rank("u", 9, 0)[0], food);
    // unseen cell: the user's marginal puts root 1 (3 visits) first
    assert_eq!(b.rank("u", 3, 2), vec![1, 0, 2]);
    assert!(matches!(
        FrequencyBaseline::fit(&Dataset::default(), &homes, &space, ViewKind::RootCategory),
        Err(EvalError::EmptyTrain)
    ));
}

#[test]
fn baseline_matches_hand_count_table() {
    let h = small_hierarchy();
    let space = FeatureSpace::new(&h);
    // roots: 0 Food, 1 Outdoors, 2 Professional
    let d = dataset(&[
        (
            "a",
            vec![
                record("a", at(1, 8), 2, 2),
                record("a", at(2, 8), 0, 0),
                record("a", at(3, 8), 2, 2),
            ],
        ),
        (
            "b",
            vec![record("b", at(1, 8), 1, 1), record("b", at(2, 20), 1, 1)],
        ),
        ("c", vec![record("c", at(1, 12), 0, 0)]),
    ]);
    let homes: BTreeMap<_, _> = ["a", "b", "c"]
        .iter()
        .map(|u| (u.to_string(), near_home(u)))
        .collect();
    let b = FrequencyBaseline::fit(&d, &homes, &space, ViewKind::RootCategory).unwrap();
    // global counts: Food 2, Outdoors 2, Professional 2
    // a at 08h: cell [1,0,2] -> 2, 0, then 1
    assert_eq!(b.rank("a", 8, 0), vec![2, 0, 1]);
    // b at 20h: cell [0,1,0]; remaining tie on marginal broken by global then index
    assert_eq!(b.rank("b", 20, 0), vec![1, 0, 2]);
    // c at 08h: empty cell, marginal [1,0,0], then global tie -> index
    assert_eq!(b.rank("c", 8, 0), vec![0, 1, 2]);
    // unknown user: global only
    assert_eq!(b.rank("z", 0, 0), vec![0, 1, 2]);
    assert_eq!(b.labels(), 3);
}

proptest! {
    #[test]
    fn baseline_ranking_is_a_permutation(seed in any::<u64>(), t in 0usize..24, dist in 0usize..4) {
        let synth = generate_synthetic(&SynthSpec::planted(8, 1, 0.5, seed)).unwrap();
        let d = synth.dataset();
        let space = FeatureSpace::new(&synth.hierarchy);
        let homes = estimate_homes(&d);
        let b = FrequencyBaseline::fit(&d, &homes, &space, ViewKind::LeafCategory).unwrap();
        let mut r = b.rank("1", t, dist);
        r.sort_unstable();
        prop_assert_eq!(r, (0..65).collect::<Vec<_>>());
    }
}

#[test]
fn synthetic_round_trips_through_ingestion() {
    let spec = SynthSpec::planted(100, 6, 0.1, 3);
    let synth = generate_synthetic(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    synth.write(dir.path()).unwrap();
    let h = CategoryHierarchy::load(
        &dir.path().join("leaf_roots.csv"),
        &dir.path().join("leaf_labels.csv"),
    )
    .unwrap();
    assert_eq!(h, synth.hierarchy);
    let (loaded, summary) = load_dataset(&dir.path().join("checkins.tsv"), &h).unwrap();
    assert_eq!(summary.malformed_lines, 0);
    assert_eq!(summary.users, 100);
    assert_eq!(summary.checkins, synth.checkins.len());
    assert_eq!(loaded, synth.dataset());
    assert_eq!(synth.groups.len(), 100);
    assert_eq!(generate_synthetic(&spec).unwrap().checkins, synth.checkins);
}

#[test]
fn synthetic_spec_validation() {
    let mut spec = SynthSpec::planted(8, 2, 0.1, 0);
    assert_eq!(spec.user_count(), 8);
    spec.groups[0].noise = 1.5;
    assert!(matches!(
        generate_synthetic(&spec),
        Err(EvalError::InvalidSpec(_))
    ));
    let mut spec = SynthSpec::planted(8, 2, 0.1, 0);
    spec.months = 0;
    assert!(matches!(
        generate_synthetic(&spec),
        Err(EvalError::InvalidSpec(_))
    ));
}

#[test]
fn noiseless_users_have_zero_difference_on_their_pair() {
    let synth = generate_synthetic(&SynthSpec::planted(40, 4, 0.0, 11)).unwrap();
    let d = synth.dataset();
    let space = FeatureSpace::new(&synth.hierarchy);
    let homes = estimate_homes(&d);
    let report = analyze::<f64>(
        &d,
        &homes,
        &space,
        &Pair::CANONICAL,
        &Pair::CANONICAL,
        ApplicabilityOptions::default(),
    )
    .unwrap();
    for a in &report.assignments {
        let planted = synth.groups[&a.user_id];
        assert_eq!(
            a.record(planted).unwrap().sum_diff,
            0.0,
            "user {}",
            a.user_id
        );
    }
}

#[test]
fn pure_noise_does_not_favour_a_pair() {
    // df = 3, alpha = 0.01
    const CRITICAL: f64 = 11.3449;
    let mut totals = [0usize; 4];
    for seed in 0..30 {
        let synth = generate_synthetic(&SynthSpec::planted(80, 3, 1.0, 500 + seed)).unwrap();
        let d = synth.dataset();
        let space = FeatureSpace::new(&synth.hierarchy);
        let report = analyze::<f64>(
            &d,
            &estimate_homes(&d),
            &space,
            &Pair::CANONICAL,
            &Pair::CANONICAL,
            ApplicabilityOptions::default(),
        )
        .unwrap();
        for (i, (_, n)) in report.counts().iter().enumerate() {
            totals[i] += n;
        }
    }
    let n: usize = totals.iter().sum();
    let expected = n as f64 / 4.0;
    let chi2: f64 = totals
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < CRITICAL, "chi2 {chi2} totals {totals:?}");
}

fn tiny_cohort() -> (SynthDataset, Prepared<f64>, FeatureSpace) {
    let synth = generate_synthetic(&SynthSpec::planted(40, 3, 0.1, 5)).unwrap();
    let space = FeatureSpace::new(&synth.hierarchy);
    let prep = prepare(
        &synth.dataset(),
        &space,
        &Pair::CANONICAL,
        SplitSpec::default(),
        ApplicabilityOptions::default(),
    )
    .unwrap();
    (synth, prep, space)
}

#[test]
fn rq1_single_user_gives_one_row() {
    let synth = generate_synthetic(&SynthSpec::planted(4, 3, 0.1, 5)).unwrap();
    let mut d = synth.dataset();
    d.users.retain(|u, _| u == "1");
    let space = FeatureSpace::new(&synth.hierarchy);
    let prep: Prepared<f64> = prepare(
        &d,
        &space,
        &Pair::CANONICAL,
        SplitSpec::default(),
        ApplicabilityOptions::default(),
    )
    .unwrap();
    let rows = run_rq1(
        &prep.features,
        &prep.applicability,
        &prep.queries,
        &space,
        BucketScheme::Deciles,
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].cells.len(), 4);
    assert!(rows[0]
        .cells
        .iter()
        .all(|c| c.users == 1 && c.accuracy.is_some()));
}

#[test]
fn rq1_empty_buckets_have_no_accuracy() {
    let (_, prep, space) = tiny_cohort();
    let scheme = BucketScheme::Absolute {
        width: 1e9,
        buckets: 3,
    };
    let rows = run_rq1(
        &prep.features,
        &prep.applicability,
        &prep.queries,
        &space,
        scheme,
    );
    assert_eq!(rows.len(), 3);
    for c in &rows[0].cells {
        assert_eq!(c.users, 40);
        assert!(c.accuracy.is_some());
    }
    for row in &rows[1..] {
        for c in &row.cells {
            assert_eq!((c.users, c.queries, c.accuracy), (0, 0, None));
        }
    }
}

#[test]
fn rq1_deciles_cover_every_user() {
    let (_, prep, space) = tiny_cohort();
    let rows = run_rq1(
        &prep.features,
        &prep.applicability,
        &prep.queries,
        &space,
        BucketScheme::Deciles,
    );
    assert_eq!(rows.len(), 10);
    for i in 0..4 {
        assert_eq!(rows.iter().map(|r| r.cells[i].users).sum::<usize>(), 40);
        assert_eq!(
            rows.iter().map(|r| r.cells[i].queries).sum::<usize>(),
            prep.queries.len()
        );
    }
}

#[test]
fn rq2_reports_four_single_pairs_and_partitioned() {
    let (_, prep, space) = tiny_cohort();
    let r = run_rq2(
        &prep.features,
        &prep.applicability.assignment_map(),
        &Pair::CANONICAL,
        &prep.queries,
        &space,
    );
    assert_eq!(r.single.len(), 4);
    assert_eq!(r.queries, prep.queries.len());
    assert!((0.0..=1.0).contains(&r.partitioned));
}

#[test]
fn rq2_single_assigned_pair_equals_that_pair() {
    let (synth, prep, space) = tiny_cohort();
    let homes = estimate_homes(&prep.split.train);
    let report = analyze::<f64>(
        &prep.split.train,
        &homes,
        &space,
        &Pair::CANONICAL,
        &[Pair::DISTANCE_ROOT],
        ApplicabilityOptions::default(),
    )
    .unwrap();
    assert!(report
        .assignments
        .iter()
        .all(|a| a.assigned == Pair::DISTANCE_ROOT));
    let features = build_all(&prep.split.train, &homes, &Pair::CANONICAL, &space).unwrap();
    let r = run_rq2(
        &features,
        &report.assignment_map(),
        &Pair::CANONICAL,
        &prep.queries,
        &space,
    );
    let dr = r
        .single
        .iter()
        .find(|(p, _)| *p == Pair::DISTANCE_ROOT)
        .unwrap()
        .1;
    assert_eq!(r.partitioned, dr);
    assert_eq!(synth.groups.len(), 40);
}

#[test]
fn annotate_skips_unknown_categories() {
    let h = small_hierarchy();
    let mut c = record("u", at(1, 1), 0, 0).checkin;
    let mut bad = c.clone();
    bad.category_id = "nope".into();
    c.category_id = "c1".into();
    let (d, s) = annotate([c, bad], &h);
    assert_eq!((d.num_checkins(), s.unknown_category_records), (1, 1));
}
