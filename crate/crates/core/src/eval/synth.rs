use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::checkin::DEFAULT_HEADER;
use crate::ingest::geo::destination;
use crate::ingest::hierarchy::{CANONICAL_LEAF_COUNT, ROOT_CATEGORIES};
use crate::ingest::space::{DISTANCE_BUCKETS, TIME_BUCKETS};
use crate::ingest::{
    annotate, CategoryHierarchy, CheckIn, ContextKind, Dataset, GeoPoint, Pair, ViewKind,
};

/// Distance (km) ranges the generator draws from for each band, kept clear
/// of the band edges.
const BAND_RANGES_KM: [(f64, f64); DISTANCE_BUCKETS] =
    [(0.2, 0.8), (1.5, 9.5), (11.0, 29.0), (32.0, 60.0)];
const RESIDENCE: &str = "Residence";

/// Users regular in `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub pair: Pair,
    pub users: usize,
    /// Chance that a scheduled check-in is replaced by a uniform draw.
    pub noise: f64,
    pub checkins_per_month: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub groups: Vec<GroupProfile>,
    pub months: usize,
    /// Each user's noise is drawn uniformly from `noise ± spread * m`, where
    /// `m` is the distance from the group noise to the nearer of 0 and 1.
    pub noise_spread: f64,
    /// Distinct (context, label) habits per user.
    pub routine_len: usize,
    /// Night check-ins at the exact home position each month.
    pub home_anchors_per_month: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl SynthSpec {
    /// `users` split as evenly as possible over the four canonical pairs,
    /// earlier pairs taking the remainder.
    pub fn planted(users: usize, months: usize, noise: f64, seed: u64) -> Self {
        let groups = Pair::CANONICAL
            .iter()
            .enumerate()
            .map(|(i, &pair)| GroupProfile {
                pair,
                users: users / 4 + usize::from(i < users % 4),
                noise,
                checkins_per_month: 30,
            })
            .collect();
        Self {
            groups,
            months,
            noise_spread: 1.0,
            routine_len: 5,
            home_anchors_per_month: 2,
            start: NaiveDate::from_ymd_opt(2012, 4, 1).unwrap(),
            seed,
        }
    }

    pub fn user_count(&self) -> usize {
        self.groups.iter().map(|g| g.users).sum()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.user_count() == 0 {
            return bad("no users".into());
        }
        if self.months == 0 {
            return bad("no months".into());
        }
        if self.routine_len == 0 {
            return bad("routine length must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_spread) {
            return bad(format!("noise spread {} outside [0, 1]", self.noise_spread));
        }
        for g in &self.groups {
            if !(0.0..=1.0).contains(&g.noise) {
                return bad(format!("noise {} outside [0, 1]", g.noise));
            }
            if g.checkins_per_month == 0 {
                return bad(format!("group {} has no check-ins per month", g.pair));
            }
        }
        Ok(())
    }
}

/// Generated check-ins plus the ground truth behind them.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub checkins: Vec<CheckIn>,
    pub hierarchy: CategoryHierarchy,
    pub groups: BTreeMap<String, Pair>,
    pub user_noise: BTreeMap<String, f64>,
    pub homes: BTreeMap<String, GeoPoint>,
}

impl SynthDataset {
    pub fn dataset(&self) -> Dataset {
        annotate(self.checkins.iter().cloned(), &self.hierarchy).0
    }

    /// Writes `checkins.tsv`, `leaf_roots.csv`, `leaf_labels.csv` and
    /// `groups.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(fs::File::create(dir.join("checkins.tsv"))?);
        writeln!(out, "{}", DEFAULT_HEADER.join("\t"))?;
        for c in &self.checkins {
            writeln!(out, "{}", c.to_line())?;
        }
        out.flush()?;
        self.hierarchy
            .write(&dir.join("leaf_roots.csv"), &dir.join("leaf_labels.csv"))?;
        let mut g = BufWriter::new(fs::File::create(dir.join("groups.csv"))?);
        writeln!(g, "user_id,pair,noise")?;
        for (u, p) in &self.groups {
            writeln!(g, "{u},{},{}", p.code(), self.user_noise[u])?;
        }
        g.flush()
    }
}

fn leaf_id(root: usize, k: usize) -> String {
    format!("synth{root}{k:02}")
}

/// Nine root categories with 65 invented leaves spread over them.
pub fn synthetic_hierarchy() -> CategoryHierarchy {
    let mut entries = Vec::with_capacity(CANONICAL_LEAF_COUNT);
    for leaf in 0..CANONICAL_LEAF_COUNT {
        let root = leaf % ROOT_CATEGORIES.len();
        let k = leaf / ROOT_CATEGORIES.len();
        let name = ROOT_CATEGORIES[root];
        entries.push((
            leaf_id(root, k),
            format!("{name} {}", k + 1),
            name.to_string(),
        ));
    }
    CategoryHierarchy::from_entries(entries).expect("well-formed synthetic hierarchy")
}

struct Leaves {
    ids: Vec<String>,
    labels: Vec<String>,
    by_root: Vec<Vec<usize>>,
}

impl Leaves {
    fn new(h: &CategoryHierarchy) -> Self {
        let mut ids = vec![String::new(); h.leaf_labels().len()];
        let mut by_root = vec![Vec::new(); h.root_labels().len()];
        for (id, leaf, root) in h.category_ids() {
            ids[leaf] = id.to_string();
            by_root[root].push(leaf);
        }
        Self {
            ids,
            labels: h.leaf_labels().to_vec(),
            by_root,
        }
    }
}

#[derive(Clone, Copy)]
struct Habit {
    context: usize,
    label: usize,
}

struct UserPlan<'a> {
    user_id: String,
    pair: Pair,
    noise: f64,
    volume: usize,
    spec: &'a SynthSpec,
    leaves: &'a Leaves,
    hierarchy: &'a CategoryHierarchy,
}

impl UserPlan<'_> {
    fn generate(&self, rng: &mut ChaCha8Rng) -> (GeoPoint, Vec<CheckIn>) {
        let home = GeoPoint::new(
            rng.random_range(35.55..35.80),
            rng.random_range(139.55..139.85),
        );
        let contexts = match self.pair.context {
            ContextKind::Time => TIME_BUCKETS,
            ContextKind::Distance => DISTANCE_BUCKETS,
        };
        let labels = match self.pair.view {
            ViewKind::RootCategory => self.leaves.by_root.len(),
            ViewKind::LeafCategory => self.leaves.ids.len(),
        };
        let mut ctx_pool: Vec<usize> = (0..contexts).collect();
        ctx_pool.shuffle(rng);
        let habits: Vec<Habit> = ctx_pool
            .into_iter()
            .take(self.spec.routine_len.min(contexts))
            .map(|context| Habit {
                context,
                label: rng.random_range(0..labels),
            })
            .collect();
        let residence = self
            .hierarchy
            .root_labels()
            .iter()
            .position(|r| r == RESIDENCE)
            .map(|r| &self.leaves.by_root[r])
            .filter(|l| !l.is_empty())
            .unwrap_or(&self.leaves.by_root[0]);
        let anchor_leaf = residence[rng.random_range(0..residence.len())];

        let mut out = Vec::new();
        let mut poi = 0usize;
        for m in 0..self.spec.months {
            let first = self
                .spec
                .start
                .checked_add_months(chrono::Months::new(m as u32))
                .expect("date in range");
            let mut month = Vec::with_capacity(self.volume + self.spec.home_anchors_per_month);
            for a in 0..self.spec.home_anchors_per_month {
                let day = 1 + a * 28 / self.spec.home_anchors_per_month;
                let hour = 2 + (a % 3) as u32;
                month.push((day, hour, anchor_leaf, home, "home".to_string()));
            }
            for s in 0..self.volume {
                let day = 1 + s * 28 / self.volume;
                let (hour, leaf, band) = if rng.random::<f64>() < self.noise {
                    (
                        rng.random_range(0..TIME_BUCKETS),
                        rng.random_range(0..self.leaves.ids.len()),
                        rng.random_range(0..DISTANCE_BUCKETS),
                    )
                } else {
                    let habit = habits[s % habits.len()];
                    let leaf = match self.pair.view {
                        ViewKind::LeafCategory => habit.label,
                        ViewKind::RootCategory => {
                            let ls = &self.leaves.by_root[habit.label];
                            ls[rng.random_range(0..ls.len())]
                        }
                    };
                    match self.pair.context {
                        ContextKind::Time => {
                            (habit.context, leaf, rng.random_range(0..DISTANCE_BUCKETS))
                        }
                        ContextKind::Distance => {
                            (rng.random_range(0..TIME_BUCKETS), leaf, habit.context)
                        }
                    }
                };
                let (lo, hi) = BAND_RANGES_KM[band];
                let point =
                    destination(home, rng.random_range(lo..hi), rng.random_range(0.0..360.0));
                poi += 1;
                month.push((day, hour as u32, leaf, point, format!("v{}", poi)));
            }
            for (day, hour, leaf, point, poi_tag) in month {
                let ts = first
                    .with_day(day as u32)
                    .expect("day within month")
                    .and_hms_opt(hour, rng.random_range(0..60), rng.random_range(0..60))
                    .expect("valid time");
                out.push(CheckIn {
                    user_id: self.user_id.clone(),
                    poi_id: format!("{}-{poi_tag}", self.user_id),
                    category_id: self.leaves.ids[leaf].clone(),
                    category_name: self.leaves.labels[leaf].clone(),
                    latitude: point.lat,
                    longitude: point.lon,
                    timestamp: ts,
                });
            }
        }
        out.sort_by_key(|c| c.timestamp);
        (home, out)
    }
}

/// Check-ins for every user of `spec`, deterministic in `spec.seed`. Users
/// are numbered from 1 and assigned to groups in a seeded random order;
/// each user draws from its own ChaCha8 stream.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDataset, EvalError> {
    spec.validate()?;
    let hierarchy = synthetic_hierarchy();
    let leaves = Leaves::new(&hierarchy);
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut slots: Vec<usize> = spec
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, p)| std::iter::repeat_n(g, p.users))
        .collect();
    slots.shuffle(&mut master);

    let users: Vec<(String, usize, f64)> = slots
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let base = spec.groups[g].noise;
            let reach = spec.noise_spread * base.min(1.0 - base);
            let noise = (base + reach * master.random_range(-1.0..=1.0)).clamp(0.0, 1.0);
            ((i + 1).to_string(), g, noise)
        })
        .collect();

    let generated: Vec<(GeoPoint, Vec<CheckIn>)> = users
        .par_iter()
        .enumerate()
        .map(|(i, (user_id, g, noise))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            UserPlan {
                user_id: user_id.clone(),
                pair: spec.groups[*g].pair,
                noise: *noise,
                volume: spec.groups[*g].checkins_per_month,
                spec,
                leaves: &leaves,
                hierarchy: &hierarchy,
            }
            .generate(&mut rng)
        })
        .collect();

    let mut out = SynthDataset {
        checkins: Vec::new(),
        hierarchy: hierarchy.clone(),
        groups: BTreeMap::new(),
        user_noise: BTreeMap::new(),
        homes: BTreeMap::new(),
    };
    for ((user_id, g, noise), (home, checkins)) in users.into_iter().zip(generated) {
        out.groups.insert(user_id.clone(), spec.groups[g].pair);
        out.user_noise.insert(user_id.clone(), noise);
        out.homes.insert(user_id, home);
        out.checkins.extend(checkins);
    }
    Ok(out)
}
