//! Loading check-in files into per-user groups annotated with categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checkin::{parse_checkin_line, CheckIn, CheckInSchema, DEFAULT_HEADER};
use super::hierarchy::CategoryHierarchy;
use super::home::{estimate_home, HomeLocation};

/// Parse errors kept verbatim in the summary.
const KEPT_ERRORS: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// A check-in with its leaf and root category indices resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCheckIn {
    pub checkin: CheckIn,
    pub leaf: usize,
    pub root: usize,
}

/// Check-ins grouped by user id; within a user, file order is kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub users: BTreeMap<String, Vec<AnnotatedCheckIn>>,
}

impl Dataset {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_checkins(&self) -> usize {
        self.users.values().map(Vec::len).sum()
    }

    pub fn num_pois(&self) -> usize {
        self.records()
            .map(|r| r.checkin.poi_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn records(&self) -> impl Iterator<Item = &AnnotatedCheckIn> {
        self.users.values().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Writes every record in user order, with a header row.
    pub fn write_tsv(&self, path: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "{}", DEFAULT_HEADER.join("\t"))?;
        for r in self.records() {
            writeln!(out, "{}", r.checkin.to_line())?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub users: usize,
    pub pois: usize,
    pub checkins: usize,
    pub lines_read: usize,
    pub header_skipped: bool,
    pub malformed_lines: usize,
    pub unknown_category_records: usize,
    pub unknown_categories: Vec<String>,
    pub sample_errors: Vec<String>,
}

/// Groups parsed check-ins by user, resolving categories. Records with an
/// unknown category id are skipped and counted.
pub fn annotate<I>(checkins: I, hierarchy: &CategoryHierarchy) -> (Dataset, IngestSummary)
where
    I: IntoIterator<Item = CheckIn>,
{
    let mut dataset = Dataset::default();
    let mut summary = IngestSummary::default();
    let mut unknown = BTreeSet::new();
    for checkin in checkins {
        match hierarchy.lookup(&checkin.category_id) {
            Some((leaf, root)) => dataset
                .users
                .entry(checkin.user_id.clone())
                .or_default()
                .push(AnnotatedCheckIn {
                    checkin,
                    leaf,
                    root,
                }),
            None => {
                summary.unknown_category_records += 1;
                unknown.insert(checkin.category_id);
            }
        }
    }
    summary.unknown_categories = unknown.into_iter().collect();
    summary.users = dataset.num_users();
    summary.pois = dataset.num_pois();
    summary.checkins = dataset.num_checkins();
    (dataset, summary)
}

pub fn read_dataset<R: BufRead>(
    reader: R,
    hierarchy: &CategoryHierarchy,
    schema: &CheckInSchema,
) -> io::Result<(Dataset, IngestSummary)> {
    let mut parsed = Vec::new();
    let mut lines_read = 0;
    let mut header_skipped = false;
    let mut malformed = 0;
    let mut errors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines_read += 1;
        if i == 0 && schema.is_header(&line) {
            header_skipped = true;
            continue;
        }
        match parse_checkin_line(&line, i + 1, schema) {
            Ok(c) => parsed.push(c),
            Err(e) => {
                malformed += 1;
                if errors.len() < KEPT_ERRORS {
                    errors.push(e.to_string());
                }
            }
        }
    }
    let (dataset, mut summary) = annotate(parsed, hierarchy);
    summary.lines_read = lines_read;
    summary.header_skipped = header_skipped;
    summary.malformed_lines = malformed;
    summary.sample_errors = errors;
    if summary.unknown_category_records > 0 {
        log::warn!(
            "skipped {} records with {} unknown category ids",
            summary.unknown_category_records,
            summary.unknown_categories.len()
        );
    }
    Ok((dataset, summary))
}

pub fn load_dataset(
    path: &Path,
    hierarchy: &CategoryHierarchy,
) -> Result<(Dataset, IngestSummary), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    read_dataset(BufReader::new(file), hierarchy, &CheckInSchema::default()).map_err(io_err)
}

/// Home estimate for every user, keyed by user id.
pub fn estimate_homes(dataset: &Dataset) -> BTreeMap<String, HomeLocation> {
    dataset
        .users
        .par_iter()
        .map(|(user, records)| {
            let home = estimate_home(user, records.iter().map(|r| &r.checkin))
                .expect("dataset users have at least one record");
            (user.clone(), home)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hierarchy() -> CategoryHierarchy {
        CategoryHierarchy::from_entries([
            ("4b", "American Restaurant", "Food"),
            ("4a", "Train Station", "Travel & Transport"),
        ])
        .unwrap()
    }

    fn read(text: &str) -> (Dataset, IngestSummary) {
        read_dataset(text.as_bytes(), &hierarchy(), &CheckInSchema::default()).unwrap()
    }

    const LINES: &str =
        "1\t4d\t4b\tAmerican Restaurant\t40.7\t-73.9\tSat\t2012\tApr\t07\t17:42:24\n\
                         49\t42\t4a\tTrain Station\t40.7\t-73.9\tWed\t2012\tApr\t04\t12:11:28\n\
                         1\t4c\t4a\tTrain Station\t40.8\t-73.9\tMon\t2012\tNov\t05\t23:48:22\n";

    #[test]
    fn empty_input() {
        let (ds, s) = read("");
        assert!(ds.is_empty());
        assert_eq!((s.users, s.pois, s.checkins), (0, 0, 0));
    }

    #[test]
    fn groups_by_user() {
        let (ds, s) = read(LINES);
        let sizes: Vec<_> = ds
            .users
            .iter()
            .map(|(u, r)| (u.as_str(), r.len()))
            .collect();
        assert_eq!(sizes, [("1", 2), ("49", 1)]);
        assert_eq!((s.users, s.pois, s.checkins), (2, 3, 3));
        let first = &ds.users["1"][0];
        assert_eq!((first.root, first.leaf), (0, 0));
        assert_eq!(ds.users["1"][1].root, 1);
    }

    #[test]
    fn header_and_bad_lines_counted() {
        let text = format!(
            "{}\n{LINES}1\t4d\t4b\tx\t91\t0\tSat\t2012\tApr\t07\t17:42:24\nshort\tline\n",
            DEFAULT_HEADER.join("\t")
        );
        let (ds, s) = read(&text);
        assert!(s.header_skipped);
        assert_eq!(s.malformed_lines, 2);
        assert_eq!(s.sample_errors.len(), 2);
        assert_eq!(ds.num_checkins(), 3);
    }

    #[test]
    fn unknown_categories_skipped() {
        let text = LINES.replace("\t4a\t", "\tzz\t");
        let (ds, s) = read(&text);
        assert_eq!(ds.num_checkins(), 1);
        assert_eq!(s.unknown_category_records, 2);
        assert_eq!(s.unknown_categories, ["zz"]);
    }

    #[test]
    fn tsv_round_trip() {
        let (ds, _) = read(LINES);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        ds.write_tsv(&path).unwrap();
        let (back, s) = load_dataset(&path, &hierarchy()).unwrap();
        assert!(s.header_skipped);
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.tsv"), &hierarchy()),
            Err(IngestError::Io { .. })
        ));
    }
}
