//! Per-user context x view count matrices.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{AnnotatedCheckIn, ContextKind, Dataset, FeatureSpace, HomeLocation, Pair};
use crate::matrix::DenseMatrix;
use crate::scalar::Numeric;

pub const MATRIX_FILE_HEADER: &str = "user_id,context,view,rows,cols";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("user {user:?}: distance context requires a home location")]
    MissingHome { user: String },
    #[error("{path}:{line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Counts of one user's check-ins over (context bucket, view label).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub user_id: String,
    pub pair: Pair,
    pub counts: DenseMatrix<u64>,
}

impl FeatureMatrix {
    pub fn zeros(user_id: &str, pair: Pair, space: &FeatureSpace) -> Self {
        let (rows, cols) = space.shape(pair);
        Self {
            user_id: user_id.to_string(),
            pair,
            counts: DenseMatrix::zeros(rows, cols),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.as_slice().iter().sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.counts.shape()
    }

    pub fn normalized<T: Numeric>(&self) -> DenseMatrix<T> {
        normalize_matrix(&self.counts)
    }

    /// Elementwise sum; both matrices must have the same pair and shape.
    pub fn merged(&self, other: &FeatureMatrix) -> FeatureMatrix {
        assert_eq!(self.pair, other.pair);
        assert!(self.counts.same_shape(&other.counts));
        let data = self
            .counts
            .as_slice()
            .iter()
            .zip(other.counts.as_slice())
            .map(|(a, b)| a + b)
            .collect();
        let (r, c) = self.shape();
        FeatureMatrix {
            user_id: self.user_id.clone(),
            pair: self.pair,
            counts: DenseMatrix::from_vec(r, c, data).unwrap(),
        }
    }
}

/// Divides every entry by the matrix total; an all-zero matrix stays zero.
pub fn normalize_matrix<T: Numeric>(m: &DenseMatrix<u64>) -> DenseMatrix<T> {
    let total: u64 = m.as_slice().iter().sum();
    if total == 0 {
        return m.map(|_| T::zero());
    }
    let t = T::from_count(total);
    m.map(|&c| T::from_count(c) / t)
}

pub fn build_ucvf<'a, I>(
    user_id: &str,
    records: I,
    pair: Pair,
    space: &FeatureSpace,
    home: Option<&HomeLocation>,
) -> Result<FeatureMatrix, FeatureError>
where
    I: IntoIterator<Item = &'a AnnotatedCheckIn>,
{
    if pair.context == ContextKind::Distance && home.is_none() {
        return Err(FeatureError::MissingHome {
            user: user_id.to_string(),
        });
    }
    let mut m = FeatureMatrix::zeros(user_id, pair, space);
    for r in records {
        let row = space
            .context_value(pair.context, r, home)
            .expect("home checked above");
        let col = space.view_value(pair.view, r);
        m.counts[(row, col)] += 1;
    }
    Ok(m)
}

/// One matrix per pair, all built from the same records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserFeatureSet {
    pub user_id: String,
    pub matrices: Vec<FeatureMatrix>,
}

impl UserFeatureSet {
    pub fn get(&self, pair: Pair) -> Option<&FeatureMatrix> {
        self.matrices.iter().find(|m| m.pair == pair)
    }
}

pub fn build_ufs_for_user(
    user_id: &str,
    records: &[AnnotatedCheckIn],
    pairs: &[Pair],
    space: &FeatureSpace,
    home: Option<&HomeLocation>,
) -> Result<UserFeatureSet, FeatureError> {
    let matrices = pairs
        .iter()
        .map(|&p| build_ucvf(user_id, records, p, space, home))
        .collect::<Result<_, _>>()?;
    Ok(UserFeatureSet {
        user_id: user_id.to_string(),
        matrices,
    })
}

/// Feature sets for every user of `dataset`, keyed by user id.
pub fn build_all(
    dataset: &Dataset,
    homes: &BTreeMap<String, HomeLocation>,
    pairs: &[Pair],
    space: &FeatureSpace,
) -> Result<BTreeMap<String, UserFeatureSet>, FeatureError> {
    let sets: Vec<_> = dataset
        .users
        .par_iter()
        .map(|(u, records)| build_ufs_for_user(u, records, pairs, space, homes.get(u)))
        .collect::<Result<_, _>>()?;
    Ok(sets.into_iter().map(|s| (s.user_id.clone(), s)).collect())
}

/// Writes all matrices of one pair: a header line, then one line per user
/// holding the five header fields followed by the row-major counts.
pub fn write_pair_file<'a, I>(path: &Path, matrices: I) -> Result<(), FeatureError>
where
    I: IntoIterator<Item = &'a FeatureMatrix>,
{
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{MATRIX_FILE_HEADER}")?;
    for m in matrices {
        if m.user_id.contains([',', '\n']) {
            return Err(FeatureError::Format {
                path: path.display().to_string(),
                line: 0,
                reason: format!("user id {:?} cannot be written", m.user_id),
            });
        }
        let (rows, cols) = m.shape();
        write!(
            out,
            "{},{},{},{rows},{cols}",
            m.user_id,
            m.pair.context.name(),
            m.pair.view.name()
        )?;
        for v in m.counts.as_slice() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pair_file(path: &Path) -> Result<Vec<FeatureMatrix>, FeatureError> {
    let bad = |line: usize, reason: String| FeatureError::Format {
        path: path.display().to_string(),
        line,
        reason,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != MATRIX_FILE_HEADER {
                return Err(bad(1, "missing header".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            return Err(bad(i + 1, "too few fields".into()));
        }
        let context = fields[1].parse().map_err(|e| bad(i + 1, e))?;
        let view = fields[2].parse().map_err(|e| bad(i + 1, e))?;
        let dim = |s: &str| s.parse::<usize>().map_err(|e| bad(i + 1, e.to_string()));
        let (rows, cols) = (dim(fields[3])?, dim(fields[4])?);
        let values = fields[5..]
            .iter()
            .map(|s| s.parse::<u64>().map_err(|e| bad(i + 1, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let counts = DenseMatrix::from_vec(rows, cols, values)
            .ok_or_else(|| bad(i + 1, format!("expected {} values", rows * cols)))?;
        out.push(FeatureMatrix {
            user_id: fields[0].to_string(),
            pair: Pair::new(context, view),
            counts,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CategoryHierarchy, CheckIn};
    use chrono::NaiveDate;

    fn space() -> FeatureSpace {
        let h = CategoryHierarchy::from_entries([
            ("f1", "Diner", "Food"),
            ("f2", "Sushi", "Food"),
            ("t1", "Airport", "Travel"),
        ])
        .unwrap();
        FeatureSpace::new(&h)
    }

    fn home() -> HomeLocation {
        HomeLocation {
            user_id: "u".into(),
            latitude: 40.0,
            longitude: -74.0,
            support_count: 1,
        }
    }

    fn rec(hour: u32, lat: f64, leaf: usize, root: usize) -> AnnotatedCheckIn {
        AnnotatedCheckIn {
            checkin: CheckIn {
                user_id: "u".into(),
                poi_id: "p".into(),
                category_id: "c".into(),
                category_name: String::new(),
                latitude: lat,
                longitude: -74.0,
                timestamp: NaiveDate::from_ymd_opt(2012, 4, 2)
                    .unwrap()
                    .and_hms_opt(hour, 5, 0)
                    .unwrap(),
            },
            leaf,
            root,
        }
    }

    #[test]
    fn empty_records_give_zero_matrix() {
        let m = build_ucvf("u", &[], Pair::TIME_LEAF, &space(), None).unwrap();
        assert_eq!(m.shape(), (24, 3));
        assert_eq!(m.total(), 0);
    }

    #[test]
    fn counts_by_hour_and_root() {
        // Food = root 0, Travel = root 1
        let rs = [rec(9, 40.0, 1, 0), rec(9, 40.0, 2, 0), rec(14, 40.0, 0, 1)];
        let m = build_ucvf("u", &rs, Pair::TIME_ROOT, &space(), None).unwrap();
        for r in 0..24 {
            for c in 0..2 {
                let expected = match (r, c) {
                    (9, 0) => 2,
                    (14, 1) => 1,
                    _ => 0,
                };
                assert_eq!(m.counts[(r, c)], expected);
            }
        }
    }

    #[test]
    fn distance_requires_home() {
        let err = build_ucvf("u", &[], Pair::DISTANCE_ROOT, &space(), None);
        assert!(matches!(err, Err(FeatureError::MissingHome { .. })));
    }

    #[test]
    fn single_record_traced_through_all_pairs() {
        // 0.2 degrees north of home is ~22 km: band 2
        let rs = [rec(7, 40.2, 2, 1)];
        let ufs = build_ufs_for_user("u", &rs, &Pair::CANONICAL, &space(), Some(&home())).unwrap();
        assert_eq!(ufs.matrices.len(), 4);
        let expect = [
            (Pair::TIME_ROOT, (7, 1)),
            (Pair::TIME_LEAF, (7, 2)),
            (Pair::DISTANCE_ROOT, (2, 1)),
            (Pair::DISTANCE_LEAF, (2, 2)),
        ];
        for (pair, cell) in expect {
            let m = ufs.get(pair).unwrap();
            assert_eq!(m.total(), 1);
            assert_eq!(m.counts[cell], 1, "{pair}");
        }
    }

    #[test]
    fn normalization() {
        let m = DenseMatrix::from_vec(2, 2, vec![2u64, 0, 1, 1]).unwrap();
        let n: DenseMatrix<f64> = normalize_matrix(&m);
        assert_eq!(n.as_slice(), &[0.5, 0.0, 0.25, 0.25]);
        let z: DenseMatrix<f64> = normalize_matrix(&DenseMatrix::<u64>::zeros(2, 3));
        assert!(z.as_slice().iter().all(|&x| x == 0.0));
        let one = DenseMatrix::from_vec(2, 2, vec![0u64, 4, 0, 0]).unwrap();
        assert_eq!(
            normalize_matrix::<f64>(&one).as_slice(),
            &[0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn exact_normalization() {
        use num_rational::Ratio;
        let m = DenseMatrix::from_vec(1, 3, vec![1u64, 1, 1]).unwrap();
        let n: DenseMatrix<Ratio<i64>> = normalize_matrix(&m);
        assert!(n.as_slice().iter().all(|&x| x == Ratio::new(1, 3)));
    }

    #[test]
    fn pair_file_round_trip() {
        let rs = [rec(9, 40.0, 1, 0), rec(23, 40.5, 0, 1)];
        let ufs = build_ufs_for_user("u", &rs, &Pair::CANONICAL, &space(), Some(&home())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let ms = [ufs.get(Pair::DISTANCE_LEAF).unwrap().clone()];
        write_pair_file(&path, &ms).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "u,distance,leaf,4,3,0,1,0,0,0,0,0,0,0,1,0,0"
        );
        assert_eq!(read_pair_file(&path).unwrap(), ms);
    }
}
