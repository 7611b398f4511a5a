//! Leaf-to-root category hierarchy.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

/// Root categories of the venue hierarchy, as labelled in the source data.
pub const ROOT_CATEGORIES: [&str; 9] = [
    "Arts & Entertainment",
    "College & University",
    "Event",
    "Food",
    "Outdoors & Recreation",
    "Professional & Other Places",
    "Residence",
    "Shop & Service",
    "Travel & Transport",
];

pub const CANONICAL_ROOT_COUNT: usize = 9;
pub const CANONICAL_LEAF_COUNT: usize = 65;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: expected `leaf_id,value`")]
    BadLine { path: String, line: usize },
    #[error("leaf id {0:?} is mapped to more than one root")]
    ConflictingRoot(String),
    #[error("leaf label {0:?} appears under more than one root")]
    LeafUnderTwoRoots(String),
    #[error("leaf id {0:?} has a root but no label")]
    MissingLabel(String),
    #[error("hierarchy is empty")]
    Empty,
}

/// Total map from category id to leaf and root indices.
///
/// Both index spaces are the lexicographic order of their labels and are
/// frozen at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryHierarchy {
    ids: BTreeMap<String, (usize, usize)>,
    root_labels: Vec<String>,
    leaf_labels: Vec<String>,
    leaf_root: Vec<usize>,
}

impl CategoryHierarchy {
    /// Builds from `(leaf_id, leaf_label, root_label)` triples. Several ids
    /// may share a leaf label; a leaf label must sit under one root only.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut by_id: BTreeMap<String, (String, String)> = BTreeMap::new();
        for (id, leaf, root) in entries {
            let (id, leaf, root) = (id.into(), leaf.into(), root.into());
            if let Some((_, prev_root)) = by_id.get(&id) {
                if *prev_root != root {
                    return Err(HierarchyError::ConflictingRoot(id));
                }
            }
            by_id.insert(id, (leaf, root));
        }
        if by_id.is_empty() {
            return Err(HierarchyError::Empty);
        }

        let mut leaf_to_root_label: BTreeMap<&str, &str> = BTreeMap::new();
        for (leaf, root) in by_id.values() {
            if let Some(prev) = leaf_to_root_label.insert(leaf, root) {
                if prev != root {
                    return Err(HierarchyError::LeafUnderTwoRoots(leaf.clone()));
                }
            }
        }
        let root_labels: Vec<String> = by_id
            .values()
            .map(|(_, r)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let leaf_labels: Vec<String> = leaf_to_root_label.keys().map(|s| s.to_string()).collect();
        let root_index = |label: &str| {
            root_labels
                .binary_search_by(|r| r.as_str().cmp(label))
                .unwrap()
        };
        let leaf_root = leaf_labels
            .iter()
            .map(|l| root_index(leaf_to_root_label[l.as_str()]))
            .collect();
        let ids = by_id
            .iter()
            .map(|(id, (leaf, root))| {
                let leaf_idx = leaf_labels.binary_search(leaf).unwrap();
                (id.clone(), (leaf_idx, root_index(root)))
            })
            .collect();
        Ok(Self {
            ids,
            root_labels,
            leaf_labels,
            leaf_root,
        })
    }

    /// Loads `leaf_id,root_label` and `leaf_id,leaf_label` files. A first
    /// line starting with `leaf_id` is treated as a header.
    pub fn load(roots_path: &Path, labels_path: &Path) -> Result<Self, HierarchyError> {
        let roots = read_pairs(roots_path)?;
        let labels: BTreeMap<String, String> = read_pairs(labels_path)?.into_iter().collect();
        let mut entries = Vec::with_capacity(roots.len());
        for (id, root) in roots {
            let leaf = labels
                .get(&id)
                .cloned()
                .ok_or_else(|| HierarchyError::MissingLabel(id.clone()))?;
            entries.push((id, leaf, root));
        }
        Self::from_entries(entries)
    }

    pub fn write(&self, roots_path: &Path, labels_path: &Path) -> io::Result<()> {
        let mut roots = io::BufWriter::new(fs::File::create(roots_path)?);
        let mut labels = io::BufWriter::new(fs::File::create(labels_path)?);
        writeln!(roots, "leaf_id,root_label")?;
        writeln!(labels, "leaf_id,leaf_label")?;
        for (id, &(leaf, root)) in &self.ids {
            writeln!(roots, "{id},{}", self.root_labels[root])?;
            writeln!(labels, "{id},{}", self.leaf_labels[leaf])?;
        }
        roots.flush()?;
        labels.flush()
    }

    /// `(leaf index, root index)` of a category id.
    pub fn lookup(&self, category_id: &str) -> Option<(usize, usize)> {
        self.ids.get(category_id).copied()
    }

    pub fn root_labels(&self) -> &[String] {
        &self.root_labels
    }

    pub fn leaf_labels(&self) -> &[String] {
        &self.leaf_labels
    }

    pub fn root_of_leaf(&self, leaf: usize) -> usize {
        self.leaf_root[leaf]
    }

    pub fn category_ids(&self) -> impl Iterator<Item = (&str, usize, usize)> {
        self.ids.iter().map(|(id, &(l, r))| (id.as_str(), l, r))
    }

    /// True for the 9-root / 65-leaf layout the canonical feature space uses.
    pub fn is_canonical(&self) -> bool {
        self.root_labels.len() == CANONICAL_ROOT_COUNT
            && self.leaf_labels.len() == CANONICAL_LEAF_COUNT
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, HierarchyError> {
    let text = fs::read_to_string(path).map_err(|source| HierarchyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("leaf_id")) {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| HierarchyError::BadLine {
                path: path.display().to_string(),
                line: i + 1,
            })?;
        let (id, value) = (id.trim(), value.trim());
        if id.is_empty() || value.is_empty() {
            return Err(HierarchyError::BadLine {
                path: path.display().to_string(),
                line: i + 1,
            });
        }
        out.push((id.to_string(), value.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CategoryHierarchy {
        CategoryHierarchy::from_entries([
            ("c3", "Sushi", "Food"),
            ("c1", "Bar", "Food"),
            ("c2", "Airport", "Travel & Transport"),
            ("c4", "Bar", "Food"),
        ])
        .unwrap()
    }

    #[test]
    fn indices_follow_label_order() {
        let h = small();
        assert_eq!(h.root_labels(), ["Food", "Travel & Transport"]);
        assert_eq!(h.leaf_labels(), ["Airport", "Bar", "Sushi"]);
        assert_eq!(h.lookup("c3"), Some((2, 0)));
        assert_eq!(h.lookup("c4"), h.lookup("c1"));
        assert_eq!(h.root_of_leaf(0), 1);
        assert_eq!(h.lookup("nope"), None);
        assert!(!h.is_canonical());
    }

    #[test]
    fn leaf_under_two_roots_rejected() {
        let err = CategoryHierarchy::from_entries([("a", "Bar", "Food"), ("b", "Bar", "Event")]);
        assert!(matches!(err, Err(HierarchyError::LeafUnderTwoRoots(_))));
        let err = CategoryHierarchy::from_entries([("a", "Bar", "Food"), ("a", "Bar", "Event")]);
        assert!(matches!(err, Err(HierarchyError::ConflictingRoot(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (r, l) = (dir.path().join("roots.csv"), dir.path().join("labels.csv"));
        let h = small();
        h.write(&r, &l).unwrap();
        assert_eq!(CategoryHierarchy::load(&r, &l).unwrap(), h);
    }

    #[test]
    fn missing_label_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (r, l) = (dir.path().join("roots.csv"), dir.path().join("labels.csv"));
        fs::write(&r, "leaf_id,root_label\nx,Food\ny,Event\n").unwrap();
        fs::write(&l, "x,Bar\n").unwrap();
        assert!(matches!(
            CategoryHierarchy::load(&r, &l),
            Err(HierarchyError::MissingLabel(id)) if id == "y"
        ));
    }
}
