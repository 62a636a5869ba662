use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{npy, read_labels, read_matrix, DatasetSplit, LabelVector, Role};
use crate::error::{Error, Result};

/// One entry of `manifest.json`. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub matrix: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    pub splits: BTreeMap<String, SplitSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            n_classes: None,
            splits: BTreeMap::new(),
            metadata: BTreeMap::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.base_dir.join(rel)
        }
    }

    pub fn names_with_role(&self, role: Role) -> Vec<&str> {
        self.splits
            .iter()
            .filter(|(_, s)| s.role == role)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// The unique `id_train` split name.
    pub fn id_train_name(&self) -> Result<&str> {
        match self.names_with_role(Role::IdTrain).as_slice() {
            [one] => Ok(one),
            [] => Err(Error::Manifest("no id_train split".into())),
            _ => Err(Error::Manifest("duplicate id_train role".into())),
        }
    }
}

/// A violated manifest rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    MissingIdTrain,
    DuplicateIdTrain(Vec<String>),
    MissingIdTest,
    MissingLabels(String),
    Unreadable {
        split: String,
        reason: String,
    },
    DimensionMismatch(String),
    DeclaredShape {
        split: String,
        declared: (Option<usize>, Option<usize>),
        actual: (usize, usize),
    },
    LabelCount {
        split: String,
        labels: usize,
        rows: usize,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::MissingIdTrain => write!(f, "missing id_train role"),
            Issue::DuplicateIdTrain(_) => write!(f, "duplicate id_train role"),
            Issue::MissingIdTest => write!(f, "missing id_test role"),
            Issue::MissingLabels(s) => write!(f, "id_train requires labels: {s}"),
            Issue::Unreadable { split, reason } => write!(f, "unreadable file: {split}: {reason}"),
            Issue::DimensionMismatch(s) => write!(f, "dimension mismatch: {s}"),
            Issue::DeclaredShape {
                split,
                declared,
                actual,
            } => write!(
                f,
                "declared shape mismatch: {split}: declared n={:?} d={:?}, file has {}x{}",
                declared.0, declared.1, actual.0, actual.1
            ),
            Issue::LabelCount {
                split,
                labels,
                rows,
            } => write!(
                f,
                "label count mismatch: {split}: {labels} labels for {rows} rows"
            ),
        }
    }
}

fn matrix_shape(path: &Path) -> Result<(usize, usize)> {
    let h = npy::read_header(path)?;
    if h.descr != "<f4" {
        return Err(Error::Format(format!(
            "matrix dtype {} (expected <f4)",
            h.descr
        )));
    }
    match h.shape.as_slice() {
        [n, d] => Ok((*n, *d)),
        _ => Err(Error::Rank {
            expected: 2,
            shape: h.shape,
        }),
    }
}

fn labels_len(path: &Path) -> Result<usize> {
    let h = npy::read_header(path)?;
    if h.descr != "<i8" {
        return Err(Error::Format(format!(
            "label dtype {} (expected <i8)",
            h.descr
        )));
    }
    match h.shape.as_slice() {
        [n] => Ok(*n),
        _ => Err(Error::Rank {
            expected: 1,
            shape: h.shape,
        }),
    }
}

/// Check every manifest rule against the manifest and the file headers it points at.
/// An empty list means the manifest is usable.
pub fn validate_manifest(manifest: &Manifest) -> Vec<Issue> {
    let mut issues = Vec::new();
    let train = manifest.names_with_role(Role::IdTrain);
    match train.len() {
        0 => issues.push(Issue::MissingIdTrain),
        1 => {}
        _ => issues.push(Issue::DuplicateIdTrain(
            train.iter().map(|s| s.to_string()).collect(),
        )),
    }
    if manifest.names_with_role(Role::IdTest).is_empty() {
        issues.push(Issue::MissingIdTest);
    }

    let mut dims: Vec<(&str, usize)> = Vec::new();
    for (name, spec) in &manifest.splits {
        if spec.role == Role::IdTrain && spec.labels.is_none() {
            issues.push(Issue::MissingLabels(name.clone()));
        }
        let shape = match matrix_shape(&manifest.resolve(&spec.matrix)) {
            Ok(s) => s,
            Err(e) => {
                issues.push(Issue::Unreadable {
                    split: name.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if spec.n.is_some_and(|n| n != shape.0) || spec.d.is_some_and(|d| d != shape.1) {
            issues.push(Issue::DeclaredShape {
                split: name.clone(),
                declared: (spec.n, spec.d),
                actual: shape,
            });
        }
        if let Some(lp) = &spec.labels {
            match labels_len(&manifest.resolve(lp)) {
                Ok(len) if len != shape.0 => issues.push(Issue::LabelCount {
                    split: name.clone(),
                    labels: len,
                    rows: shape.0,
                }),
                Ok(_) => {}
                Err(e) => issues.push(Issue::Unreadable {
                    split: name.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        dims.push((name, shape.1));
    }

    if let Some(reference) = reference_dim(&dims, manifest) {
        for (name, d) in dims {
            if d != reference {
                issues.push(Issue::DimensionMismatch(name.to_string()));
            }
        }
    }
    issues
}

/// Majority dimension; ties go to the id_train split's dimension, then the smallest.
fn reference_dim(dims: &[(&str, usize)], manifest: &Manifest) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, d) in dims {
        *counts.entry(*d).or_default() += 1;
    }
    let best = *counts.values().max()?;
    let train_d = dims
        .iter()
        .find(|(n, _)| manifest.splits[*n].role == Role::IdTrain)
        .map(|(_, d)| *d);
    match train_d {
        Some(d) if counts[&d] == best => Some(d),
        _ => counts.iter().find(|(_, c)| **c == best).map(|(d, _)| *d),
    }
}

/// Load one split, cross-checking its shape against the manifest and sibling splits.
pub fn load_split(manifest: &Manifest, name: &str) -> Result<DatasetSplit> {
    let spec = manifest
        .splits
        .get(name)
        .ok_or_else(|| Error::MissingSplit(name.to_string()))?;
    if spec.role == Role::IdTrain && spec.labels.is_none() {
        return Err(Error::MissingLabels(name.to_string()));
    }
    let matrix = read_matrix(manifest.resolve(&spec.matrix))?;
    if let Some(n) = spec.n {
        if n != matrix.n_rows() {
            return Err(Error::Manifest(format!(
                "split {name}: declared n={n}, file has {} rows",
                matrix.n_rows()
            )));
        }
    }
    if let Some(d) = spec.d {
        if d != matrix.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.n_cols(),
            });
        }
    }
    for (other, other_spec) in &manifest.splits {
        if other == name {
            continue;
        }
        let d = match other_spec.d {
            Some(d) => d,
            None => match matrix_shape(&manifest.resolve(&other_spec.matrix)) {
                Ok((_, d)) => d,
                Err(_) => continue,
            },
        };
        if d != matrix.n_cols() {
            return Err(Error::Manifest(format!(
                "dimension mismatch: {name} has d={}, {other} has d={d}",
                matrix.n_cols()
            )));
        }
    }
    let labels = match &spec.labels {
        None => None,
        Some(lp) => {
            let raw = read_labels(manifest.resolve(lp))?;
            let labels = match manifest.n_classes {
                Some(c) => LabelVector::new(raw.values().to_vec(), c)?,
                None => raw,
            };
            if spec.role == Role::IdTrain {
                for c in labels.absent_classes() {
                    log::warn!("split {name}: class {c} absent");
                }
            }
            Some(labels)
        }
    };
    DatasetSplit::new(name, spec.role, matrix, labels)
}
