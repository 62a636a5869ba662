//! Embedding matrices, label vectors and dataset manifests on disk.

pub mod manifest;
pub mod npy;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{load_split, validate_manifest, Issue, Manifest, SplitSpec};

/// Row-major `n_rows × n_cols` matrix of finite 32-bit floats, one embedding per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f32>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Shape(format!(
                "matrix must be non-empty, got {n_rows}x{n_cols}"
            )));
        }
        if data.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "{n_rows}x{n_cols} matrix needs {} values, got {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        check_finite(&data, n_cols)?;
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Build from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
        }
    }
}

fn check_finite(data: &[f32], n_cols: usize) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            row: i / n_cols,
            col: i % n_cols,
        }),
        None => Ok(()),
    }
}

/// Integer class labels in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    values: Vec<i64>,
    n_classes: usize,
}

impl LabelVector {
    pub fn new(values: Vec<i64>, n_classes: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("label vector"));
        }
        for (index, &value) in values.iter().enumerate() {
            if value < 0 || value as u64 >= n_classes as u64 {
                return Err(Error::LabelOutOfRange {
                    index,
                    value,
                    n_classes,
                });
            }
        }
        Ok(Self { values, n_classes })
    }

    /// Infer `n_classes` as one past the largest label.
    pub fn from_values(values: Vec<i64>) -> Result<Self> {
        let max = values.iter().copied().max().unwrap_or(-1);
        let n_classes = if max < 0 { 1 } else { max as usize + 1 };
        Self::new(values, n_classes)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, i: usize) -> usize {
        self.values[i] as usize
    }

    /// Classes in `[0, n_classes)` with no sample.
    pub fn absent_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_classes];
        for &v in &self.values {
            seen[v as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &v in &self.values {
            counts[v as usize] += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    IdTrain,
    IdTest,
    OodTest,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::IdTrain => "id_train",
            Role::IdTest => "id_test",
            Role::OodTest => "ood_test",
        })
    }
}

/// Embeddings plus optional labels, tagged with the split's role.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub role: Role,
    pub matrix: EmbeddingMatrix,
    pub labels: Option<LabelVector>,
}

impl DatasetSplit {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        matrix: EmbeddingMatrix,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        let name = name.into();
        if let Some(l) = &labels {
            if l.len() != matrix.n_rows() {
                return Err(Error::Shape(format!(
                    "split {name}: {} labels for {} rows",
                    l.len(),
                    matrix.n_rows()
                )));
            }
        }
        if role == Role::IdTrain && labels.is_none() {
            return Err(Error::MissingLabels(name));
        }
        Ok(Self {
            name,
            role,
            matrix,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn labels(&self) -> Result<&LabelVector> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::MissingLabels(self.name.clone()))
    }
}

/// Write a matrix as a `<f4` NPY file. Non-finite input is rejected before anything is written.
pub fn write_matrix(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    check_finite(&m.data, m.n_cols)?;
    npy::write(path, &[m.n_rows, m.n_cols], &m.data)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let (shape, data) = npy::read::<f32>(path)?;
    if shape.len() != 2 {
        return Err(Error::Rank { expected: 2, shape });
    }
    EmbeddingMatrix::new(shape[0], shape[1], data)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    npy::write(path, &[labels.len()], &labels.values)
}

/// Read a `<i8` label file; `n_classes` is inferred from the largest label.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let (shape, values) = npy::read::<i64>(path)?;
    if shape.len() != 1 {
        return Err(Error::Rank { expected: 1, shape });
    }
    LabelVector::from_values(values)
}
