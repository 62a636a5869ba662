//! Exact k-th nearest neighbour distance on the unit sphere.

use crate::error::{Error, Result};
use crate::store::EmbeddingMatrix;

/// Row scaled to unit L2 norm in `f64`; an all-zero row stays zero.
pub fn l2_normalize(row: &[f32]) -> Vec<f64> {
    let norm = row
        .iter()
        .map(|v| (*v as f64) * (*v as f64))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return vec![0.0; row.len()];
    }
    row.iter().map(|v| *v as f64 / norm).collect()
}

/// Squared Euclidean distance, accumulated left to right.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnState {
    d: usize,
    k: usize,
    reference: Vec<f64>,
}

impl KnnState {
    /// Normalize every training row. `k` is clamped to `[1, n_rows]`.
    pub fn fit(train: &EmbeddingMatrix, k: usize) -> Self {
        let n = train.n_rows();
        let clamped = k.clamp(1, n);
        if clamped != k {
            log::warn!("knn: k={k} clamped to {clamped} (N_train = {n})");
        }
        let reference = train.rows().flat_map(l2_normalize).collect();
        Self {
            d: train.n_cols(),
            k: clamped,
            reference,
        }
    }

    /// Rebuild from an already normalized reference matrix.
    pub fn from_normalized(d: usize, k: usize, reference: Vec<f64>) -> Result<Self> {
        if d == 0 || reference.is_empty() || !reference.len().is_multiple_of(d) {
            return Err(Error::Shape(
                "knn reference must be a non-empty n×d matrix".into(),
            ));
        }
        let n = reference.len() / d;
        if k < 1 || k > n {
            return Err(Error::Config(format!("k={k} outside [1, {n}]")));
        }
        Ok(Self { d, k, reference })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_reference(&self) -> usize {
        self.reference.len() / self.d
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// `−‖ẑ − ẑ_(k)‖₂` where `ẑ_(k)` is the k-th closest reference row;
    /// equal distances are ordered by reference index.
    pub fn score_row(&self, z: &[f32]) -> f64 {
        let q = l2_normalize(z);
        let mut dists: Vec<(f64, usize)> = self
            .reference
            .chunks_exact(self.d)
            .enumerate()
            .map(|(i, r)| (squared_distance(&q, r), i))
            .collect();
        let (_, kth, _) = dists
            .select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        -kth.0.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[[f32; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn reference_rows_are_unit_norm() {
        let st = KnnState::fit(&matrix(&[[3.0, 4.0], [0.0, -2.0]]), 1);
        for r in st.reference().chunks(2) {
            assert!((r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_extremes() {
        let st = KnnState::fit(&matrix(&[[3.0, 4.0], [1.0, 0.0]]), 1);
        assert_eq!(st.score_row(&[6.0, 8.0]), 0.0);
        let far = KnnState::fit(&matrix(&[[3.0, 4.0]]), 1);
        assert!((far.score_row(&[-3.0, -4.0]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_is_clamped() {
        let st = KnnState::fit(&matrix(&[[1.0, 0.0], [0.0, 1.0]]), 50);
        assert_eq!(st.k(), 2);
        let st = KnnState::fit(&matrix(&[[1.0, 0.0]]), 0);
        assert_eq!(st.k(), 1);
    }

    #[test]
    fn picks_kth_not_nearest() {
        let st = KnnState::fit(&matrix(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]), 2);
        // from (1,0): distances 0, √2, 2
        assert!((st.score_row(&[1.0, 0.0]) + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_row_normalizes_to_zero() {
        assert_eq!(l2_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
