//! Principal subspace of offset features for the residual and virtual-logit scores.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::probe::Dense;
use crate::store::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    d: usize,
    rank: usize,
    offset: Vec<f64>,
    /// `d × rank`, row-major, orthonormal columns.
    basis: Vec<f64>,
    alpha: Option<f64>,
}

/// `u = −W⁺·b`: the point the linear layer maps to zero logits (least-norm).
pub fn logit_origin(layer: &Dense) -> Result<Vec<f64>> {
    let w = DMatrix::from_row_slice(
        layer.outputs(),
        layer.inputs(),
        &layer.weight().iter().map(|v| *v as f64).collect::<Vec<_>>(),
    );
    let b = DMatrix::from_iterator(layer.outputs(), 1, layer.bias().iter().map(|v| *v as f64));
    let pinv = w
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Singular(format!("pseudo-inverse failed: {e}")))?;
    Ok((-(pinv * b)).as_slice().to_vec())
}

pub fn feature_mean(x: &EmbeddingMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.n_cols()];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v as f64;
        }
    }
    let n = x.n_rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Eigenvectors of a symmetric matrix, ordered by descending eigenvalue, each
/// signed so that its largest-magnitude entry (first on ties) is positive.
pub fn sorted_eigenvectors(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = sym.clone().symmetric_eigen();
    let n = sym.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
        values.push(eig.eigenvalues[src]);
    }
    (values, vectors)
}

impl SubspaceState {
    /// Principal basis of the second-moment matrix of `z − offset`.
    pub fn fit(x: &EmbeddingMatrix, offset: Vec<f64>, rank: usize) -> Result<Self> {
        let d = x.n_cols();
        if rank < 1 || rank > d {
            return Err(Error::Config(format!(
                "principal dimension {rank} outside [1, {d}]"
            )));
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut diff = vec![0.0; d];
        for row in x.rows() {
            for ((df, v), u) in diff.iter_mut().zip(row).zip(&offset) {
                *df = *v as f64 - u;
            }
            for a in 0..d {
                for b in a..d {
                    cov[(a, b)] += diff[a] * diff[b];
                }
            }
        }
        let n = x.n_rows() as f64;
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / n;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let (_, vectors) = sorted_eigenvectors(&cov);
        let mut basis = Vec::with_capacity(d * rank);
        for i in 0..d {
            for j in 0..rank {
                basis.push(vectors[(i, j)]);
            }
        }
        Self::new(d, offset, rank, basis, None)
    }

    pub fn new(
        d: usize,
        offset: Vec<f64>,
        rank: usize,
        basis: Vec<f64>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        if offset.len() != d || basis.len() != d * rank {
            return Err(Error::Shape("subspace: inconsistent state shapes".into()));
        }
        if offset.iter().chain(&basis).any(|v| !v.is_finite()) {
            return Err(Error::Singular("subspace state is not finite".into()));
        }
        Ok(Self {
            d,
            rank,
            offset,
            basis,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = Some(alpha);
    }

    /// `‖(I − BBᵀ)(z − u)‖₂`.
    pub fn residual_norm(&self, z: &[f32]) -> f64 {
        let x: Vec<f64> = z
            .iter()
            .zip(&self.offset)
            .map(|(v, u)| *v as f64 - u)
            .collect();
        let mut coef = vec![0.0; self.rank];
        for (i, xi) in x.iter().enumerate() {
            let row = &self.basis[i * self.rank..(i + 1) * self.rank];
            for (c, b) in coef.iter_mut().zip(row) {
                *c += b * xi;
            }
        }
        let mut total = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let row = &self.basis[i * self.rank..(i + 1) * self.rank];
            let proj: f64 = row.iter().zip(&coef).map(|(b, c)| b * c).sum();
            let r = xi - proj;
            total += r * r;
        }
        total.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvectors_sorted_and_sign_fixed() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sorted_eigenvectors(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal_and_full_rank_residual_vanishes() {
        let x = EmbeddingMatrix::from_rows(&[
            [1.0f32, 2.0, 0.5],
            [-1.0, 0.3, 2.0],
            [0.2, -1.5, 1.0],
            [3.0, 0.1, -0.7],
        ])
        .unwrap();
        let mean = feature_mean(&x);
        let st = SubspaceState::fit(&x, mean.clone(), 3).unwrap();
        let b = DMatrix::from_row_slice(3, 3, st.basis());
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-5);
        assert!(st.residual_norm(&[10.0, -4.0, 2.0]) < 1e-5 * 11.0);
        let partial = SubspaceState::fit(&x, mean, 1).unwrap();
        assert!(partial.residual_norm(&[10.0, -4.0, 2.0]) > 0.0);
    }

    #[test]
    fn logit_origin_maps_to_zero_logits() {
        let layer = Dense::new(2, 3, vec![1.0, 0.0, 1.0, 0.0, 2.0, 0.0], vec![1.0, -4.0]).unwrap();
        let u = logit_origin(&layer).unwrap();
        let logits = layer.apply(&u);
        assert!(logits.iter().all(|v| v.abs() < 1e-9), "{logits:?}");
    }

    #[test]
    fn rank_bounds() {
        let x = EmbeddingMatrix::from_rows(&[[1.0f32, 2.0]]).unwrap();
        assert!(SubspaceState::fit(&x, vec![0.0; 2], 0).is_err());
        assert!(SubspaceState::fit(&x, vec![0.0; 2], 3).is_err());
    }
}
