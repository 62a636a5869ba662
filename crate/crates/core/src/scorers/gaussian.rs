//! Class-conditional Gaussians with a shared covariance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::store::{EmbeddingMatrix, LabelVector};

#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisState {
    d: usize,
    /// `C × d`, row-major.
    means: Vec<f64>,
    /// `d × d`, row-major.
    precision: Vec<f64>,
    /// Upper-triangular `Rᵀ` with `precision = R·Rᵀ`, so that the quadratic
    /// form is `‖Rᵀ(z − μ)‖²`.
    whitener: DMatrix<f64>,
    whitened_means: Vec<DMatrix<f64>>,
}

impl MahalanobisState {
    /// Class means and shared covariance `(1/N)Σ(z−μ_y)(z−μ_y)ᵀ + εI`, where
    /// `ε = eps_scale · trace/d`, falling back to `eps_scale` for a zero trace.
    pub fn fit(x: &EmbeddingMatrix, y: &LabelVector, eps_scale: f64) -> Result<Self> {
        let (n, d, c) = (x.n_rows(), x.n_cols(), y.n_classes());
        let mut means = vec![0.0; c * d];
        let counts = y.counts();
        for (i, row) in x.rows().enumerate() {
            let m = &mut means[y.get(i) * d..(y.get(i) + 1) * d];
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += *v as f64;
            }
        }
        for (cls, count) in counts.iter().enumerate() {
            if *count == 0 {
                return Err(Error::Degenerate(format!(
                    "mahalanobis: class {cls} has no samples"
                )));
            }
            means[cls * d..(cls + 1) * d]
                .iter_mut()
                .for_each(|m| *m /= *count as f64);
        }

        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut diff = vec![0.0; d];
        for (i, row) in x.rows().enumerate() {
            let mu = &means[y.get(i) * d..(y.get(i) + 1) * d];
            for ((df, v), m) in diff.iter_mut().zip(row).zip(mu) {
                *df = *v as f64 - m;
            }
            for a in 0..d {
                for b in a..d {
                    cov[(a, b)] += diff[a] * diff[b];
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / n as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let trace = cov.trace();
        let eps = if trace > 0.0 {
            eps_scale * trace / d as f64
        } else {
            eps_scale
        };
        for a in 0..d {
            cov[(a, a)] += eps;
        }
        let precision = cov
            .cholesky()
            .ok_or_else(|| {
                Error::Singular("regularized covariance is not positive definite".into())
            })?
            .inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        Self::new(d, means, precision.transpose().as_slice().to_vec())
    }

    /// From explicit means (`C × d`) and precision (`d × d`), both row-major.
    pub fn new(d: usize, means: Vec<f64>, precision: Vec<f64>) -> Result<Self> {
        if d == 0 || means.is_empty() || !means.len().is_multiple_of(d) || precision.len() != d * d
        {
            return Err(Error::Shape(
                "mahalanobis: inconsistent state shapes".into(),
            ));
        }
        let p = DMatrix::from_row_slice(d, d, &precision);
        let r = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("precision is not positive definite".into()))?
            .l();
        let whitener = r.transpose();
        let whitened_means = means
            .chunks_exact(d)
            .map(|m| &whitener * DMatrix::from_column_slice(d, 1, m))
            .collect();
        Ok(Self {
            d,
            means,
            precision,
            whitener,
            whitened_means,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    /// `−min_c (z−μ_c)ᵀ·P·(z−μ_c)`.
    pub fn score_row(&self, z: &[f32]) -> f64 {
        let zv = DMatrix::from_iterator(self.d, 1, z.iter().map(|v| *v as f64));
        let wz = &self.whitener * zv;
        let best = self
            .whitened_means
            .iter()
            .map(|m| (&wz - m).norm_squared())
            .fold(f64::INFINITY, f64::min);
        -best
    }
}
