//! Mini-batch SGD with momentum on mean softmax cross-entropy.
//!
//! Parameters live in one flat `f64` vector while training. Layout per
//! affine layer is `W` (row-major, `out × inp`) followed by `b`; layers are
//! concatenated input-first.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dense, LinearHead, MlpHead, ProbeConfig};
use crate::error::{Error, Result};
use crate::store::{DatasetSplit, EmbeddingMatrix, LabelVector, Role};

/// Rows per gradient partial; partials are summed in index order so the
/// result does not depend on the number of worker threads.
const GRAD_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Linear { d: usize, c: usize },
    Mlp { d: usize, h: usize, c: usize },
}

/// (out, inp) of each affine layer.
fn layer_shapes(arch: Architecture) -> Vec<(usize, usize)> {
    match arch {
        Architecture::Linear { d, c } => vec![(c, d)],
        Architecture::Mlp { d, h, c } => vec![(h, d), (h, h), (c, h)],
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let inp = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bo)| {
            let row = &w[o * inp..(o + 1) * inp];
            row.iter().zip(x).fold(*bo, |acc, (wi, xi)| acc + wi * xi)
        })
        .collect()
}

impl Architecture {
    pub fn n_params(&self) -> usize {
        layer_shapes(*self).iter().map(|(o, i)| o * i + o).sum()
    }

    pub fn dim(&self) -> usize {
        match *self {
            Architecture::Linear { d, .. } | Architecture::Mlp { d, .. } => d,
        }
    }

    pub fn n_classes(&self) -> usize {
        match *self {
            Architecture::Linear { c, .. } | Architecture::Mlp { c, .. } => c,
        }
    }

    /// Kaiming-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.n_params());
        for (out, inp) in layer_shapes(*self) {
            let bound = (6.0 / inp as f64).sqrt();
            params.extend((0..out * inp).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, out));
        }
        params
    }

    fn split<'a>(&self, params: &'a [f64]) -> Vec<(&'a [f64], &'a [f64])> {
        let mut rest = params;
        layer_shapes(*self)
            .into_iter()
            .map(|(o, i)| {
                let (w, r) = rest.split_at(o * i);
                let (b, r) = r.split_at(o);
                rest = r;
                (w, b)
            })
            .collect()
    }

    /// Cross-entropy of one row; accumulates its gradient into `grad`.
    fn row_loss_grad(&self, params: &[f64], x: &[f64], y: usize, grad: &mut [f64]) -> f64 {
        let layers = self.split(params);
        match *self {
            Architecture::Linear { d, c } => {
                let (w, b) = layers[0];
                let logits = affine(w, b, x);
                let lse = log_sum_exp(&logits);
                let (gw, gb) = grad.split_at_mut(c * d);
                for k in 0..c {
                    let g = (logits[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
                    gb[k] += g;
                    for (gi, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gi += g * xi;
                    }
                }
                lse - logits[y]
            }
            Architecture::Mlp { d, h, c } => {
                let (w0, b0) = layers[0];
                let (w1, b1) = layers[1];
                let (w2, b2) = layers[2];
                let a0 = affine(w0, b0, x);
                let h0: Vec<f64> = a0.iter().map(|v| v.max(0.0)).collect();
                let a1 = affine(w1, b1, &h0);
                let h1: Vec<f64> = a1.iter().map(|v| v.max(0.0)).collect();
                let logits = affine(w2, b2, &h1);
                let lse = log_sum_exp(&logits);

                let (g0w, rest) = grad.split_at_mut(h * d);
                let (g0b, rest) = rest.split_at_mut(h);
                let (g1w, rest) = rest.split_at_mut(h * h);
                let (g1b, rest) = rest.split_at_mut(h);
                let (g2w, g2b) = rest.split_at_mut(c * h);

                let mut d_h1 = vec![0.0; h];
                for k in 0..c {
                    let g = (logits[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
                    g2b[k] += g;
                    let row = &w2[k * h..(k + 1) * h];
                    for j in 0..h {
                        g2w[k * h + j] += g * h1[j];
                        d_h1[j] += g * row[j];
                    }
                }
                let mut d_h0 = vec![0.0; h];
                for j in 0..h {
                    if a1[j] <= 0.0 {
                        continue;
                    }
                    let g = d_h1[j];
                    g1b[j] += g;
                    let row = &w1[j * h..(j + 1) * h];
                    for i in 0..h {
                        g1w[j * h + i] += g * h0[i];
                        d_h0[i] += g * row[i];
                    }
                }
                for i in 0..h {
                    if a0[i] <= 0.0 {
                        continue;
                    }
                    let g = d_h0[i];
                    g0b[i] += g;
                    for (gw, xv) in g0w[i * d..(i + 1) * d].iter_mut().zip(x) {
                        *gw += g * xv;
                    }
                }
                lse - logits[y]
            }
        }
    }

    fn batch_loss_grad(
        &self,
        params: &[f64],
        features: &[f64],
        labels: &[usize],
        rows: &[usize],
    ) -> (f64, Vec<f64>) {
        let d = self.dim();
        let partials: Vec<(f64, Vec<f64>)> = rows
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; params.len()];
                let mut loss = 0.0;
                for &r in chunk {
                    loss += self.row_loss_grad(
                        params,
                        &features[r * d..(r + 1) * d],
                        labels[r],
                        &mut grad,
                    );
                }
                (loss, grad)
            })
            .collect();
        let scale = 1.0 / rows.len() as f64;
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    /// Mean cross-entropy over `rows` and its gradient w.r.t. the flat parameters.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &EmbeddingMatrix,
        y: &LabelVector,
        rows: &[usize],
    ) -> (f64, Vec<f64>) {
        assert_eq!(params.len(), self.n_params());
        assert_eq!(x.n_cols(), self.dim());
        let features: Vec<f64> = x.as_slice().iter().map(|v| *v as f64).collect();
        let labels: Vec<usize> = (0..y.len()).map(|i| y.get(i)).collect();
        self.batch_loss_grad(params, &features, &labels, rows)
    }

    pub fn loss(
        &self,
        params: &[f64],
        x: &EmbeddingMatrix,
        y: &LabelVector,
        rows: &[usize],
    ) -> f64 {
        self.loss_and_grad(params, x, y, rows).0
    }

    fn to_layers(self, params: &[f64]) -> Result<Vec<Dense>> {
        layer_shapes(self)
            .into_iter()
            .zip(self.split(params))
            .map(|((o, i), (w, b))| {
                Dense::new(
                    o,
                    i,
                    w.iter().map(|v| *v as f32).collect(),
                    b.iter().map(|v| *v as f32).collect(),
                )
            })
            .collect()
    }

    pub fn linear_head(&self, params: &[f64]) -> Result<LinearHead> {
        let mut layers = self.to_layers(params)?;
        match self {
            Architecture::Linear { .. } => Ok(LinearHead {
                layer: layers.remove(0),
            }),
            Architecture::Mlp { .. } => Err(Error::Config("not a linear architecture".into())),
        }
    }

    pub fn mlp_head(&self, params: &[f64]) -> Result<MlpHead> {
        match self {
            Architecture::Mlp { .. } => {
                let layers = self.to_layers(params)?;
                let arr: [Dense; 3] = layers.try_into().expect("three layers");
                MlpHead::new(arr)
            }
            Architecture::Linear { .. } => Err(Error::Config("not an MLP architecture".into())),
        }
    }
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &EmbeddingMatrix) -> Self {
        let (n, d) = (x.n_rows() as f64, x.n_cols());
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += *v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (*v as f64 - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Rewrite the first layer so it consumes raw features.
    fn fold(&self, arch: Architecture, params: &mut [f64]) {
        let (out, inp) = layer_shapes(arch)[0];
        let (w, rest) = params.split_at_mut(out * inp);
        let b = &mut rest[..out];
        for o in 0..out {
            let row = &mut w[o * inp..(o + 1) * inp];
            for ((w, s), m) in row.iter_mut().zip(&self.scale).zip(&self.mean) {
                *w /= s;
                b[o] -= *w * m;
            }
        }
    }
}

fn check_train(train: &DatasetSplit, cfg: &ProbeConfig) -> Result<()> {
    cfg.validate()?;
    if train.role != Role::IdTrain {
        return Err(Error::Config(format!(
            "probe must be trained on an id_train split, got {}",
            train.role
        )));
    }
    let labels = train.labels()?;
    let present = labels.counts().iter().filter(|c| **c > 0).count();
    if present < 2 {
        return Err(Error::Degenerate(
            "training data contains a single class".into(),
        ));
    }
    if train.len() < labels.n_classes() {
        return Err(Error::Degenerate(format!(
            "{} rows for {} classes",
            train.len(),
            labels.n_classes()
        )));
    }
    Ok(())
}

/// Train `arch` on `train`; returns flat parameters (acting on raw features)
/// and the mean training loss of every epoch.
fn fit(
    arch: Architecture,
    train: &DatasetSplit,
    cfg: &ProbeConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_train(train, cfg)?;
    let labels = train.labels()?;
    let label_idx: Vec<usize> = (0..labels.len()).map(|i| labels.get(i)).collect();
    let (n, d) = (train.len(), train.dim());

    let standardizer = cfg
        .standardize_features
        .then(|| Standardizer::fit(&train.matrix));
    let features: Vec<f64> = match &standardizer {
        None => train.matrix.as_slice().iter().map(|v| *v as f64).collect(),
        Some(s) => train
            .matrix
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| (*v as f64 - s.mean[i % d]) / s.scale[i % d])
            .collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = arch.init(&mut rng);
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * steps_per_epoch) as f64;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, rows) in order.chunks(cfg.batch_size).enumerate() {
            let step = (epoch * steps_per_epoch + batch) as f64;
            let lr =
                0.5 * cfg.learning_rate * (1.0 + (std::f64::consts::PI * step / total_steps).cos());
            let (loss, mut grad) = arch.batch_loss_grad(&params, &features, &label_idx, rows);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    batch: batch + 1,
                });
            }
            if cfg.weight_decay > 0.0 {
                for (g, p) in grad.iter_mut().zip(&params) {
                    *g += cfg.weight_decay * p;
                }
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= lr * *v;
            }
            loss_sum += loss * rows.len() as f64;
        }
        epoch_loss.push(loss_sum / n as f64);
    }

    if let Some(s) = standardizer {
        s.fold(arch, &mut params);
    }
    // parameters are stored as f32
    if params
        .iter()
        .any(|p| p.is_nan() || p.abs() > f32::MAX as f64)
    {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            batch: steps_per_epoch,
        });
    }
    Ok((params, epoch_loss))
}

pub fn train_linear_probe_logged(
    train: &DatasetSplit,
    cfg: &ProbeConfig,
) -> Result<(LinearHead, Vec<f64>)> {
    let c = train.labels()?.n_classes();
    let arch = Architecture::Linear { d: train.dim(), c };
    let (params, log) = fit(arch, train, cfg)?;
    Ok((arch.linear_head(&params)?, log))
}

/// Fit a linear head `W·z + b` on the frozen training embeddings.
pub fn train_linear_probe(train: &DatasetSplit, cfg: &ProbeConfig) -> Result<LinearHead> {
    train_linear_probe_logged(train, cfg).map(|(h, _)| h)
}

pub fn train_mlp_probe_logged(
    train: &DatasetSplit,
    cfg: &ProbeConfig,
) -> Result<(MlpHead, Vec<f64>)> {
    let c = train.labels()?.n_classes();
    let arch = Architecture::Mlp {
        d: train.dim(),
        h: cfg.hidden_width,
        c,
    };
    let (params, log) = fit(arch, train, cfg)?;
    Ok((arch.mlp_head(&params)?, log))
}

pub fn train_mlp_probe(train: &DatasetSplit, cfg: &ProbeConfig) -> Result<MlpHead> {
    train_mlp_probe_logged(train, cfg).map(|(h, _)| h)
}
