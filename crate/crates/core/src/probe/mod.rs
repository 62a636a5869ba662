//! Classifier heads trained on frozen embeddings.
//!
//! Heads store their parameters as `f32` and evaluate in `f64`. Every head
//! is split into a *penultimate* map (identity for the linear head, the two
//! hidden ReLU layers for the MLP) followed by a final affine layer; the
//! activation-shaping scorers hook in between the two.

mod io;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{DatasetSplit, EmbeddingMatrix};

pub use io::{load_head, save_head, HeadMeta};
pub use train::{
    train_linear_probe, train_linear_probe_logged, train_mlp_probe, train_mlp_probe_logged,
    Architecture,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub standardize_features: bool,
    /// Hidden width of the MLP head; ignored by the linear probe.
    pub hidden_width: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
            standardize_features: false,
            hidden_width: 512,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs ≥ 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if self.hidden_width < 1 {
            return Err(Error::Config("hidden_width ≥ 1".into()));
        }
        Ok(())
    }
}

/// Affine map `x ↦ W·x + b` with `W` stored row-major as `out × inp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inp: usize,
    out: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Dense {
    pub fn new(out: usize, inp: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if out == 0 || inp == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        if weight.len() != out * inp || bias.len() != out {
            return Err(Error::Shape(format!(
                "layer {out}x{inp}: got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(Error::Shape("layer parameters must be finite".into()));
        }
        Ok(Self {
            inp,
            out,
            weight,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inp
    }

    pub fn outputs(&self) -> usize {
        self.out
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn weight_row(&self, o: usize) -> &[f32] {
        &self.weight[o * self.inp..(o + 1) * self.inp]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inp);
        (0..self.out)
            .map(|o| {
                let mut acc = self.bias[o] as f64;
                for (w, v) in self.weight_row(o).iter().zip(x) {
                    acc += *w as f64 * v;
                }
                acc
            })
            .collect()
    }

    /// Copy with the weights outside `keep` (same layout as `W`) set to zero.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let weight = self
            .weight
            .iter()
            .zip(keep)
            .map(|(w, k)| if *k { *w } else { 0.0 })
            .collect();
        Self {
            weight,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub layer: Dense,
}

impl LinearHead {
    pub fn new(n_classes: usize, d: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        Ok(Self {
            layer: Dense::new(n_classes, d, weight, bias)?,
        })
    }
}

/// Three affine layers `d → h → h → C` with ReLU between them.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub layers: [Dense; 3],
}

impl MlpHead {
    pub fn new(layers: [Dense; 3]) -> Result<Self> {
        if layers[0].out != layers[1].inp || layers[1].out != layers[2].inp {
            return Err(Error::Shape("MLP layer dimensions do not chain".into()));
        }
        Ok(Self { layers })
    }

    pub fn hidden_width(&self) -> usize {
        self.layers[0].out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeHead {
    Linear(LinearHead),
    Mlp(MlpHead),
}

impl From<LinearHead> for ProbeHead {
    fn from(h: LinearHead) -> Self {
        ProbeHead::Linear(h)
    }
}

impl From<MlpHead> for ProbeHead {
    fn from(h: MlpHead) -> Self {
        ProbeHead::Mlp(h)
    }
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = x.max(0.0);
    }
    v
}

impl ProbeHead {
    pub fn kind(&self) -> &'static str {
        match self {
            ProbeHead::Linear(_) => "linear",
            ProbeHead::Mlp(_) => "mlp",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProbeHead::Linear(h) => h.layer.inp,
            ProbeHead::Mlp(h) => h.layers[0].inp,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.last_layer().out
    }

    /// The affine layer producing logits.
    pub fn last_layer(&self) -> &Dense {
        match self {
            ProbeHead::Linear(h) => &h.layer,
            ProbeHead::Mlp(h) => &h.layers[2],
        }
    }

    /// Input to the last layer: `z` itself for a linear head, the second hidden
    /// activation for an MLP.
    pub fn penultimate(&self, z: &[f32]) -> Vec<f64> {
        let x: Vec<f64> = z.iter().map(|v| *v as f64).collect();
        match self {
            ProbeHead::Linear(_) => x,
            ProbeHead::Mlp(h) => relu(h.layers[1].apply(&relu(h.layers[0].apply(&x)))),
        }
    }

    pub fn logits(&self, z: &[f32]) -> Vec<f64> {
        self.last_layer().apply(&self.penultimate(z))
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }
}

/// Dense `n × C` logit matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub n_rows: usize,
    pub n_classes: usize,
    pub data: Vec<f64>,
}

impl Logits {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_classes)
    }
}

pub fn predict_logits(head: &ProbeHead, m: &EmbeddingMatrix) -> Result<Logits> {
    use rayon::prelude::*;
    head.check_dim(m.n_cols())?;
    let rows: Vec<Vec<f64>> = (0..m.n_rows())
        .into_par_iter()
        .map(|i| head.logits(m.row(i)))
        .collect();
    Ok(Logits {
        n_rows: m.n_rows(),
        n_classes: head.n_classes(),
        data: rows.concat(),
    })
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(head: &ProbeHead, split: &DatasetSplit) -> Result<f64> {
    let labels = split.labels()?;
    let logits = predict_logits(head, &split.matrix)?;
    let correct = logits
        .rows()
        .enumerate()
        .filter(|(i, row)| argmax(row) == labels.get(*i))
        .count();
    Ok(correct as f64 / split.len() as f64)
}
