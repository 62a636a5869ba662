//! Post-hoc OOD scores under one fit/score contract.
//!
//! Every score is oriented so that higher means more in-distribution.

pub mod gaussian;
pub mod knn;
pub mod logit;
mod persist;
pub mod subspace;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{predict_logits, Dense, ProbeHead};
use crate::store::{DatasetSplit, EmbeddingMatrix, Role};

pub use gaussian::MahalanobisState;
pub use knn::{l2_normalize, squared_distance, KnnState};
pub use persist::{load_scorer, load_scores, save_scorer, save_scores, ScoreSidecar};
pub use subspace::SubspaceState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Msp,
    MaxLogit,
    Energy,
    GradNorm,
    ReAct,
    Dice,
    KlMatch,
    Mahalanobis,
    Residual,
    Vim,
    Knn,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Msp,
        Method::MaxLogit,
        Method::Energy,
        Method::GradNorm,
        Method::ReAct,
        Method::Dice,
        Method::KlMatch,
        Method::Mahalanobis,
        Method::Residual,
        Method::Vim,
        Method::Knn,
    ];

    /// Identifier used on the command line and in persisted state.
    pub fn key(&self) -> &'static str {
        match self {
            Method::Msp => "msp",
            Method::MaxLogit => "maxlogit",
            Method::Energy => "energy",
            Method::GradNorm => "gradnorm",
            Method::ReAct => "react",
            Method::Dice => "dice",
            Method::KlMatch => "klmatch",
            Method::Mahalanobis => "mahalanobis",
            Method::Residual => "residual",
            Method::Vim => "vim",
            Method::Knn => "knn",
        }
    }

    /// Name used in rendered reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Msp => "MSP",
            Method::MaxLogit => "MaxLogit",
            Method::Energy => "Energy",
            Method::GradNorm => "GradNorm",
            Method::ReAct => "ReAct",
            Method::Dice => "DICE",
            Method::KlMatch => "KLMatch",
            Method::Mahalanobis => "Mahalanobis",
            Method::Residual => "Residual",
            Method::Vim => "ViM",
            Method::Knn => "KNN",
        }
    }

    pub fn needs_head(&self) -> bool {
        !matches!(self, Method::Mahalanobis | Method::Residual | Method::Knn)
    }

    pub fn needs_labels(&self) -> bool {
        matches!(self, Method::Mahalanobis | Method::KlMatch)
    }

    pub fn valid_keys() -> String {
        Method::ALL
            .iter()
            .map(|m| m.key())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let want = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.key() == want)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{s}'; valid methods: {}",
                    Method::valid_keys()
                ))
            })
    }
}

/// Tunables of the fitted methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerParams {
    pub k: usize,
    pub react_percentile: f64,
    pub dice_sparsity: f64,
    /// Principal dimension for Residual/ViM; `None` means `max(1, d/4)`.
    pub vim_dim: Option<usize>,
    pub mahalanobis_eps: f64,
}

impl Default for ScorerParams {
    fn default() -> Self {
        Self {
            k: 50,
            react_percentile: 90.0,
            dice_sparsity: 0.7,
            vim_dim: None,
            mahalanobis_eps: 1e-6,
        }
    }
}

impl ScorerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.react_percentile) {
            return Err(Error::Config(
                "react percentile must lie in [0, 100]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.dice_sparsity) {
            return Err(Error::Config("dice sparsity must lie in [0, 1]".into()));
        }
        if !(self.mahalanobis_eps >= 0.0 && self.mahalanobis_eps.is_finite()) {
            return Err(Error::Config("mahalanobis eps must be non-negative".into()));
        }
        Ok(())
    }

    pub fn principal_dim(&self, d: usize) -> usize {
        self.vim_dim.unwrap_or((d / 4).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerState {
    /// MSP, MaxLogit, Energy and GradNorm only need the head.
    Stateless,
    ReAct {
        threshold: f64,
    },
    Dice {
        mask: Vec<bool>,
        masked: Dense,
    },
    KlMatch {
        templates: Vec<Vec<f64>>,
    },
    Mahalanobis(MahalanobisState),
    Subspace(SubspaceState),
    Knn(KnnState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedScorer {
    pub method: Method,
    pub params: ScorerParams,
    pub state: ScorerState,
    pub head: Option<ProbeHead>,
    pub dim: usize,
}

/// Per-row scores for one split, higher meaning more in-distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub method: Method,
    pub split: String,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Value at percentile `p ∈ [0, 100]`, interpolating linearly between order statistics.
pub fn percentile(mut values: Vec<f64>, p: f64) -> f64 {
    assert!(!values.is_empty());
    let pos = p / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (_, lo_v, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_v = *lo_v;
    if hi == lo {
        return lo_v;
    }
    let hi_v = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_v + (hi_v - lo_v) * (pos - lo as f64)
}

/// Keep, per class, the `round((1 − sparsity)·d)` largest contributions
/// `W[c,j]·mean(h_j)`; ties keep the lower feature index.
pub fn dice_mask(layer: &Dense, feature_mean: &[f64], sparsity: f64) -> Vec<bool> {
    let d = layer.inputs();
    let keep = (((1.0 - sparsity) * d as f64).round() as usize).min(d);
    let mut mask = vec![false; layer.outputs() * d];
    for c in 0..layer.outputs() {
        let row = layer.weight_row(c);
        let mut order: Vec<(f64, usize)> = row
            .iter()
            .zip(feature_mean)
            .enumerate()
            .map(|(j, (w, m))| (*w as f64 * m, j))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, j) in order.into_iter().take(keep) {
            mask[c * d + j] = true;
        }
    }
    mask
}

fn penultimate_rows(head: &ProbeHead, x: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| head.penultimate(x.row(i)))
        .collect()
}

fn require_head(method: Method, head: Option<&ProbeHead>) -> Result<&ProbeHead> {
    head.ok_or_else(|| Error::requires(method, "a probe head"))
}

/// Fit `method` on the ID training split.
pub fn fit(
    method: Method,
    id_train: &DatasetSplit,
    head: Option<&ProbeHead>,
    params: &ScorerParams,
) -> Result<FittedScorer> {
    params.validate()?;
    if id_train.role != Role::IdTrain {
        return Err(Error::Config(format!(
            "scorers are fitted on id_train, got {} split '{}'",
            id_train.role, id_train.name
        )));
    }
    if method.needs_head() {
        require_head(method, head)?.check_dim(id_train.dim())?;
    }
    if method.needs_labels() {
        id_train
            .labels
            .as_ref()
            .ok_or_else(|| Error::requires(method, "id_train labels"))?;
    }
    let x = &id_train.matrix;
    let state = match method {
        Method::Msp | Method::MaxLogit | Method::Energy => ScorerState::Stateless,
        Method::GradNorm => match require_head(method, head)? {
            ProbeHead::Linear(_) => ScorerState::Stateless,
            ProbeHead::Mlp(_) => return Err(Error::requires(method, "a linear head")),
        },
        Method::ReAct => {
            let head = require_head(method, head)?;
            let pooled: Vec<f64> = penultimate_rows(head, x).concat();
            ScorerState::ReAct {
                threshold: percentile(pooled, params.react_percentile),
            }
        }
        Method::Dice => {
            let head = require_head(method, head)?;
            let rows = penultimate_rows(head, x);
            let layer = head.last_layer();
            let mut mean = vec![0.0; layer.inputs()];
            for r in &rows {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
            let mask = dice_mask(layer, &mean, params.dice_sparsity);
            let masked = layer.masked(&mask);
            ScorerState::Dice { mask, masked }
        }
        Method::KlMatch => {
            let head = require_head(method, head)?;
            let labels = id_train.labels()?;
            let logits = predict_logits(head, x)?;
            let c = head.n_classes();
            let mut templates = vec![vec![0.0; c]; labels.n_classes().max(c)];
            let mut counts = vec![0usize; templates.len()];
            for (i, row) in logits.rows().enumerate() {
                let y = labels.get(i);
                counts[y] += 1;
                for (t, p) in templates[y].iter_mut().zip(logit::softmax(row)) {
                    *t += p;
                }
            }
            let templates = templates
                .into_iter()
                .zip(counts)
                .filter(|(_, n)| *n > 0)
                .map(|(t, n)| t.into_iter().map(|v| (v / n as f64).max(1e-12)).collect())
                .collect();
            ScorerState::KlMatch { templates }
        }
        Method::Mahalanobis => ScorerState::Mahalanobis(MahalanobisState::fit(
            x,
            id_train.labels()?,
            params.mahalanobis_eps,
        )?),
        Method::Residual => {
            let offset = match head {
                Some(h @ ProbeHead::Linear(l)) => {
                    h.check_dim(x.n_cols())?;
                    subspace::logit_origin(&l.layer)?
                }
                _ => subspace::feature_mean(x),
            };
            ScorerState::Subspace(SubspaceState::fit(
                x,
                offset,
                params.principal_dim(x.n_cols()),
            )?)
        }
        Method::Vim => {
            let head = require_head(method, head)?;
            let ProbeHead::Linear(l) = head else {
                return Err(Error::requires(method, "a linear head"));
            };
            let offset = subspace::logit_origin(&l.layer)?;
            let mut st = SubspaceState::fit(x, offset, params.principal_dim(x.n_cols()))?;
            let logits = predict_logits(head, x)?;
            let max_sum: f64 = logits.rows().map(logit::max_logit).sum();
            let residual_sum: f64 = x.rows().map(|r| st.residual_norm(r)).sum();
            if residual_sum.is_nan() || residual_sum <= 0.0 {
                return Err(Error::Singular(
                    "vim: ID-train residuals are all zero; lower the principal dimension".into(),
                ));
            }
            st.set_alpha(max_sum / residual_sum);
            ScorerState::Subspace(st)
        }
        Method::Knn => ScorerState::Knn(KnnState::fit(x, params.k)),
    };
    Ok(FittedScorer {
        method,
        params: params.clone(),
        state,
        head: if method.needs_head() {
            head.cloned()
        } else {
            None
        },
        dim: x.n_cols(),
    })
}

impl FittedScorer {
    fn head(&self) -> Result<&ProbeHead> {
        self.head
            .as_ref()
            .ok_or_else(|| Error::requires(self.method, "a probe head"))
    }

    /// Score a single embedding.
    pub fn score_row(&self, z: &[f32]) -> Result<f64> {
        Ok(match (&self.state, self.method) {
            (ScorerState::Stateless, m) => {
                let head = self.head()?;
                let logits = head.logits(z);
                match m {
                    Method::Msp => logit::msp(&logits),
                    Method::MaxLogit => logit::max_logit(&logits),
                    Method::Energy => logit::energy(&logits),
                    Method::GradNorm => logit::grad_norm(&logits, z),
                    other => return Err(Error::Config(format!("{other}: missing fitted state"))),
                }
            }
            (ScorerState::ReAct { threshold }, _) => {
                let head = self.head()?;
                let clipped: Vec<f64> = head
                    .penultimate(z)
                    .into_iter()
                    .map(|v| v.min(*threshold))
                    .collect();
                logit::energy(&head.last_layer().apply(&clipped))
            }
            (ScorerState::Dice { masked, .. }, _) => {
                logit::energy(&masked.apply(&self.head()?.penultimate(z)))
            }
            (ScorerState::KlMatch { templates }, _) => {
                let p = logit::softmax(&self.head()?.logits(z));
                -templates
                    .iter()
                    .map(|t| logit::kl_divergence(&p, t))
                    .fold(f64::INFINITY, f64::min)
            }
            (ScorerState::Mahalanobis(st), _) => st.score_row(z),
            (ScorerState::Subspace(st), Method::Residual) => -st.residual_norm(z),
            (ScorerState::Subspace(st), _) => {
                let alpha = st
                    .alpha()
                    .ok_or_else(|| Error::Config("vim: alpha not fitted".into()))?;
                let mut logits = self.head()?.logits(z);
                logits.push(alpha * st.residual_norm(z));
                -*logit::softmax(&logits).last().expect("non-empty")
            }
            (ScorerState::Knn(st), _) => st.score_row(z),
        })
    }

    pub fn score_matrix(&self, x: &EmbeddingMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.n_cols(),
            });
        }
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.score_row(x.row(i)))
            .collect()
    }
}

/// Score every row of `split`.
pub fn score(fs: &FittedScorer, split: &DatasetSplit) -> Result<ScoreVector> {
    Ok(ScoreVector {
        method: fs.method,
        split: split.name.clone(),
        values: fs.score_matrix(&split.matrix)?,
    })
}

/// One (method, split) entry of a scoring grid.
#[derive(Debug, Clone)]
pub struct ScoreCell {
    pub method: Method,
    pub split: String,
    pub outcome: std::result::Result<ScoreVector, String>,
}

/// Fit each method once and score every split; failures are recorded per cell.
/// Cells are ordered method-major in the order given.
pub fn score_all(
    methods: &[Method],
    id_train: &DatasetSplit,
    head: Option<&ProbeHead>,
    splits: &[&DatasetSplit],
    params: &ScorerParams,
) -> Vec<ScoreCell> {
    let mut cells = Vec::with_capacity(methods.len() * splits.len());
    for &method in methods {
        match fit(method, id_train, head, params) {
            Ok(fitted) => {
                for split in splits {
                    cells.push(ScoreCell {
                        method,
                        split: split.name.clone(),
                        outcome: score(&fitted, split).map_err(|e| e.to_string()),
                    });
                }
            }
            Err(e) => {
                log::warn!("{method}: {e}");
                for split in splits {
                    cells.push(ScoreCell {
                        method,
                        split: split.name.clone(),
                        outcome: Err(e.to_string()),
                    });
                }
            }
        }
    }
    cells
}
