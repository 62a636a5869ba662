//! Fitted-scorer directories and score files.
//!
//! A fitted scorer is a directory holding `state.json`, the NPY arrays of its
//! state and, for head-based methods, the head under `head/`. Score vectors
//! are a `<f8` NPY file with a JSON sidecar next to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    FittedScorer, KnnState, MahalanobisState, Method, ScoreVector, ScorerParams, ScorerState,
    SubspaceState,
};
use crate::error::{Error, Result};
use crate::probe::{load_head, save_head};
use crate::store::npy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateFile {
    method: Method,
    dim: usize,
    params: ScorerParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    has_head: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_scorer(dir: impl AsRef<Path>, fs_: &FittedScorer) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut file = StateFile {
        method: fs_.method,
        dim: fs_.dim,
        params: fs_.params.clone(),
        threshold: None,
        alpha: None,
        k: None,
        rank: None,
        has_head: fs_.head.is_some(),
    };
    match &fs_.state {
        ScorerState::Stateless => {}
        ScorerState::ReAct { threshold } => file.threshold = Some(*threshold),
        ScorerState::Dice { mask, masked } => {
            let bits: Vec<i64> = mask.iter().map(|k| *k as i64).collect();
            npy::write(
                dir.join("mask.npy"),
                &[masked.outputs(), masked.inputs()],
                &bits,
            )?;
        }
        ScorerState::KlMatch { templates } => {
            let c = templates.first().map_or(0, Vec::len);
            npy::write(
                dir.join("templates.npy"),
                &[templates.len(), c],
                &templates.concat(),
            )?;
        }
        ScorerState::Mahalanobis(st) => {
            let d = st.dim();
            npy::write(
                dir.join("means.npy"),
                &[st.means().len() / d, d],
                st.means(),
            )?;
            npy::write(dir.join("precision.npy"), &[d, d], st.precision())?;
        }
        ScorerState::Subspace(st) => {
            file.alpha = st.alpha();
            file.rank = Some(st.rank());
            npy::write(dir.join("offset.npy"), &[st.dim()], st.offset())?;
            npy::write(dir.join("basis.npy"), &[st.dim(), st.rank()], st.basis())?;
        }
        ScorerState::Knn(st) => {
            file.k = Some(st.k());
            npy::write(
                dir.join("reference.npy"),
                &[st.n_reference(), st.dim()],
                st.reference(),
            )?;
        }
    }
    if let Some(head) = &fs_.head {
        save_head(dir.join("head"), head)?;
    }
    write_json(&dir.join("state.json"), &file)
}

fn read_2d(path: PathBuf) -> Result<(usize, usize, Vec<f64>)> {
    let (shape, data) = npy::read::<f64>(path)?;
    match shape.as_slice() {
        [r, c] => Ok((*r, *c, data)),
        _ => Err(Error::Rank { expected: 2, shape }),
    }
}

pub fn load_scorer(dir: impl AsRef<Path>) -> Result<FittedScorer> {
    let dir = dir.as_ref();
    let file: StateFile = read_json(&dir.join("state.json"))?;
    let head = if file.has_head {
        Some(load_head(dir.join("head"))?)
    } else {
        None
    };
    let missing = |what: &str| Error::Format(format!("state.json lacks '{what}'"));
    let state = match file.method {
        Method::Msp | Method::MaxLogit | Method::Energy | Method::GradNorm => {
            ScorerState::Stateless
        }
        Method::ReAct => ScorerState::ReAct {
            threshold: file.threshold.ok_or_else(|| missing("threshold"))?,
        },
        Method::Dice => {
            let (_, bits) = npy::read::<i64>(dir.join("mask.npy"))?;
            let mask: Vec<bool> = bits.into_iter().map(|b| b != 0).collect();
            let layer = head
                .as_ref()
                .ok_or_else(|| Error::requires(Method::Dice, "a probe head"))?
                .last_layer();
            if mask.len() != layer.weight().len() {
                return Err(Error::Shape("dice mask does not match head".into()));
            }
            let masked = layer.masked(&mask);
            ScorerState::Dice { mask, masked }
        }
        Method::KlMatch => {
            let (_, c, data) = read_2d(dir.join("templates.npy"))?;
            ScorerState::KlMatch {
                templates: data.chunks_exact(c.max(1)).map(<[f64]>::to_vec).collect(),
            }
        }
        Method::Mahalanobis => {
            let (_, d, means) = read_2d(dir.join("means.npy"))?;
            let (_, _, precision) = read_2d(dir.join("precision.npy"))?;
            ScorerState::Mahalanobis(MahalanobisState::new(d, means, precision)?)
        }
        Method::Residual | Method::Vim => {
            let (_, offset) = npy::read::<f64>(dir.join("offset.npy"))?;
            let (d, rank, basis) = read_2d(dir.join("basis.npy"))?;
            ScorerState::Subspace(SubspaceState::new(d, offset, rank, basis, file.alpha)?)
        }
        Method::Knn => {
            let (_, d, reference) = read_2d(dir.join("reference.npy"))?;
            ScorerState::Knn(KnnState::from_normalized(
                d,
                file.k.ok_or_else(|| missing("k"))?,
                reference,
            )?)
        }
    };
    Ok(FittedScorer {
        method: file.method,
        params: file.params,
        state,
        head,
        dim: file.dim,
    })
}

/// JSON written next to a persisted score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSidecar {
    pub method: Method,
    pub split: String,
    pub params: ScorerParams,
}

/// Write `<stem>.npy` and `<stem>.json`.
pub fn save_scores(path: impl AsRef<Path>, sv: &ScoreVector, params: &ScorerParams) -> Result<()> {
    let path = path.as_ref();
    npy::write(path.with_extension("npy"), &[sv.len()], &sv.values)?;
    write_json(
        &path.with_extension("json"),
        &ScoreSidecar {
            method: sv.method,
            split: sv.split.clone(),
            params: params.clone(),
        },
    )
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<(ScoreVector, ScorerParams)> {
    let path = path.as_ref();
    let side: ScoreSidecar = read_json(&path.with_extension("json"))?;
    let (shape, values) = npy::read::<f64>(path.with_extension("npy"))?;
    if shape.len() != 1 {
        return Err(Error::Rank { expected: 1, shape });
    }
    Ok((
        ScoreVector {
            method: side.method,
            split: side.split,
            values,
        },
        side.params,
    ))
}
