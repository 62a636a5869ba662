//! Probe → fit → score → AUROC grid, shared by the CLI and the synthetic experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{
    auroc, build_report, fpr_at_tpr, EvalCell, EvalReport, FailedCell, ReportMeta,
};
use crate::probe::{train_linear_probe, train_mlp_probe, ProbeConfig, ProbeHead};
use crate::scorers::{score_all, Method, ScorerParams};
use crate::store::DatasetSplit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    #[default]
    Linear,
    Mlp,
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ProbeKind::Linear),
            "mlp" => Ok(ProbeKind::Mlp),
            other => Err(Error::Config(format!(
                "unknown probe '{other}' (linear, mlp)"
            ))),
        }
    }
}

pub fn train_probe(kind: ProbeKind, train: &DatasetSplit, cfg: &ProbeConfig) -> Result<ProbeHead> {
    Ok(match kind {
        ProbeKind::Linear => train_linear_probe(train, cfg)?.into(),
        ProbeKind::Mlp => train_mlp_probe(train, cfg)?.into(),
    })
}

/// AUROC and FPR@95%TPR of one ID/OOD pair of score vectors.
pub fn eval_cell(method: &str, ood_split: &str, id: &[f64], ood: &[f64]) -> Result<EvalCell> {
    Ok(EvalCell {
        method: method.to_string(),
        ood_split: ood_split.to_string(),
        auroc: auroc(id, ood)?,
        fpr95: fpr_at_tpr(id, ood, 0.95)?,
        n_id: id.len(),
        n_ood: ood.len(),
    })
}

/// Fit every method on `id_train` and evaluate `id_test` against each OOD split.
/// Per-cell failures land in the report instead of aborting the grid.
pub fn evaluate(
    methods: &[Method],
    id_train: &DatasetSplit,
    head: Option<&ProbeHead>,
    id_test: &DatasetSplit,
    oods: &[&DatasetSplit],
    params: &ScorerParams,
    mut meta: ReportMeta,
) -> Result<EvalReport> {
    let mut splits = vec![id_test];
    splits.extend_from_slice(oods);
    let grid = score_all(methods, id_train, head, &splits, params);
    let mut cells = Vec::new();
    for &method in methods {
        let of_method: Vec<_> = grid.iter().filter(|c| c.method == method).collect();
        let id_scores = match &of_method[0].outcome {
            Ok(sv) => &sv.values,
            Err(e) => {
                for ood in oods {
                    meta.failures.push(FailedCell {
                        method: method.label().into(),
                        ood_split: ood.name.clone(),
                        error: e.clone(),
                    });
                }
                continue;
            }
        };
        for cell in &of_method[1..] {
            let outcome = cell.outcome.as_ref().map_err(|e| e.clone()).and_then(|sv| {
                eval_cell(method.label(), &cell.split, id_scores, &sv.values)
                    .map_err(|e| e.to_string())
            });
            match outcome {
                Ok(c) => cells.push(c),
                Err(error) => meta.failures.push(FailedCell {
                    method: method.label().into(),
                    ood_split: cell.split.clone(),
                    error,
                }),
            }
        }
    }
    build_report(cells, meta)
}
