//! Detection metrics with in-distribution as the positive class.

mod report;

use crate::error::{Error, Result};

pub use report::{
    build_report, median_report, parse_csv, render_report, EvalCell, EvalReport, FailedCell,
    Format, ReportMeta,
};

fn check(id: &[f64], ood: &[f64]) -> Result<()> {
    if id.is_empty() {
        return Err(Error::EmptyInput("id scores"));
    }
    if ood.is_empty() {
        return Err(Error::EmptyInput("ood scores"));
    }
    if id.iter().chain(ood).any(|v| !v.is_finite()) {
        return Err(Error::Config("scores must be finite".into()));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann–Whitney U statistic with midranks:
/// `P(id > ood) + ½·P(id = ood)`.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let mut pooled: Vec<(f64, bool)> = id
        .iter()
        .map(|v| (*v, true))
        .chain(ood.iter().map(|v| (*v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the rank sum keeps midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        // ranks start+1 ..= end share the midrank (start + 1 + end) / 2
        let twice_mid = (start + 1 + end) as u128;
        let ids = pooled[start..end].iter().filter(|p| p.1).count() as u128;
        twice_rank_sum += twice_mid * ids;
        start = end;
    }
    let (n_id, n_ood) = (id.len() as u128, ood.len() as u128);
    let twice_u = twice_rank_sum - n_id * (n_id + 1);
    Ok(twice_u as f64 / (2 * n_id * n_ood) as f64)
}

/// Fraction of OOD scores at or above the largest threshold that still
/// accepts at least `tpr` of the ID scores.
pub fn fpr_at_tpr(id: &[f64], ood: &[f64], tpr: f64) -> Result<f64> {
    check(id, ood)?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(Error::Config(format!("tpr must lie in (0, 1], got {tpr}")));
    }
    let mut sorted = id.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let needed = (1..=n).find(|m| *m as f64 / n as f64 >= tpr).unwrap_or(n);
    let threshold = sorted[needed - 1];
    let accepted = ood.iter().filter(|v| **v >= threshold).count();
    Ok(accepted as f64 / ood.len() as f64)
}
