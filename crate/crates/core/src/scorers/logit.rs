//! Scores computed from a row of logits.

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn msp(logits: &[f64]) -> f64 {
    softmax(logits)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_logit(logits: &[f64]) -> f64 {
    logits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Energy score at temperature 1, i.e. the log-sum-exp of the logits.
pub fn energy(logits: &[f64]) -> f64 {
    log_sum_exp(logits)
}

/// `‖p − u‖₁ · (‖z‖₁ + 1)`: the L1 norm of the gradient of KL(u ‖ softmax(W·z + b))
/// with respect to `(W, b)` of a linear head.
pub fn grad_norm(logits: &[f64], z: &[f32]) -> f64 {
    let p = softmax(logits);
    let u = 1.0 / p.len() as f64;
    let dev: f64 = p.iter().map(|pc| (pc - u).abs()).sum();
    let z_l1: f64 = z.iter().map(|v| (*v as f64).abs()).sum();
    dev * (z_l1 + 1.0)
}

/// KL(p ‖ t) with the convention `0 · ln 0 = 0`.
pub fn kl_divergence(p: &[f64], t: &[f64]) -> f64 {
    p.iter()
        .zip(t)
        .filter(|(pc, _)| **pc > 0.0)
        .map(|(pc, tc)| pc * (pc.ln() - tc.ln()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msp_of_ln2_logits() {
        let s = msp(&[2f64.ln(), 0.0, 0.0]);
        assert!((s - 0.5).abs() < 1e-15);
        let p = softmax(&[2f64.ln(), 0.0, 0.0]);
        assert!((p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn energy_of_zero_logits() {
        assert!((energy(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn grad_norm_vanishes_at_uniform() {
        assert_eq!(grad_norm(&[3.0, 3.0, 3.0], &[1.0, -2.0]), 0.0);
    }

    #[test]
    fn large_logits_stay_finite() {
        assert!(energy(&[1e4, 0.0]).is_finite());
        assert_eq!(msp(&[1e4, 0.0]), 1.0);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert!(kl_divergence(&p, &p).abs() < 1e-15);
        assert!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) > 0.0);
    }
}
