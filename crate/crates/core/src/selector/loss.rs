//! Class-balanced binary cross-entropy, positive weights and hard-example
//! mining.

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Summed loss over the K outputs of one sample, and its gradient with
/// respect to the pre-sigmoid logits.
///
/// Per output: `-b * t * ln(y) - (1 - b) * (1 - t) * ln(1 - y)`.
pub fn class_balanced_bce(predictions: &[f64], targets: &[u8], betas: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(predictions.len(), targets.len());
    debug_assert_eq!(predictions.len(), betas.len());
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .zip(betas)
        .map(|((&y, &t), &b)| {
            let t = f64::from(t);
            let yc = y.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss += -b * t * yc.ln() - (1.0 - b) * (1.0 - t) * (1.0 - yc).ln();
            if yc != y {
                // Flat outside the clamp window.
                0.0
            } else {
                -b * t * (1.0 - y) + (1.0 - b) * (1.0 - t) * y
            }
        })
        .collect();
    (loss, grad)
}

/// Per-column `1 - positives / rows`, clamped to `[eps, 1 - eps]`.
pub fn compute_beta<T: AsRef<[u8]>>(batch_targets: &[T], eps: f64) -> Vec<f64> {
    let rows = batch_targets.len();
    if rows == 0 {
        return Vec::new();
    }
    let k = batch_targets[0].as_ref().len();
    (0..k)
        .map(|i| {
            let pos = batch_targets.iter().filter(|t| t.as_ref()[i] == 1).count();
            (1.0 - pos as f64 / rows as f64).clamp(eps, 1.0 - eps)
        })
        .collect()
}

/// Indices of the `ceil(fraction * n)` largest losses, in ascending index
/// order. Equal losses prefer the lower index.
pub fn ohem_filter(per_sample_losses: &[f64], fraction: f64) -> Vec<usize> {
    let n = per_sample_losses.len();
    let keep = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| per_sample_losses[b].total_cmp(&per_sample_losses[a]).then(a.cmp(&b)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    kept
}
