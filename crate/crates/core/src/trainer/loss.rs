use super::rollout::RolloutBatch;
use super::Variant;
use crate::alip::{Action, MarConfig};
use crate::error::{Error, Result};

/// Per-sample weight on the imitation term actually used by `variant`,
/// at parameter precision.
pub fn effective_weights(batch: &RolloutBatch, variant: Variant, mar: &MarConfig) -> Result<Vec<f32>> {
    let n = batch.len();
    match variant {
        Variant::PureRl | Variant::Ifm => Ok(vec![0.0; n]),
        Variant::FullReg => {
            check_labels(batch)?;
            Ok(vec![mar.w0() as f32; n])
        }
        Variant::Ppf => {
            check_labels(batch)?;
            Ok(batch.mar_weights.clone())
        }
    }
}

fn check_labels(batch: &RolloutBatch) -> Result<()> {
    let n = batch.len();
    if batch.expert.len() != n * Action::DIM || batch.mar_weights.len() != n {
        return Err(Error::MissingLabels);
    }
    Ok(())
}

/// `mean_i w_i ‖a^E_i − μ_i‖²` over the given samples, plus its gradient with
/// respect to `mu` (same layout). Zero-weight samples contribute nothing.
pub(crate) fn weighted_imitation(
    mu: &[f32],
    expert: &[f32],
    weights: &[f32],
    scale: f64,
    d_mu: &mut [f64],
) -> f64 {
    let dim = Action::DIM;
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let w = w as f64;
        for k in 0..dim {
            let e = expert[i * dim + k] as f64 - mu[i * dim + k] as f64;
            total += w * e * e;
            d_mu[i * dim + k] -= 2.0 * w * e * scale;
        }
    }
    total * scale
}

/// Regularization loss of the current policy mean on `batch`.
pub fn regularization_loss(
    batch: &RolloutBatch,
    policy: &crate::nn::GaussianPolicy,
    variant: Variant,
    mar: &MarConfig,
) -> Result<f64> {
    let weights = effective_weights(batch, variant, mar)?;
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(0.0);
    }
    let n = batch.len();
    let cache = policy.mean.forward_batch(&batch.states, n)?;
    let mut sink = vec![0.0; n * Action::DIM];
    Ok(weighted_imitation(
        cache.output(),
        &batch.expert,
        &weights,
        1.0 / n as f64,
        &mut sink,
    ))
}
