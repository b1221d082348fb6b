use crate::error::{Error, Result};

/// Generalized advantage estimates for one trajectory segment.
///
/// `values` holds one more entry than `rewards`: the bootstrap value of the
/// state after the last transition. A `done` flag cuts the recursion, so the
/// value after a terminal step is never used.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if dones.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: dones.len(),
        });
    }
    if values.len() != n + 1 {
        return Err(Error::ShapeMismatch {
            expected: n + 1,
            actual: values.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
        running = delta + gamma * lambda * not_done * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
