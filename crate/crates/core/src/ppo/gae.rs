use crate::error::{contract, Result};

/// GAE over a single episode segment. `values` carries one more entry than
/// `rewards`: the bootstrap value of the state after the last reward.
pub fn gae_advantages(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() + 1 {
        return Err(contract(format!(
            "gae needs len(values) = len(rewards) + 1, got {} and {}",
            values.len(),
            rewards.len()
        )));
    }
    let dones = vec![false; rewards.len()];
    Ok(gae_rollout(rewards, &values[..rewards.len()], values[rewards.len()], &dones, gamma, lambda))
}

/// GAE over a rollout that may span episodes. `dones[t]` marks that the
/// episode ended after step t, so nothing is bootstrapped across it.
/// `last_value` bootstraps the step after the final one.
pub fn gae_rollout(rewards: &[f64], values: &[f64], last_value: f64, dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    debug_assert_eq!(values.len(), n);
    debug_assert_eq!(dones.len(), n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, not_done) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], 1.0)
        } else {
            (last_value, 1.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * not_done * running;
        adv[t] = running;
    }
    adv
}

/// Shift to zero mean and scale to unit variance in place.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}
