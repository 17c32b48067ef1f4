//! Generalized advantage estimation with an exponential time discount.
//!
//! A transition that took normalized time `Δt` is discounted by
//! `exp(-β·Δt)` instead of a fixed per-step `γ`.

use crate::error::{check_len, Result};
use crate::{DEFAULT_BETA, DEFAULT_LAMBDA};

#[derive(Debug, Clone, PartialEq)]
pub struct GaeInputs {
    /// `r_t`, length `T`.
    pub rewards: Vec<f64>,
    /// `V_t`, length `T + 1` (the last entry bootstraps the tail).
    pub values: Vec<f64>,
    /// Normalized sojourns `Δt_t ∈ [0, 1]`, length `T`.
    pub sojourns: Vec<f64>,
    /// Episode-termination flags, length `T`.
    pub dones: Vec<bool>,
    pub beta: f64,
    pub lambda: f64,
}

impl GaeInputs {
    pub fn new(rewards: Vec<f64>, values: Vec<f64>, sojourns: Vec<f64>, dones: Vec<bool>) -> Self {
        Self {
            rewards,
            values,
            sojourns,
            dones,
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let t = self.rewards.len();
        check_len("values (T + 1)", t + 1, self.values.len())?;
        check_len("sojourns", t, self.sojourns.len())?;
        check_len("dones", t, self.dones.len())?;
        Ok(())
    }
}

/// Backward recursion:
/// `δ_t = r_t + e^{-βΔt_t}·V_{t+1}·(1−done_t) − V_t`,
/// `Â_t = δ_t + e^{-βΔt_t}·λ·(1−done_t)·Â_{t+1}`.
pub fn continuous_gae(inputs: &GaeInputs) -> Result<Vec<f64>> {
    inputs.validate()?;
    let t_len = inputs.len();
    let mut advantages = vec![0.0; t_len];
    let mut gae = 0.0;
    for t in (0..t_len).rev() {
        let discount = (-inputs.beta * inputs.sojourns[t]).exp();
        let not_done = if inputs.dones[t] { 0.0 } else { 1.0 };
        let delta = inputs.rewards[t] + discount * inputs.values[t + 1] * not_done - inputs.values[t];
        gae = delta + discount * inputs.lambda * not_done * gae;
        advantages[t] = gae;
    }
    Ok(advantages)
}

/// Return targets `R̂_t = Â_t + V_t`.
pub fn discounted_returns(inputs: &GaeInputs, advantages: &[f64]) -> Result<Vec<f64>> {
    check_len("advantages", inputs.len(), advantages.len())?;
    Ok(advantages.iter().zip(&inputs.values).map(|(a, v)| a + v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let mut inputs = GaeInputs::new(vec![2.0], vec![1.0, 3.0], vec![0.4], vec![false]);
        inputs.beta = 0.05;
        let adv = continuous_gae(&inputs).unwrap();
        let expected = 2.0 + (-0.05f64 * 0.4).exp() * 3.0 - 1.0;
        assert!((adv[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn undiscounted_terminal_case_telescopes() {
        let rewards = vec![1.0, -0.5, 2.0, 0.25];
        let values = vec![0.3, 0.7, -1.1, 0.4, 9.0];
        let mut inputs = GaeInputs::new(rewards.clone(), values.clone(), vec![0.3; 4], vec![false, false, false, true]);
        inputs.beta = 0.0;
        inputs.lambda = 1.0;
        let adv = continuous_gae(&inputs).unwrap();
        for t in 0..4 {
            let expected: f64 = rewards[t..].iter().sum::<f64>() - values[t];
            assert!((adv[t] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_inconsistent_lengths() {
        let inputs = GaeInputs::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![0.1, 0.1], vec![false, false]);
        assert!(continuous_gae(&inputs).is_err());
    }

    #[test]
    fn returns_add_values() {
        let inputs = GaeInputs::new(vec![1.0], vec![0.5, 0.0], vec![0.0], vec![true]);
        let adv = continuous_gae(&inputs).unwrap();
        assert_eq!(discounted_returns(&inputs, &adv).unwrap(), vec![1.0]);
    }
}
