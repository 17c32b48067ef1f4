use crate::error::{check_len, Result};

/// Weight of the value loss in the combined objective.
pub const VALUE_COEF: f64 = 0.5;
/// Weight of the entropy bonus in the combined objective.
pub const ENTROPY_COEF: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoLoss {
    /// `-mean(min(r·Â, clip(r, 1−ε, 1+ε)·Â))`
    pub clip: f64,
    /// `mean((V − R̂)²)`
    pub value: f64,
    /// `clip + 0.5·value − 0.01·mean(entropy)`
    pub combined: f64,
}

/// Evaluates the clipped surrogate, value loss, and combined objective.
///
/// All slices share one length; `entropy` holds per-sample policy entropies
/// and enters the objective through its mean.
pub fn ppo_clip_loss(
    ratios: &[f64],
    advantages: &[f64],
    values: &[f64],
    returns: &[f64],
    entropy: &[f64],
    eps: f64,
) -> Result<PpoLoss> {
    let n = ratios.len();
    check_len("advantages", n, advantages.len())?;
    check_len("values", n, values.len())?;
    check_len("returns", n, returns.len())?;
    check_len("entropy", n, entropy.len())?;
    if n == 0 {
        return Ok(PpoLoss {
            clip: 0.0,
            value: 0.0,
            combined: 0.0,
        });
    }
    let n_f = n as f64;

    let surrogate: f64 = ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| (r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a))
        .sum();
    let clip = -surrogate / n_f;
    let value = values.iter().zip(returns).map(|(v, r)| (v - r) * (v - r)).sum::<f64>() / n_f;
    let mean_entropy = entropy.iter().sum::<f64>() / n_f;

    Ok(PpoLoss {
        clip,
        value,
        combined: clip + VALUE_COEF * value - ENTROPY_COEF * mean_entropy,
    })
}
