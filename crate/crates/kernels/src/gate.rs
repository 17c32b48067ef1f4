use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::{check_len, check_shape, Result};
use crate::linear::uniform_matrix;
use crate::norm::LayerNorm;

/// Parameters of the sigmoid-gated fusion of new features with the drifted state.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// Gate projection, (hidden × 2·hidden).
    pub w_gate: Array2<f64>,
    /// Candidate projection, (hidden × 2·hidden).
    pub w_cand: Array2<f64>,
    /// LayerNorm on the gate pre-activation.
    pub norm: LayerNorm,
}

impl GateParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w_gate: Array2::zeros((hidden, 2 * hidden)),
            w_cand: Array2::zeros((hidden, 2 * hidden)),
            norm: LayerNorm::zeros(hidden),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((2 * hidden) as f64).sqrt();
        Self {
            w_gate: uniform_matrix(hidden, 2 * hidden, bound, rng),
            w_cand: uniform_matrix(hidden, 2 * hidden, bound, rng),
            norm: LayerNorm::identity(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.norm.dim()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `g = σ(LN(W_g[x ‖ h]))`, `ĥ = tanh(W_h[x ‖ h])`, `h' = (1−g)⊙h + g⊙ĥ`.
pub fn gated_update(x: ArrayView1<f64>, h: ArrayView1<f64>, params: &GateParams) -> Result<Array1<f64>> {
    let hidden = params.hidden();
    check_len("new features", hidden, x.len())?;
    check_len("drifted state", hidden, h.len())?;
    check_shape("gate projection", (hidden, 2 * hidden), params.w_gate.dim())?;
    check_shape("candidate projection", (hidden, 2 * hidden), params.w_cand.dim())?;

    let joined = concatenate(Axis(0), &[x, h]).expect("1-d concat");
    let gate = params.norm.apply(params.w_gate.dot(&joined).view())?.mapv(sigmoid);
    let cand = params.w_cand.dot(&joined).mapv(f64::tanh);
    Ok(Array1::from_iter(
        gate.iter()
            .zip(h.iter().zip(cand.iter()))
            .map(|(g, (hv, c))| (1.0 - g) * hv + g * c),
    ))
}
