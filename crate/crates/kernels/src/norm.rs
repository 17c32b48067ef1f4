use ndarray::{Array1, ArrayView1};

use crate::error::{check_len, Result};
use crate::LAYER_NORM_EPS;

/// Feature-wise layer normalization with a single global scale/shift pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

impl LayerNorm {
    /// Unit scale, zero shift.
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            gamma: Array1::zeros(dim),
            beta: Array1::zeros(dim),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("layer norm input", self.dim(), x.len())?;
        let n = x.len() as f64;
        let mean = x.sum() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + self.eps).sqrt();
        Ok(Array1::from_iter(
            x.iter()
                .zip(self.gamma.iter().zip(self.beta.iter()))
                .map(|(v, (g, b))| (v - mean) * inv * g + b),
        ))
    }
}
