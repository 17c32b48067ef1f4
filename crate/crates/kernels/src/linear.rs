use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{check_len, Result};

/// Affine map `y = W x + b` with `W` stored as (out × in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Uniform fan-in initialization in `[-1/sqrt(in), 1/sqrt(in)]`, zero bias.
    pub fn random<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: uniform_matrix(output, input, 1.0 / (input as f64).sqrt(), rng),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("linear input", self.input_dim(), x.len())?;
        Ok(self.weight.dot(&x) + &self.bias)
    }
}

pub(crate) fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}
