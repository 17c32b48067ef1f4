//! Hidden-state drift between observations.
//!
//! The latent state follows an autonomous ODE `dh/dt = f(h)`; one classic
//! fixed-step RK4 step spans the whole (normalized) time jump, costing
//! exactly four evaluations of `f`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{check_len, KernelError, Result};
use crate::linear::Linear;

/// Autonomous dynamics `f(h)`.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn eval(&self, h: ArrayView1<f64>) -> Array1<f64>;
}

/// Two-layer perceptron `f(h) = W2 · tanh(W1 · h + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDynamics {
    pub inner: Linear,
    pub outer: Linear,
}

impl MlpDynamics {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: Linear::zeros(dim, dim),
            outer: Linear::zeros(dim, dim),
        }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self {
            inner: Linear::random(dim, dim, rng),
            outer: Linear::random(dim, dim, rng),
        }
    }
}

impl Dynamics for MlpDynamics {
    fn dim(&self) -> usize {
        self.outer.output_dim()
    }

    fn eval(&self, h: ArrayView1<f64>) -> Array1<f64> {
        let hidden = (self.inner.weight.dot(&h) + &self.inner.bias).mapv(f64::tanh);
        self.outer.weight.dot(&hidden) + &self.outer.bias
    }
}

/// Linear dynamics `f(h) = A h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics(pub Array2<f64>);

impl Dynamics for LinearDynamics {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn eval(&self, h: ArrayView1<f64>) -> Array1<f64> {
        self.0.dot(&h)
    }
}

/// Fixed-step RK4 integrator that counts dynamics evaluations.
#[derive(Debug, Default, Clone)]
pub struct Rk4 {
    nfe: u64,
    steps: u64,
}

impl Rk4 {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total evaluations of `f` so far.
    pub fn nfe(&self) -> u64 {
        self.nfe
    }

    /// Number of non-trivial (nonzero interval) steps taken.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances `h` by one RK4 step over `[0, dt]`.
    ///
    /// `dt == 0` returns `h` unchanged without evaluating `f`.
    pub fn drift<D: Dynamics + ?Sized>(&mut self, h: ArrayView1<f64>, dt: f64, f: &D) -> Result<Array1<f64>> {
        if !dt.is_finite() {
            return Err(KernelError::NonFinite("integration interval"));
        }
        if dt < 0.0 {
            return Err(KernelError::NegativeInterval(dt));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite("hidden state"));
        }
        check_len("hidden state vs dynamics", f.dim(), h.len())?;
        if dt == 0.0 {
            return Ok(h.to_owned());
        }

        let k1 = f.eval(h);
        let k2 = f.eval((&h + &(&k1 * (dt / 2.0))).view());
        let k3 = f.eval((&h + &(&k2 * (dt / 2.0))).view());
        let k4 = f.eval((&h + &(&k3 * dt)).view());
        self.nfe += 4;
        self.steps += 1;

        Ok(&h + &((k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (dt / 6.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_dynamics_leave_state_unchanged() {
        let f = MlpDynamics::zeros(3);
        let mut rk = Rk4::new();
        let h = array![0.5, -1.0, 2.0];
        assert_eq!(rk.drift(h.view(), 0.7, &f).unwrap(), h);
        assert_eq!(rk.nfe(), 4);
    }

    #[test]
    fn zero_interval_short_circuits() {
        let f = LinearDynamics(array![[-1.0]]);
        let mut rk = Rk4::new();
        let h = array![1.0];
        assert_eq!(rk.drift(h.view(), 0.0, &f).unwrap(), h);
        assert_eq!(rk.nfe(), 0);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let f = LinearDynamics(array![[-1.0]]);
        let mut rk = Rk4::new();
        let out = rk.drift(array![1.0].view(), 0.1, &f).unwrap();
        assert!((out[0] - 0.904_837_418_035_959_6).abs() < 1e-7);
        assert_eq!(rk.nfe(), 4);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let f = LinearDynamics(array![[-1.0]]);
        let mut rk = Rk4::new();
        assert!(rk.drift(array![1.0].view(), -0.1, &f).is_err());
        assert!(rk.drift(array![1.0].view(), f64::NAN, &f).is_err());
        assert!(rk.drift(array![f64::INFINITY].view(), 0.1, &f).is_err());
        assert!(rk.drift(array![1.0, 2.0].view(), 0.1, &f).is_err());
        assert_eq!(rk.nfe(), 0);
    }
}
