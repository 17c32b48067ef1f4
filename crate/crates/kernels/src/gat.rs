//! Masked multi-head graph attention.
//!
//! Per head `k`, node features are projected by `W_k` to `hidden / K`
//! dimensions and scored pairwise with
//! `e_ij = LeakyReLU(a_k · [W_k h_i ‖ W_k h_j]) + M_ij`. Rows are
//! softmax-normalized, the aggregated neighborhood passes through `tanh`,
//! and the concatenated heads are added back onto the input before a
//! LayerNorm. Blocked entries carry [`MASK_BLOCKED`](crate::MASK_BLOCKED),
//! which underflows to an attention weight of exactly zero.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{check_len, check_shape, KernelError, Result};
use crate::linear::uniform_matrix;
use crate::norm::LayerNorm;
use crate::LEAKY_RELU_SLOPE;

#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    /// Projection, (head_dim × hidden).
    pub weight: Array2<f64>,
    /// Attention vector over `[W h_i ‖ W h_j]`, length `2 · head_dim`.
    pub attn: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    pub heads: Vec<GatHead>,
    pub norm: LayerNorm,
}

impl GatParams {
    /// All-zero projections with an identity LayerNorm.
    pub fn zeros(hidden: usize, num_heads: usize) -> Self {
        let head_dim = head_dim(hidden, num_heads);
        Self {
            heads: (0..num_heads)
                .map(|_| GatHead {
                    weight: Array2::zeros((head_dim, hidden)),
                    attn: Array1::zeros(2 * head_dim),
                })
                .collect(),
            norm: LayerNorm::identity(hidden),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, num_heads: usize, rng: &mut R) -> Self {
        let head_dim = head_dim(hidden, num_heads);
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            heads: (0..num_heads)
                .map(|_| GatHead {
                    weight: uniform_matrix(head_dim, hidden, bound, rng),
                    attn: Array1::from_shape_fn(2 * head_dim, |_| rng.random_range(-bound..=bound)),
                })
                .collect(),
            norm: LayerNorm::identity(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.norm.dim()
    }

    pub fn head_dim(&self) -> usize {
        self.heads.first().map_or(0, |h| h.weight.nrows())
    }

    fn validate(&self) -> Result<()> {
        if self.heads.is_empty() {
            return Err(KernelError::ShapeMismatch {
                what: "attention heads",
                expected: ">= 1".into(),
                got: "0".into(),
            });
        }
        let hidden = self.hidden();
        let head_dim = self.head_dim();
        check_len("concatenated head width", hidden, head_dim * self.heads.len())?;
        for head in &self.heads {
            check_shape("head projection", (head_dim, hidden), head.weight.dim())?;
            check_len("head attention vector", 2 * head_dim, head.attn.len())?;
        }
        Ok(())
    }
}

fn head_dim(hidden: usize, num_heads: usize) -> usize {
    assert!(num_heads > 0 && hidden % num_heads == 0, "hidden must divide evenly across heads");
    hidden / num_heads
}

#[derive(Debug, Clone)]
pub struct GatOutput {
    /// Updated node features, (nodes × hidden).
    pub features: Array2<f64>,
    /// Row-stochastic attention matrix per head, (nodes × nodes).
    pub attention: Vec<Array2<f64>>,
}

#[inline]
fn leaky_relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_RELU_SLOPE * x
    }
}

/// Masked multi-head attention layer over `x` (nodes × hidden).
pub fn gat_layer(x: ArrayView2<f64>, mask: ArrayView2<f64>, params: &GatParams) -> Result<GatOutput> {
    params.validate()?;
    let (rows, cols) = mask.dim();
    if rows != cols {
        return Err(KernelError::NonSquareMask { rows, cols });
    }
    let n = x.nrows();
    check_len("mask size vs node count", n, rows)?;
    check_len("node feature width", params.hidden(), x.ncols())?;
    for i in 0..n {
        let d = mask[[i, i]];
        if d != 0.0 {
            return Err(KernelError::MaskDiagonal { node: i, value: d });
        }
    }

    let head_dim = params.head_dim();
    let mut concat = Array2::<f64>::zeros((n, params.hidden()));
    let mut attention = Vec::with_capacity(params.heads.len());
    let mut scores = vec![0.0; n];

    for (k, head) in params.heads.iter().enumerate() {
        let z = x.dot(&head.weight.t()); // nodes × head_dim
        let a_src = head.attn.slice(s![..head_dim]);
        let a_dst = head.attn.slice(s![head_dim..]);
        let src: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&a_src)).collect();
        let dst: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&a_dst)).collect();

        let mut alpha = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let mut max = f64::NEG_INFINITY;
            for j in 0..n {
                let e = leaky_relu(src[i] + dst[j]) + mask[[i, j]];
                scores[j] = e;
                max = max.max(e);
            }
            let mut sum = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for j in 0..n {
                alpha[[i, j]] = scores[j] / sum;
            }
        }

        let aggregated = alpha.dot(&z).mapv(f64::tanh);
        concat
            .slice_mut(s![.., k * head_dim..(k + 1) * head_dim])
            .assign(&aggregated);
        attention.push(alpha);
    }

    let residual = &x + &concat;
    let mut features = Array2::<f64>::zeros(residual.raw_dim());
    for (mut out, row) in features.axis_iter_mut(Axis(0)).zip(residual.axis_iter(Axis(0))) {
        out.assign(&params.norm.apply(row)?);
    }
    Ok(GatOutput { features, attention })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MASK_BLOCKED;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node_attends_to_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = GatParams::random(8, 2, &mut rng);
        let x = Array2::from_shape_fn((1, 8), |(_, j)| j as f64 * 0.1 - 0.3);
        let out = gat_layer(x.view(), Array2::zeros((1, 1)).view(), &params).unwrap();
        for a in &out.attention {
            assert_eq!(a[[0, 0]], 1.0);
        }
        // LayerNorm(h + concat_k tanh(W_k h))
        let h = x.row(0);
        let mut pre = h.to_owned();
        for (k, head) in params.heads.iter().enumerate() {
            let wh = head.weight.dot(&h).mapv(f64::tanh);
            for d in 0..4 {
                pre[k * 4 + d] += wh[d];
            }
        }
        let expected = params.norm.apply(pre.view()).unwrap();
        for (a, b) in out.features.row(0).iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_masked_node_matches_self_only_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = GatParams::random(8, 2, &mut rng);
        let x = Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0));
        let mut mask = Array2::zeros((3, 3));
        for j in 1..3 {
            mask[[0, j]] = MASK_BLOCKED;
            mask[[j, 0]] = MASK_BLOCKED;
        }
        let out = gat_layer(x.view(), mask.view(), &params).unwrap();
        let alone = gat_layer(x.slice(s![0..1, ..]), Array2::zeros((1, 1)).view(), &params).unwrap();
        for (a, b) in out.features.row(0).iter().zip(alone.features.row(0).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_masks() {
        let params = GatParams::zeros(4, 1);
        let x = Array2::zeros((2, 4));
        assert!(matches!(
            gat_layer(x.view(), Array2::zeros((2, 3)).view(), &params),
            Err(KernelError::NonSquareMask { .. })
        ));
        assert!(gat_layer(x.view(), Array2::zeros((3, 3)).view(), &params).is_err());
        let mut mask = Array2::zeros((2, 2));
        mask[[1, 1]] = MASK_BLOCKED;
        assert!(matches!(
            gat_layer(x.view(), mask.view(), &params),
            Err(KernelError::MaskDiagonal { node: 1, .. })
        ));
        assert!(gat_layer(Array2::zeros((2, 5)).view(), Array2::zeros((2, 2)).view(), &params).is_err());
    }
}
