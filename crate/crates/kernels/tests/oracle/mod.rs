//! Direct-formula reference implementations used as test oracles.
//!
//! Everything here is written with plain nested loops over `Vec`s, without
//! touching the kernels' ndarray code paths.
#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean: f64 = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mean) / (var + eps).sqrt() * gamma[i] + beta[i])
        .collect()
}

pub struct OracleHead {
    pub weight: Mat,
    pub attn: Vec<f64>,
}

pub struct OracleGat {
    pub heads: Vec<OracleHead>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Returns (features, attention per head).
pub fn gat(x: &Mat, mask: &Mat, p: &OracleGat, slope: f64) -> (Mat, Vec<Mat>) {
    let n = x.len();
    let d = p.heads[0].weight.len();
    let mut concat = vec![Vec::new(); n];
    let mut attentions = Vec::new();
    for head in &p.heads {
        let wh: Mat = x.iter().map(|h| matvec(&head.weight, h)).collect();
        let mut alpha = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..d {
                    s += head.attn[t] * wh[i][t] + head.attn[d + t] * wh[j][t];
                }
                let lr = if s > 0.0 { s } else { slope * s };
                e[j] = lr + mask[i][j];
            }
            let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
            for j in 0..n {
                alpha[i][j] = (e[j] - m).exp() / z;
            }
        }
        for i in 0..n {
            for t in 0..d {
                let agg: f64 = (0..n).map(|j| alpha[i][j] * wh[j][t]).sum();
                concat[i].push(agg.tanh());
            }
        }
        attentions.push(alpha);
    }
    let out = (0..n)
        .map(|i| {
            let pre: Vec<f64> = x[i].iter().zip(&concat[i]).map(|(a, b)| a + b).collect();
            layer_norm(&pre, &p.gamma, &p.beta, 1e-5)
        })
        .collect();
    (out, attentions)
}

/// Direct double-sum expansion of the continuous-time advantage:
/// `Â_t = Σ_k (Π_{m<k} λ·d_{t+m}·(1−done_{t+m})) · δ_{t+k}`.
pub fn gae_double_sum(r: &[f64], v: &[f64], dt: &[f64], done: &[bool], beta: f64, lambda: f64) -> Vec<f64> {
    let t_len = r.len();
    let disc: Vec<f64> = dt.iter().map(|d| (-beta * d).exp()).collect();
    let nd: Vec<f64> = done.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect();
    let delta: Vec<f64> = (0..t_len).map(|t| r[t] + disc[t] * v[t + 1] * nd[t] - v[t]).collect();
    (0..t_len)
        .map(|t| {
            let mut total = 0.0;
            for k in 0..(t_len - t) {
                let mut w = 1.0;
                for m in 0..k {
                    w *= lambda * disc[t + m] * nd[t + m];
                }
                total += w * delta[t + k];
            }
            total
        })
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated fusion evaluated elementwise.
pub fn gated(x: &[f64], h: &[f64], wg: &Mat, wh: &Mat, gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let joined: Vec<f64> = x.iter().chain(h).copied().collect();
    let g_pre = layer_norm(&matvec(wg, &joined), gamma, beta, 1e-5);
    let cand = matvec(wh, &joined);
    (0..h.len())
        .map(|i| {
            let g = sigmoid(g_pre[i]);
            (1.0 - g) * h[i] + g * cand[i].tanh()
        })
        .collect()
}

/// `exp(A t)` for `A = [[-a, -w], [w, -a]]`.
pub fn damped_rotation_exp(a: f64, w: f64, t: f64) -> [[f64; 2]; 2] {
    let s = (-a * t).exp();
    [[s * (w * t).cos(), -s * (w * t).sin()], [s * (w * t).sin(), s * (w * t).cos()]]
}
