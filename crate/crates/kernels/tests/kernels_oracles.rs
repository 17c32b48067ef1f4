mod oracle;

use ndarray::{Array1, Array2};
use netforge_kernels::{
    continuous_gae, gat_layer, gated_update, policy_forward, ppo_clip_loss, topology_message_pass, GaeInputs,
    GateParams, GatParams, LinearDynamics, PolicyInputs, PolicyParams, Rk4, DEFAULT_ZONE_CHAIN, LEAKY_RELU_SLOPE,
    MASK_BLOCKED,
};
use oracle::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_mat(a: &Array2<f64>) -> Mat {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn oracle_params(p: &GatParams) -> OracleGat {
    OracleGat {
        heads: p
            .heads
            .iter()
            .map(|h| OracleHead {
                weight: to_mat(&h.weight),
                attn: h.attn.to_vec(),
            })
            .collect(),
        gamma: p.norm.gamma.to_vec(),
        beta: p.norm.beta.to_vec(),
    }
}

fn random_mask(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if !rng.random_bool(density) {
                m[[i, j]] = MASK_BLOCKED;
                m[[j, i]] = MASK_BLOCKED;
            }
        }
    }
    m
}

#[test]
fn gat_dense_three_node_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut params = GatParams::random(4, 1, &mut rng);
    params.norm.gamma = Array1::from_shape_fn(4, |_| rng.random_range(0.5..1.5));
    params.norm.beta = Array1::from_shape_fn(4, |_| rng.random_range(-0.5..0.5));
    let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
    let mask = Array2::zeros((3, 3));
    let out = gat_layer(x.view(), mask.view(), &params).unwrap();
    let (expected, _) = gat(&to_mat(&x), &to_mat(&mask), &oracle_params(&params), LEAKY_RELU_SLOPE);
    for i in 0..3 {
        for k in 0..4 {
            assert!((out.features[[i, k]] - expected[i][k]).abs() < 1e-6);
        }
    }
}

#[test]
fn gat_random_graphs_respect_mask_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = rng.random_range(1..7);
        let heads = [1, 2, 4][case % 3];
        let hidden = heads * rng.random_range(1..4);
        let params = GatParams::random(hidden, heads, &mut rng);
        let x = Array2::from_shape_fn((n, hidden), |_| rng.random_range(-1.5..1.5));
        let mask = random_mask(n, 0.5, &mut rng);
        let out = gat_layer(x.view(), mask.view(), &params).unwrap();
        let (expected, att) = gat(&to_mat(&x), &to_mat(&mask), &oracle_params(&params), LEAKY_RELU_SLOPE);
        for (h, alpha) in out.attention.iter().enumerate() {
            for i in 0..n {
                let row_sum: f64 = alpha.row(i).sum();
                assert!((row_sum - 1.0).abs() < 1e-6);
                for j in 0..n {
                    if mask[[i, j]] != 0.0 {
                        assert!(alpha[[i, j]] <= 1e-12);
                    }
                    assert!((alpha[[i, j]] - att[h][i][j]).abs() < 1e-9);
                }
            }
        }
        for i in 0..n {
            for k in 0..hidden {
                assert!((out.features[[i, k]] - expected[i][k]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn message_pass_matches_explicit_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 5;
    let w = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    let zones: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let input: Vec<(String, Array1<f64>)> = DEFAULT_ZONE_CHAIN
        .iter()
        .zip(&zones)
        .map(|(n, z)| (n.to_string(), Array1::from(z.clone())))
        .collect();
    let out = topology_message_pass(&input, &DEFAULT_ZONE_CHAIN, w.view()).unwrap();
    let wm = to_mat(&w);
    let corp: Vec<f64> = zones[1].iter().zip(matvec(&wm, &zones[0])).map(|(a, b)| a + b).collect();
    let vault: Vec<f64> = zones[2].iter().zip(matvec(&wm, &zones[1])).map(|(a, b)| a + b).collect();
    assert_eq!(out[0].1.to_vec(), zones[0]);
    for k in 0..d {
        assert!((out[1].1[k] - corp[k]).abs() < 1e-12);
        assert!((out[2].1[k] - vault[k]).abs() < 1e-12);
    }
}

#[test]
fn rk4_global_error_has_fourth_order_convergence() {
    let (a, w) = (0.5, 3.0);
    let dynamics = LinearDynamics(ndarray::array![[-a, -w], [w, -a]]);
    let h0 = [1.0, 0.5];
    let horizon = 1.0;
    let exact = damped_rotation_exp(a, w, horizon);
    let exact = [exact[0][0] * h0[0] + exact[0][1] * h0[1], exact[1][0] * h0[0] + exact[1][1] * h0[1]];

    let mut errors = Vec::new();
    for dt in [0.1, 0.05, 0.025] {
        let mut rk = Rk4::new();
        let steps = (horizon / dt as f64).round() as usize;
        let mut h = Array1::from(h0.to_vec());
        for _ in 0..steps {
            h = rk.drift(h.view(), dt, &dynamics).unwrap();
        }
        assert_eq!(rk.nfe(), 4 * steps as u64);
        errors.push(((h[0] - exact[0]).powi(2) + (h[1] - exact[1]).powi(2)).sqrt());
    }
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 4.0).abs() <= 0.3, "observed order {order}");
    }
}

#[test]
fn gated_update_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut params = GateParams::random(6, &mut rng);
    params.norm.beta = Array1::from_shape_fn(6, |_| rng.random_range(-0.3..0.3));
    let x = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
    let h = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
    let out = gated_update(x.view(), h.view(), &params).unwrap();
    let expected = gated(
        &x.to_vec(),
        &h.to_vec(),
        &to_mat(&params.w_gate),
        &to_mat(&params.w_cand),
        &params.norm.gamma.to_vec(),
        &params.norm.beta.to_vec(),
    );
    for i in 0..6 {
        assert!((out[i] - expected[i]).abs() < 1e-6);
    }
}

#[test]
fn gae_matches_double_sum_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..300 {
        let t = rng.random_range(1..=64);
        let beta = [0.0, 0.05, 0.5][case % 3];
        let lambda = [0.0, 0.95, 1.0][(case / 3) % 3];
        let r: Vec<f64> = (0..t).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..=t).map(|_| rng.random_range(-5.0..5.0)).collect();
        let dt: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..=1.0)).collect();
        let done: Vec<bool> = (0..t).map(|_| rng.random_bool(0.05)).collect();
        let mut inputs = GaeInputs::new(r.clone(), v.clone(), dt.clone(), done.clone());
        inputs.beta = beta;
        inputs.lambda = lambda;
        let adv = continuous_gae(&inputs).unwrap();
        let expected = gae_double_sum(&r, &v, &dt, &done, beta, lambda);
        for (a, e) in adv.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn gae_discount_weakly_shrinks_with_longer_sojourn(
        v in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        dt_short in 0.0f64..0.5,
        extra in 0.0f64..0.5,
        beta in 0.01f64..1.0,
    ) {
        let run = |dt: f64| {
            let mut inputs = GaeInputs::new(vec![0.0], vec![v, v], vec![dt], vec![false]);
            inputs.beta = beta;
            continuous_gae(&inputs).unwrap()[0]
        };
        // Â = (e^{-βΔt} - 1)·V, whose magnitude grows as the discount shrinks
        let (short, long) = (run(dt_short), run(dt_short + extra));
        prop_assert!((-beta * (dt_short + extra)).exp() <= (-beta * dt_short).exp());
        prop_assert!((long - (((-beta * (dt_short + extra)).exp() - 1.0) * v)).abs() < 1e-12);
        prop_assert!((short - (((-beta * dt_short).exp() - 1.0) * v)).abs() < 1e-12);
    }

    #[test]
    fn improving_advantages_lowers_clip_loss(
        adv in proptest::collection::vec(-5.0f64..5.0, 1..20),
        bump in 0.01f64..3.0,
        idx in 0usize..20,
    ) {
        let n = adv.len();
        let zeros = vec![0.0; n];
        let base = ppo_clip_loss(&vec![1.0; n], &adv, &zeros, &zeros, &zeros, 0.2).unwrap();
        let mut better = adv.clone();
        better[idx % n] += bump;
        let improved = ppo_clip_loss(&vec![1.0; n], &better, &zeros, &zeros, &zeros, 0.2).unwrap();
        prop_assert!(improved.clip < base.clip);
    }
}

#[test]
fn ppo_matches_elementwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let n = rng.random_range(1..50);
        let gen = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let (ratios, adv, values, returns, ent) = (
            gen(&mut rng, 0.3, 2.0),
            gen(&mut rng, -3.0, 3.0),
            gen(&mut rng, -3.0, 3.0),
            gen(&mut rng, -3.0, 3.0),
            gen(&mut rng, 0.0, 5.0),
        );
        let loss = ppo_clip_loss(&ratios, &adv, &values, &returns, &ent, 0.2).unwrap();
        let mut clip = 0.0;
        let mut mse = 0.0;
        let mut s = 0.0;
        for i in 0..n {
            let clipped = if ratios[i] < 0.8 { 0.8 } else if ratios[i] > 1.2 { 1.2 } else { ratios[i] };
            let a = ratios[i] * adv[i];
            let b = clipped * adv[i];
            clip -= if a < b { a } else { b };
            mse += (values[i] - returns[i]).powi(2);
            s += ent[i];
        }
        let nf = n as f64;
        assert!((loss.clip - clip / nf).abs() < 1e-7);
        assert!((loss.value - mse / nf).abs() < 1e-7);
        assert!((loss.combined - (clip / nf + 0.5 * mse / nf - 0.01 * s / nf)).abs() < 1e-7);
    }
}

fn forward_fixture(seed: u64) -> (PolicyParams, Array2<f64>, Array2<f64>, Vec<usize>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = PolicyParams::random(8, 2, &mut rng);
    let n = 6;
    let x = Array2::from_shape_fn((n, 8), |_| rng.random_range(-1.0..1.0));
    let mask = random_mask(n, 0.6, &mut rng);
    let zones = vec![0, 0, 1, 1, 2, 2];
    let h = Array1::from_shape_fn(8, |_| rng.random_range(-1.0..1.0));
    (params, x, mask, zones, h)
}

#[test]
fn forward_equals_component_by_component_trace() {
    let (params, x, mask, zones, h) = forward_fixture(31);
    let inputs = PolicyInputs {
        features: x.view(),
        mask: mask.view(),
        node_zone: &zones,
        num_zones: 3,
        agent_zone: 1,
        dt: 0.3,
        h_prev: h.view(),
    };
    let mut rk = Rk4::new();
    let out = policy_forward(&inputs, &params, &mut rk).unwrap();
    assert_eq!(rk.nfe(), 4);

    let spatial = gat_layer(x.view(), mask.view(), &params.gat).unwrap().features;
    let pooled: Vec<(String, Array1<f64>)> = (0..3)
        .map(|z| {
            let rows: Vec<usize> = (0..6).filter(|&i| zones[i] == z).collect();
            let mut mean = Array1::zeros(8);
            for &i in &rows {
                mean += &spatial.row(i);
            }
            (DEFAULT_ZONE_CHAIN[z].to_string(), mean / rows.len() as f64)
        })
        .collect();
    let routed = topology_message_pass(&pooled, &DEFAULT_ZONE_CHAIN, params.msg.view()).unwrap();
    let drifted = Rk4::new().drift(h.view(), 0.3, &params.ode).unwrap();
    let h_next = gated_update(routed[1].1.view(), drifted.view(), &params.gate).unwrap();
    let logits = params.type_head.forward(h_next.view()).unwrap();
    let value = params.value_head.forward(h_next.view()).unwrap()[0];

    assert_eq!(out.h_next, h_next);
    assert_eq!(out.head.type_logits, logits.to_vec());
    assert_eq!(out.value, value);
}

#[test]
fn forward_is_bit_stable() {
    let (params, x, mask, zones, h) = forward_fixture(44);
    let inputs = PolicyInputs {
        features: x.view(),
        mask: mask.view(),
        node_zone: &zones,
        num_zones: 3,
        agent_zone: 2,
        dt: 0.7,
        h_prev: h.view(),
    };
    let a = policy_forward(&inputs, &params, &mut Rk4::new()).unwrap();
    let b = policy_forward(&inputs, &params, &mut Rk4::new()).unwrap();
    assert_eq!(a.head, b.head);
    assert_eq!(a.h_next, b.h_next);
}

#[test]
fn forward_with_zero_dynamics_and_no_jump_is_pure_gated_fusion() {
    let (mut params, x, mask, zones, h) = forward_fixture(57);
    params.ode = netforge_kernels::MlpDynamics::zeros(8);
    let inputs = PolicyInputs {
        features: x.view(),
        mask: mask.view(),
        node_zone: &zones,
        num_zones: 3,
        agent_zone: 0,
        dt: 0.0,
        h_prev: h.view(),
    };
    let mut rk = Rk4::new();
    let out = policy_forward(&inputs, &params, &mut rk).unwrap();
    assert_eq!(rk.nfe(), 0);
    assert_eq!(out.trace.drifted, h);
    let expected = gated_update(out.trace.observation.view(), h.view(), &params.gate).unwrap();
    assert_eq!(out.h_next, expected);
}
