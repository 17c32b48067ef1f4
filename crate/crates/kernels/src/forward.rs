//! The composed spatial-temporal policy cell.
//!
//! `gat_layer → zone pooling → topology_message_pass → RK4 drift → gated
//! update → linear heads`. The agent's own zone summary, after one hop of
//! inward message passing, is the new observation fused into the
//! recurrent state.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{check_len, check_shape, KernelError, Result};
use crate::gat::{gat_layer, GatParams};
use crate::gate::{gated_update, GateParams};
use crate::head::MultiDiscreteHead;
use crate::linear::Linear;
use crate::message::message_pass_chain;
use crate::ode::{MlpDynamics, Rk4};
use crate::{HIDDEN_DIM, NUM_ACTION_TYPES, NUM_HEADS, NUM_TARGET_SLOTS};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub gat: GatParams,
    /// Inward zone message weight, (hidden × hidden).
    pub msg: Array2<f64>,
    pub ode: MlpDynamics,
    pub gate: GateParams,
    pub type_head: Linear,
    pub target_head: Linear,
    pub value_head: Linear,
}

impl PolicyParams {
    /// Every tensor zero, LayerNorm scales included.
    pub fn zeros(hidden: usize, num_heads: usize) -> Self {
        let mut gat = GatParams::zeros(hidden, num_heads);
        gat.norm.gamma.fill(0.0);
        Self {
            gat,
            msg: Array2::zeros((hidden, hidden)),
            ode: MlpDynamics::zeros(hidden),
            gate: GateParams::zeros(hidden),
            type_head: Linear::zeros(hidden, NUM_ACTION_TYPES),
            target_head: Linear::zeros(hidden, NUM_TARGET_SLOTS),
            value_head: Linear::zeros(hidden, 1),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, num_heads: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            gat: GatParams::random(hidden, num_heads, rng),
            msg: Array2::from_shape_fn((hidden, hidden), |_| rng.random_range(-bound..=bound)),
            ode: MlpDynamics::random(hidden, rng),
            gate: GateParams::random(hidden, rng),
            type_head: Linear::random(hidden, NUM_ACTION_TYPES, rng),
            target_head: Linear::random(hidden, NUM_TARGET_SLOTS, rng),
            value_head: Linear::random(hidden, 1, rng),
        }
    }

    pub fn default_zeros() -> Self {
        Self::zeros(HIDDEN_DIM, NUM_HEADS)
    }

    pub fn hidden(&self) -> usize {
        self.gat.hidden()
    }
}

/// Inputs of one forward step.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInputs<'a> {
    /// Per-node observation embeddings, (nodes × hidden).
    pub features: ArrayView2<'a, f64>,
    /// Attention mask, (nodes × nodes), 0 or [`MASK_BLOCKED`](crate::MASK_BLOCKED).
    pub mask: ArrayView2<'a, f64>,
    /// Position of each node's zone in the inward chain.
    pub node_zone: &'a [usize],
    /// Length of the zone chain.
    pub num_zones: usize,
    /// Chain position of the acting agent's zone.
    pub agent_zone: usize,
    /// Normalized time jump since the previous step.
    pub dt: f64,
    pub h_prev: ArrayView1<'a, f64>,
}

/// Intermediate values of a forward pass, in evaluation order.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub spatial: Array2<f64>,
    pub zones: Vec<Array1<f64>>,
    pub routed_zones: Vec<Array1<f64>>,
    pub observation: Array1<f64>,
    pub drifted: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub head: MultiDiscreteHead,
    pub h_next: Array1<f64>,
    pub value: f64,
    pub trace: ForwardTrace,
}

/// Mean of the rows of `spatial` grouped by zone; empty zones pool to zero.
pub fn zone_pool(spatial: ArrayView2<f64>, node_zone: &[usize], num_zones: usize) -> Result<Vec<Array1<f64>>> {
    check_len("node zone labels", spatial.nrows(), node_zone.len())?;
    let mut sums = vec![Array1::<f64>::zeros(spatial.ncols()); num_zones];
    let mut counts = vec![0usize; num_zones];
    for (row, &z) in spatial.rows().into_iter().zip(node_zone) {
        if z >= num_zones {
            return Err(KernelError::UnknownZone(format!("chain position {z}")));
        }
        sums[z] += &row;
        counts[z] += 1;
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            *sum /= count as f64;
        }
    }
    Ok(sums)
}

pub fn policy_forward(inputs: &PolicyInputs<'_>, params: &PolicyParams, rk4: &mut Rk4) -> Result<ForwardOutput> {
    let hidden = params.hidden();
    check_len("previous hidden state", hidden, inputs.h_prev.len())?;
    check_shape("message weight", (hidden, hidden), params.msg.dim())?;
    if inputs.agent_zone >= inputs.num_zones {
        return Err(KernelError::UnknownZone(format!("chain position {}", inputs.agent_zone)));
    }

    let spatial = gat_layer(inputs.features, inputs.mask, &params.gat)?.features;
    let zones = zone_pool(spatial.view(), inputs.node_zone, inputs.num_zones)?;
    let routed_zones = message_pass_chain(&zones, params.msg.view());
    let observation = routed_zones[inputs.agent_zone].clone();
    let drifted = rk4.drift(inputs.h_prev, inputs.dt, &params.ode)?;
    let h_next = gated_update(observation.view(), drifted.view(), &params.gate)?;

    let head = MultiDiscreteHead {
        type_logits: params.type_head.forward(h_next.view())?.to_vec(),
        target_logits: params.target_head.forward(h_next.view())?.to_vec(),
    };
    let value = params.value_head.forward(h_next.view())?[0];

    Ok(ForwardOutput {
        head,
        h_next,
        value,
        trace: ForwardTrace {
            spatial,
            zones,
            routed_zones,
            observation,
            drifted,
        },
    })
}
