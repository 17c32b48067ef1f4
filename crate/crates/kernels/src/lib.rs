//! Forward-only kernels for the continuous-time graph policy cell.
//!
//! The cell fuses per-node telemetry embeddings with masked multi-head graph
//! attention, routes zone summaries inward across the perimeter chain, drifts
//! a recurrent hidden state with a fixed-step RK4 integrator over the
//! normalized time jump, and fuses the drifted state with the new spatial
//! features through a gated update. Advantage estimation with an exponential
//! time discount and PPO clip-loss evaluation live alongside it.
//!
//! Nothing here computes gradients: every function is a pure forward pass.

pub mod error;
pub mod forward;
pub mod gae;
pub mod gat;
pub mod gate;
pub mod head;
pub mod linear;
pub mod message;
pub mod norm;
pub mod ode;
pub mod ppo;
pub mod weights;

pub use error::{KernelError, Result};
pub use forward::{policy_forward, ForwardOutput, ForwardTrace, PolicyInputs, PolicyParams};
pub use gae::{continuous_gae, discounted_returns, GaeInputs};
pub use gat::{gat_layer, GatHead, GatOutput, GatParams};
pub use gate::{gated_update, GateParams};
pub use head::MultiDiscreteHead;
pub use linear::Linear;
pub use message::{topology_message_pass, DEFAULT_ZONE_CHAIN};
pub use norm::LayerNorm;
pub use ode::{Dynamics, LinearDynamics, MlpDynamics, Rk4};
pub use ppo::{ppo_clip_loss, PpoLoss};
pub use weights::{Tensor, WeightsArchive};

/// Width of the latent state and of every node embedding.
pub const HIDDEN_DIM: usize = 128;

/// Number of attention heads in the spatial layer.
pub const NUM_HEADS: usize = 4;

/// Finite stand-in for `-inf` in attention masks.
pub const MASK_BLOCKED: f64 = -1e9;

/// Negative slope of the LeakyReLU applied to attention logits.
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

/// Epsilon used by every LayerNorm in the cell.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Number of action types in the factorized action head.
pub const NUM_ACTION_TYPES: usize = 32;

/// Number of target slots in the factorized action head.
pub const NUM_TARGET_SLOTS: usize = 100;

/// Default decay coefficient of the continuous-time discount.
pub const DEFAULT_BETA: f64 = 0.05;

/// Default GAE smoothing parameter.
pub const DEFAULT_LAMBDA: f64 = 0.95;

/// Default PPO clip ratio.
pub const DEFAULT_CLIP_EPS: f64 = 0.2;
