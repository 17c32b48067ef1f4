//! Continuous-time multi-agent cyber-defense simulator.
//!
//! A zero-trust enterprise network is attacked by Red agents and defended
//! by Blue agents whose only view of the network is a stream of synthetic
//! Windows event logs, embedded into 128-dimensional vectors. Actions take
//! stochastic time to complete; the clock jumps straight to the next
//! completion.

pub mod actions;
pub mod bridge;
pub mod engine;
pub mod error;
pub mod harness;
pub mod reward;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod state;
pub mod telemetry;
pub mod topology;

pub use error::{CoreError, Result};
pub use scenario::ScenarioConfig;
pub use sim::Simulator;
