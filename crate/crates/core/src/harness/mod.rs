//! Policies, episode runners and metric aggregation.

pub mod metrics;
pub mod policy;
pub mod runner;

pub use metrics::{median, render_table, tail_fraction, EpisodeMetrics, MetricSummary, StepRecord};
pub use policy::{
    build_policy, BlueThresholdPolicy, CtgmarlPolicy, PassivePolicy, Policy, RandomPolicy, RedChainPolicy, POLICY_NAMES,
};
pub use runner::{
    episode_seeds, load_weights, measure_sps, record_transcript, run_episode, run_episode_with, run_matrix,
    run_matrix_logged, step_record, write_outputs, EpisodeEnv, EpisodeOptions, EpisodeOutcome, MatrixResult, SeedRow,
    SpsReport,
};
