//! Episode metrics and their robust aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::reward::{BlueReward, RedReward};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub episode: usize,
    pub episode_seed: u64,
    pub blue_policy: String,
    pub red_policy: String,
    pub steps: u64,
    pub sim_ticks: f64,
    pub blue_reward: f64,
    pub red_reward: f64,
    pub services_restored: u64,
    pub cleanup_completions: u64,
    pub false_positive_cleanups: u64,
    pub successful_exploits: u64,
    pub dropped_blue_actions: u64,
    pub rejected_actions: u64,
    pub nullified: u64,
    pub aborted: u64,
    pub honeytoken_trips: u64,
    pub compromised_final: usize,
    pub isolated_final: usize,
    pub clipped_fraction: f64,
    pub max_active_blue: usize,
    pub wall_seconds: f64,
    pub sps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seed: u64,
    pub episode: usize,
    pub step: u64,
    pub tick: f64,
    pub dt_norm: f64,
    pub blue: BlueReward,
    pub red: RedReward,
    pub completed: usize,
    pub nullified: usize,
    pub aborted: usize,
    pub logs: usize,
    pub enqueued: usize,
    pub rejected: usize,
    pub dropped_blue: usize,
}

/// Medians of the headline metrics. Wall-clock throughput is kept apart so
/// summaries of identical seeds compare equal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub episodes: usize,
    pub blue_reward: f64,
    pub red_reward: f64,
    pub services_restored: f64,
    pub successful_exploits: f64,
    pub dropped_blue_actions: f64,
    pub clipped_fraction: f64,
    pub steps: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// The trailing 20% of a run, at least one episode.
pub fn tail_fraction<T>(items: &[T]) -> &[T] {
    let keep = ((items.len() as f64 * 0.2).ceil() as usize).clamp(1.min(items.len()), items.len());
    &items[items.len() - keep..]
}

impl MetricSummary {
    /// Medians over the trailing 20% of `episodes`.
    pub fn from_episodes(episodes: &[EpisodeMetrics]) -> Self {
        let tail = tail_fraction(episodes);
        let col = |f: fn(&EpisodeMetrics) -> f64| median(&tail.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            episodes: tail.len(),
            blue_reward: col(|m| m.blue_reward),
            red_reward: col(|m| m.red_reward),
            services_restored: col(|m| m.services_restored as f64),
            successful_exploits: col(|m| m.successful_exploits as f64),
            dropped_blue_actions: col(|m| m.dropped_blue_actions as f64),
            clipped_fraction: col(|m| m.clipped_fraction),
            steps: col(|m| m.steps as f64),
        }
    }

    /// Median of per-seed summaries.
    pub fn across(rows: &[MetricSummary]) -> Self {
        let col = |f: fn(&MetricSummary) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            episodes: rows.iter().map(|r| r.episodes).sum(),
            blue_reward: col(|m| m.blue_reward),
            red_reward: col(|m| m.red_reward),
            services_restored: col(|m| m.services_restored),
            successful_exploits: col(|m| m.successful_exploits),
            dropped_blue_actions: col(|m| m.dropped_blue_actions),
            clipped_fraction: col(|m| m.clipped_fraction),
            steps: col(|m| m.steps),
        }
    }
}

const COLUMNS: [&str; 7] = ["blue_reward", "red_reward", "restored", "exploits", "dropped", "clipped", "steps"];

/// Fixed-width text table, one row per label.
pub fn render_table(rows: &[(String, Option<&MetricSummary>)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<14}", "seed");
    for c in COLUMNS {
        let _ = write!(out, "{c:>13}");
    }
    out.push('\n');
    for (label, row) in rows {
        let _ = write!(out, "{label:<14}");
        match row {
            Some(m) => {
                for v in [
                    m.blue_reward,
                    m.red_reward,
                    m.services_restored,
                    m.successful_exploits,
                    m.dropped_blue_actions,
                    m.clipped_fraction,
                    m.steps,
                ] {
                    let _ = write!(out, "{v:>13.3}");
                }
            }
            None => {
                let _ = write!(out, "{:>13}", "failed");
            }
        }
        out.push('\n');
    }
    out
}
