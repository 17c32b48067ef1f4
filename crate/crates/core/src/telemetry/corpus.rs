use rand::Rng;

use super::{all_templates, synthesize_log, LogDraft, LogRecord, TemplateKey};
use crate::error::{CoreError, Result};
use crate::topology::Topology;

pub const DEFAULT_CORPUS_SIZE: usize = 5_000;

/// Span of simulated time the corpus timestamps are drawn from.
const CORPUS_TICKS: f64 = 24.0 * 30.0;

/// Encoder-fitting corpus covering every template at least `size / T` times,
/// where `T` is the template count. Templates are cycled in a fixed order;
/// hosts and times are drawn from `rng`.
pub fn generate_seed_corpus<R: Rng + ?Sized>(topology: &Topology, size: usize, rng: &mut R) -> Result<Vec<LogRecord>> {
    let templates = all_templates();
    let min = 10 * templates.len();
    if size == 0 || size < min {
        return Err(CoreError::Corpus(format!(
            "corpus size {size} is below {min} (10 per template for {} templates)",
            templates.len()
        )));
    }
    Ok((0..size)
        .map(|i| {
            let template = templates[i % templates.len()];
            let draft = LogDraft {
                node: rng.random_range(0..topology.node_count()),
                template,
                detail: match template {
                    TemplateKey::Action(crate::actions::EffectKind::Analyze, _) => {
                        Some(if rng.random_bool(0.5) { "clean" } else { "suspicious" })
                    }
                    _ => None,
                },
            };
            let tick = rng.random::<f64>() * CORPUS_TICKS;
            synthesize_log(&draft, tick, topology, rng)
        })
        .collect())
}
