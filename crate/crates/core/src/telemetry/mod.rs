//! SIEM telemetry: event XML synthesis, benign background noise, the
//! character n-gram LSA encoder and per-zone observation windows.

mod corpus;
mod encoder;
mod green;
mod templates;
mod window;

pub use corpus::{generate_seed_corpus, DEFAULT_CORPUS_SIZE};
pub use encoder::{char_wb_ngrams, Encoded, EncoderModel, WordCache, EMBED_DIM, MAX_VOCAB};
pub use green::{green_arrivals, green_noise, intensity, is_business_hour, GreenKind};
pub use templates::{all_templates, render_xml, synthesize_log, timestamp, LogDraft, TemplateKey};
pub use window::{Embedding128, ObservationWindow, WINDOW_LEN};

use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, Zone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Red,
    Blue,
    Green,
    System,
}

/// One synthesized event. `origin` is evaluation ground truth and never
/// reaches an agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: f64,
    pub node: NodeId,
    pub zone: Zone,
    pub event_id: u32,
    pub xml_text: String,
    pub origin: Origin,
}
