//! The action taxonomy, MultiDiscrete decoding, validation and effects.

mod effect;
mod registry;
mod validate;

pub use effect::{apply_effect, Effect, Mutation, StateDelta};
pub use registry::{ActionSpec, EffectKind, Registry};
pub use validate::{check_preconditions, validate_action, Approval, Rejection, Rules};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const NUM_ACTION_TYPES: u32 = 32;
pub const NUM_TARGET_SLOTS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentAction {
    pub type_id: u32,
    pub target: u32,
}

impl AgentAction {
    pub fn new(type_id: u32, target: u32) -> Self {
        AgentAction { type_id, target }
    }
}

/// Decodes one point of the MultiDiscrete([32, 100]) space.
///
/// Targets beyond the live node count decode fine here and are turned into
/// no-ops by validation.
pub fn decode_action(pair: [i64; 2]) -> Result<AgentAction> {
    let [a, t] = pair;
    if !(0..NUM_ACTION_TYPES as i64).contains(&a) || !(0..NUM_TARGET_SLOTS as i64).contains(&t) {
        return Err(CoreError::OutOfSpace(a, t));
    }
    Ok(AgentAction::new(a as u32, t as u32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Nullified,
    Aborted,
    Rejected,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Nullified => "nullified",
            Outcome::Aborted => "aborted",
            Outcome::Rejected => "rejected",
        }
    }
}
