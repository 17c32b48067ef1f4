//! Asynchronous event queue with continuous-time advance.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{ActionSpec, AgentAction, EffectKind, Outcome, StateDelta};
use crate::state::{AgentId, Compromise, Team};
use crate::topology::NodeId;

/// Jumps at or beyond this many ticks normalize to 1.
pub const MAX_DURATION: f64 = 50.0;

pub const DEFAULT_BLUE_CAP: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Pending,
    Completed,
    Nullified,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub seq: u64,
    pub actor: AgentId,
    pub action: AgentAction,
    /// Host the action lands on; `None` for network-wide actions.
    pub target: Option<NodeId>,
    /// Foothold a Red action was launched from.
    pub origin: Option<NodeId>,
    pub start_tick: f64,
    pub completion_tick: f64,
    pub energy_committed: f64,
    pub status: EventStatus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeJump {
    pub t_prev: f64,
    pub t_next: f64,
    pub dt_norm: f64,
}

impl TimeJump {
    pub fn new(t_prev: f64, t_next: f64) -> Self {
        TimeJump {
            t_prev,
            t_next,
            dt_norm: normalize_jump(t_next - t_prev),
        }
    }

    pub fn raw(&self) -> f64 {
        self.t_next - self.t_prev
    }

    pub fn clipped(&self) -> bool {
        self.raw() >= MAX_DURATION
    }
}

/// `min(jump / MAX_DURATION, 1)`.
pub fn normalize_jump(jump: f64) -> f64 {
    (jump / MAX_DURATION).min(1.0)
}

/// Base duration scaled by a uniform jitter in `[1 - j, 1 + j]`.
pub fn sample_sojourn<R: Rng + ?Sized>(spec: &ActionSpec, jitter: f64, rng: &mut R) -> f64 {
    if jitter == 0.0 {
        return spec.duration;
    }
    spec.duration * rng.random_range(1.0 - jitter..=1.0 + jitter)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key {
    tick: f64,
    seq: u64,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.tick.total_cmp(&other.tick).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue keyed by `(completion_tick, seq)`. Events are kept in a slab
/// indexed by sequence number; status changes leave stale heap keys behind
/// that are skipped on pop.
#[derive(Clone, Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Key>>,
    events: Vec<ScheduledEvent>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        actor: AgentId,
        action: AgentAction,
        target: Option<NodeId>,
        origin: Option<NodeId>,
        start_tick: f64,
        completion_tick: f64,
        energy: f64,
    ) -> u64 {
        debug_assert!(completion_tick >= start_tick);
        let seq = self.events.len() as u64;
        self.events.push(ScheduledEvent {
            seq,
            actor,
            action,
            target,
            origin,
            start_tick,
            completion_tick,
            energy_committed: energy,
            status: EventStatus::Pending,
        });
        self.heap.push(Reverse(Key {
            tick: completion_tick,
            seq,
        }));
        seq
    }

    pub fn get(&self, seq: u64) -> &ScheduledEvent {
        &self.events[seq as usize]
    }

    pub fn set_status(&mut self, seq: u64, status: EventStatus) {
        self.events[seq as usize].status = status;
    }

    /// Every event ever enqueued, in sequence order.
    pub fn history(&self) -> &[ScheduledEvent] {
        &self.events
    }

    fn drop_stale(&mut self) {
        while let Some(Reverse(k)) = self.heap.peek() {
            if self.events[k.seq as usize].status == EventStatus::Pending {
                break;
            }
            self.heap.pop();
        }
    }

    /// Completion tick of the nearest Pending event.
    pub fn next_completion(&mut self) -> Option<f64> {
        self.drop_stale();
        self.heap.peek().map(|Reverse(k)| k.tick)
    }

    /// Jump to the nearest maturing event; `None` when nothing is Pending.
    pub fn advance_time(&mut self, t_prev: f64) -> Option<TimeJump> {
        self.next_completion().map(|t| TimeJump::new(t_prev, t))
    }

    /// Removes and returns every Pending event maturing exactly at `tick`,
    /// in sequence order.
    pub fn pop_maturing(&mut self, tick: f64) -> Vec<ScheduledEvent> {
        let mut out = Vec::new();
        loop {
            self.drop_stale();
            match self.heap.peek() {
                Some(Reverse(k)) if k.tick == tick => {
                    let seq = k.seq;
                    self.heap.pop();
                    out.push(self.events[seq as usize].clone());
                }
                _ => break,
            }
        }
        out.sort_by_key(|e| e.seq);
        out
    }

    pub fn pending(&self) -> impl Iterator<Item = &ScheduledEvent> {
        self.heap
            .iter()
            .map(|Reverse(k)| &self.events[k.seq as usize])
            .filter(|e| e.status == EventStatus::Pending)
    }

    pub fn active_blue(&self) -> usize {
        self.pending().filter(|e| e.actor.team == Team::Blue).count()
    }

    pub fn has_pending(&self, agent: AgentId) -> bool {
        self.pending().any(|e| e.actor == agent)
    }

    /// Aborts every Pending Red event whose origin or target is `node`.
    /// Committed energy stays spent. Returns the aborted events in sequence
    /// order.
    pub fn preempt(&mut self, node: NodeId) -> Vec<ScheduledEvent> {
        let mut hit: Vec<u64> = self
            .pending()
            .filter(|e| e.actor.team == Team::Red && (e.origin == Some(node) || e.target == Some(node)))
            .map(|e| e.seq)
            .collect();
        hit.sort_unstable();
        hit.into_iter()
            .map(|seq| {
                self.set_status(seq, EventStatus::Aborted);
                self.events[seq as usize].clone()
            })
            .collect()
    }
}

/// A matured event after its verdict, with the target's state just before
/// the effect landed.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletedEvent {
    pub event: ScheduledEvent,
    pub effect: EffectKind,
    pub outcome: Outcome,
    pub delta: StateDelta,
    pub target_before: Option<(Compromise, bool)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdicts {
    /// Indices into the maturing set, Blue first, then Red, each in
    /// sequence order.
    pub applied: Vec<usize>,
    pub nullified: Vec<usize>,
}

/// Blue supremacy over one maturing set: one pass collects the hosts Blue
/// is acting on, a second nullifies Red events that target any of them.
pub fn resolve_conflicts(maturing: &[ScheduledEvent]) -> Verdicts {
    let defended: HashSet<NodeId> = maturing
        .iter()
        .filter(|e| e.actor.team == Team::Blue)
        .filter_map(|e| e.target)
        .collect();
    let mut order: Vec<usize> = (0..maturing.len()).collect();
    order.sort_by_key(|&i| (maturing[i].actor.team != Team::Blue, maturing[i].seq));
    let mut v = Verdicts::default();
    for i in order {
        let e = &maturing[i];
        if e.actor.team == Team::Red && e.target.is_some_and(|t| defended.contains(&t)) {
            v.nullified.push(i);
        } else {
            v.applied.push(i);
        }
    }
    v
}

/// Orders requests by `(agent_id, type_id)` and accepts them while fewer
/// than `cap` Blue events are active. The rest are dropped without error.
pub fn enforce_blue_cap<T>(
    active: usize,
    cap: usize,
    mut requests: Vec<T>,
    key: impl Fn(&T) -> (usize, u32),
) -> (Vec<T>, Vec<T>) {
    requests.sort_by_key(|r| key(r));
    let room = cap.saturating_sub(active).min(requests.len());
    let dropped = requests.split_off(room);
    (requests, dropped)
}
