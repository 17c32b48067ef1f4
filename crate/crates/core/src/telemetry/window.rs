use serde::{Deserialize, Serialize};

use super::EMBED_DIM;

pub const WINDOW_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding128(#[serde(with = "serde_embedding")] pub [f64; EMBED_DIM]);

impl Default for Embedding128 {
    fn default() -> Self {
        Embedding128([0.0; EMBED_DIM])
    }
}

impl Embedding128 {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn dot(&self, other: &Embedding128) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

mod serde_embedding {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::EMBED_DIM;

    pub fn serialize<S: Serializer>(v: &[f64; EMBED_DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; EMBED_DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"128 values"))
    }
}

/// FIFO ring of the last eight embeddings for one zone (or host).
#[derive(Clone, Debug)]
pub struct ObservationWindow {
    slots: [Embedding128; WINDOW_LEN],
    len: usize,
    next: usize,
}

impl Default for ObservationWindow {
    fn default() -> Self {
        ObservationWindow {
            slots: [Embedding128::default(); WINDOW_LEN],
            len: 0,
            next: 0,
        }
    }
}

impl ObservationWindow {
    pub fn push(&mut self, e: Embedding128) {
        self.slots[self.next] = e;
        self.next = (self.next + 1) % WINDOW_LEN;
        self.len = (self.len + 1).min(WINDOW_LEN);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Oldest-first view of the filled slots.
    pub fn entries(&self) -> impl Iterator<Item = &Embedding128> {
        let start = if self.len < WINDOW_LEN { 0 } else { self.next };
        (0..self.len).map(move |k| &self.slots[(start + k) % WINDOW_LEN])
    }

    pub fn latest(&self) -> Option<&Embedding128> {
        (self.len > 0).then(|| &self.slots[(self.next + WINDOW_LEN - 1) % WINDOW_LEN])
    }

    /// Mean over all eight slots; empty slots count as zero vectors.
    pub fn build_observation(&self) -> Embedding128 {
        let mut out = [0.0; EMBED_DIM];
        for e in &self.slots[..] {
            for (o, v) in out.iter_mut().zip(e.0.iter()) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= WINDOW_LEN as f64;
        }
        Embedding128(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(i: usize) -> Embedding128 {
        let mut e = Embedding128::default();
        e.0[i] = 1.0;
        e
    }

    #[test]
    fn empty_window_is_zero() {
        assert!(ObservationWindow::default().build_observation().is_zero());
    }

    #[test]
    fn one_log_divides_by_eight() {
        let mut w = ObservationWindow::default();
        w.push(unit(3));
        assert_eq!(w.build_observation().0[3], 0.125);
    }

    #[test]
    fn eight_copies_give_the_embedding() {
        let mut w = ObservationWindow::default();
        for _ in 0..8 {
            w.push(unit(5));
        }
        assert_eq!(w.build_observation(), unit(5));
    }

    #[test]
    fn eviction_is_fifo() {
        let mut w = ObservationWindow::default();
        for i in 0..10 {
            w.push(unit(i));
        }
        let order: Vec<usize> = w.entries().map(|e| e.0.iter().position(|v| *v == 1.0).unwrap()).collect();
        assert_eq!(order, (2..10).collect::<Vec<_>>());
        assert_eq!(w.latest(), Some(&unit(9)));
    }
}
