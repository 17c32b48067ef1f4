use rand::Rng;

/// Factorized action head: independent categoricals over action types and
/// target slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDiscreteHead {
    pub type_logits: Vec<f64>,
    pub target_logits: Vec<f64>,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits).iter().map(|lp| -lp.exp() * lp).sum()
}

fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

fn sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let log_probs = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    logits.len() - 1
}

impl MultiDiscreteHead {
    /// Joint log-probability of `(type, target)`.
    pub fn log_prob(&self, action: [usize; 2]) -> f64 {
        log_softmax(&self.type_logits)[action[0]] + log_softmax(&self.target_logits)[action[1]]
    }

    /// Joint entropy; factors are independent so entropies add.
    pub fn entropy(&self) -> f64 {
        entropy(&self.type_logits) + entropy(&self.target_logits)
    }

    pub fn greedy(&self) -> [usize; 2] {
        [argmax(&self.type_logits), argmax(&self.target_logits)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [usize; 2] {
        [sample(&self.type_logits, rng), sample(&self.target_logits, rng)]
    }
}
