//! Categorical distribution utilities, Gumbel noise, and the Gumbel-Softmax
//! relaxation.

use rand::Rng;

use super::tape::{NodeId, Tape};
use super::DiffError;

/// Categorical distribution over logits, with overflow-safe normalization.
#[derive(Debug, Clone)]
pub struct Categorical {
    logits: Vec<f64>,
    log_z: f64,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self, DiffError> {
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(DiffError::NonFiniteLoss);
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        Ok(Self { logits: logits.to_vec(), log_z })
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.logits.iter().map(|l| (l - self.log_z).exp()).collect()
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.logits[index] - self.log_z
    }

    pub fn entropy(&self) -> f64 {
        self.logits
            .iter()
            .map(|l| {
                let lp = l - self.log_z;
                let p = lp.exp();
                if p > 0.0 {
                    -p * lp
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Inverse-CDF sampling.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut cdf = 0.0;
        for (i, l) in self.logits.iter().enumerate() {
            cdf += (l - self.log_z).exp();
            if u < cdf {
                return i;
            }
        }
        self.logits.len() - 1
    }
}

/// One Gumbel(0, 1) draw via -ln(-ln U).
pub fn gumbel_noise(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            // Guard against ln(0) on the open interval edge.
            -(-(u.max(1e-300)).ln()).ln()
        })
        .collect()
}

/// Gumbel-Softmax relaxation on the tape: softmax((logits + noise) / tau).
/// With `hard`, the forward value is the exact one-hot of the relaxed argmax
/// while gradients follow the relaxation (straight-through).
pub fn gumbel_softmax(
    tape: &mut Tape,
    logits: NodeId,
    temperature: f64,
    noise: &[f64],
    hard: bool,
) -> Result<NodeId, DiffError> {
    if !(temperature > 0.0) {
        return Err(DiffError::BadTemperature(temperature));
    }
    if tape.value(logits).len() != noise.len() {
        return Err(DiffError::ShapeMismatch {
            context: "gumbel_softmax".into(),
            expected: tape.value(logits).len(),
            got: noise.len(),
        });
    }
    let noise_node = tape.constant(noise.to_vec());
    let noisy = tape.add(logits, noise_node);
    let scaled = tape.scale(noisy, 1.0 / temperature);
    let soft = tape.softmax(scaled);
    Ok(if hard { tape.st_hard_one_hot(soft) } else { soft })
}
