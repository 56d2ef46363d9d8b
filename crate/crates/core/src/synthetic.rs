//! Population-like scored data: scores uniform on [0, 1] and labels drawn
//! as Bernoulli(score), so the scores are calibrated and the expected
//! metric value is unimodal in the threshold with its peak at `a0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, ScoredDataset, ScoredEntry};
use crate::error::{Error, Result};

pub fn smooth_scored_set(n: usize, seed: u64) -> Result<ScoredDataset> {
    if n < 2 {
        return Err(Error::validation("synthetic set needs at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..n)
        .map(|_| {
            let score: f64 = rng.random();
            let label = if rng.random::<f64>() < score {
                Label::Positive
            } else {
                Label::Negative
            };
            ScoredEntry { score, label }
        })
        .collect();
    ScoredDataset::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roughly_balanced_and_calibrated() {
        let s = smooth_scored_set(20_000, 3).unwrap();
        assert!((s.pi() - 0.5).abs() < 0.02, "{}", s.pi());
        let high: Vec<_> = s.entries().iter().filter(|e| e.score > 0.9).collect();
        let rate = high.iter().filter(|e| e.label.is_positive()).count() as f64 / high.len() as f64;
        assert!(rate > 0.9, "{rate}");
    }

    #[test]
    fn deterministic_by_seed() {
        assert_eq!(smooth_scored_set(100, 1).unwrap(), smooth_scored_set(100, 1).unwrap());
        assert_ne!(smooth_scored_set(100, 1).unwrap(), smooth_scored_set(100, 2).unwrap());
    }
}
