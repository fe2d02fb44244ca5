//! Monte Carlo bookkeeping.

use serde::{Deserialize, Serialize};

/// A binomial proportion estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub sigma: f64,
}

impl McEstimate {
    pub fn from_counts(trials: u64, successes: u64) -> Self {
        assert!(successes <= trials, "successes exceed trials");
        let p_hat = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        let sigma = if trials == 0 {
            0.0
        } else {
            (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
        };
        McEstimate {
            trials,
            successes,
            p_hat,
            sigma,
        }
    }

    /// Is `value` within `k` standard errors of the estimate?
    pub fn within_sigma(&self, value: f64, k: f64) -> bool {
        (self.p_hat - value).abs() <= k * self.sigma + f64::EPSILON
    }
}

/// Build a deterministic RNG for logical stream `stream` of master seed `seed`.
///
/// Distinct streams of the same seed are statistically independent, so
/// reports can hand each estimator its own stream without coupling draws.
pub fn derive_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `trials` Bernoulli trials of `event` and summarize.
pub fn mc_estimate<R: rand::Rng>(
    rng: &mut R,
    trials: u64,
    mut event: impl FnMut(&mut R) -> bool,
) -> McEstimate {
    let mut successes = 0u64;
    for _ in 0..trials {
        if event(rng) {
            successes += 1;
        }
    }
    McEstimate::from_counts(trials, successes)
}
