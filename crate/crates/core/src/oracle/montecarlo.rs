use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MIN_TRIALS: u64 = 10_000;

/// Trials per RNG stream.
const CHUNK: u64 = 4096;

/// Two-sided 99% standard normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

/// Monte Carlo estimate of the block decoding failure probability.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub trials: u64,
    pub failures: u64,
    pub estimate: f64,
    /// 99% normal-approximation interval widened by `0.5/trials`, clipped to
    /// `[0, 1]`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl McReport {
    pub fn contains(&self, p: f64) -> bool {
        (self.ci_low..=self.ci_high).contains(&p)
    }
}

/// Simulates `trials` blocks of `D n` symbols each hit independently with
/// probability `beta`. A block fails when more than `(Dn - Dk)/2` symbols
/// are hit.
///
/// Trials are split into chunks of 4096, chunk `i` drawing from ChaCha20
/// seeded with `seed` on stream `i`, so results do not depend on the thread
/// count.
pub fn monte_carlo_error(
    d: u64,
    n: u64,
    k: u64,
    beta: f64,
    trials: u64,
    seed: u64,
) -> Result<McReport> {
    if d == 0 || n == 0 || k > n {
        return Err(Error::domain(format!(
            "need D >= 1 and 0 <= k <= n, got D={d} n={n} k={k}"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!("beta={beta} outside [0, 1]")));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!(
            "{trials} trials; at least {MIN_TRIALS} required"
        )));
    }
    let symbols = d * n;
    let redundancy = d * (n - k);
    let hit = Bernoulli::new(beta).expect("beta checked");
    let chunks = trials.div_ceil(CHUNK);

    let failures: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut failed = 0;
            for _ in 0..count {
                let errors = (0..symbols).filter(|_| hit.sample(&mut rng)).count() as u64;
                if 2 * errors > redundancy {
                    failed += 1;
                }
            }
            failed
        })
        .sum();

    let t = trials as f64;
    let estimate = failures as f64 / t;
    let half = Z99 * (estimate * (1.0 - estimate) / t).sqrt() + 0.5 / t;
    Ok(McReport {
        trials,
        failures,
        estimate,
        ci_low: (estimate - half).max(0.0),
        ci_high: (estimate + half).min(1.0),
        seed,
    })
}
