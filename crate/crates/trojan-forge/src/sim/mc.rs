//! Monte Carlo estimation of trigger activation probability. Sampling is
//! chunked with per-chunk derived seeds, so the estimate is identical whether
//! chunks run sequentially or on a rayon pool.

use rand::Rng;

use super::eval::brute_force_truth_table;
use super::SimError;
use crate::seed;
use crate::templates::TrojanTemplate;

const CHUNK: u64 = 1 << 16;

fn chunk_hits(table: &[bool], marginals: &[f64], samples: u64, chunk_seed: u64) -> u64 {
    let mut rng = seed::rng(chunk_seed);
    let arity = marginals.len();
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut row = 0usize;
        for p in marginals.iter().take(arity) {
            row = (row << 1) | usize::from(rng.gen::<f64>() < *p);
        }
        if table[row] {
            hits += 1;
        }
    }
    hits
}

/// Samples independent inputs per the marginals and returns the activation
/// fraction with its binomial standard error. Deterministic per seed and
/// independent of worker count.
pub fn estimate_activation_probability(
    template: &TrojanTemplate,
    marginals: &[f64],
    n_samples: u64,
    seed_value: u64,
) -> Result<(f64, f64), SimError> {
    if marginals.len() != template.input_arity() {
        return Err(SimError::ArityMismatch {
            expected: template.input_arity(),
            got: marginals.len(),
        });
    }
    if n_samples == 0 {
        return Err(SimError::BadStimulus("n_samples must be at least 1".into()));
    }
    let table = brute_force_truth_table(template)?;

    let chunk_count = n_samples.div_ceil(CHUNK);
    let jobs: Vec<(u64, u64)> = (0..chunk_count)
        .map(|i| {
            let samples = CHUNK.min(n_samples - i * CHUNK);
            (seed::mix(seed_value, i), samples)
        })
        .collect();

    #[cfg(feature = "parallel")]
    let hits: u64 = {
        use rayon::prelude::*;
        jobs.par_iter().map(|(s, n)| chunk_hits(&table, marginals, *n, *s)).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let hits: u64 = jobs.iter().map(|(s, n)| chunk_hits(&table, marginals, *n, *s)).sum();

    let estimate = hits as f64 / n_samples as f64;
    let stderr = (estimate * (1.0 - estimate) / n_samples as f64).sqrt();
    Ok((estimate, stderr))
}

/// Sequential twin of [`estimate_activation_probability`], kept callable with
/// the parallel feature on so benches can compare the two paths. Produces
/// bit-identical results.
pub fn estimate_activation_probability_sequential(
    template: &TrojanTemplate,
    marginals: &[f64],
    n_samples: u64,
    seed_value: u64,
) -> Result<(f64, f64), SimError> {
    if marginals.len() != template.input_arity() {
        return Err(SimError::ArityMismatch {
            expected: template.input_arity(),
            got: marginals.len(),
        });
    }
    if n_samples == 0 {
        return Err(SimError::BadStimulus("n_samples must be at least 1".into()));
    }
    let table = brute_force_truth_table(template)?;
    let chunk_count = n_samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunk_count)
        .map(|i| {
            let samples = CHUNK.min(n_samples - i * CHUNK);
            chunk_hits(&table, marginals, samples, seed::mix(seed_value, i))
        })
        .sum();
    let estimate = hits as f64 / n_samples as f64;
    let stderr = (estimate * (1.0 - estimate) / n_samples as f64).sqrt();
    Ok((estimate, stderr))
}
