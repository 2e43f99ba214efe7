//! Column bootstrap of distance-based tree estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::tree::Tree;
use crate::treebuild::EstimatorConfig;

/// Multinomial resample of the alignment's columns for one replicate:
/// `total_weight` draws, each column chosen with probability proportional
/// to its current weight. Keyed by `(seed, replicate)`.
pub fn bootstrap_weights(weights: &[u32], seed: u64, replicate: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let pool: Vec<usize> = weights
        .iter()
        .enumerate()
        .flat_map(|(c, &w)| std::iter::repeat_n(c, w as usize))
        .collect();
    let mut out = vec![0u32; weights.len()];
    for _ in 0..pool.len() {
        out[pool[rng.random_range(0..pool.len())]] += 1;
    }
    out
}

/// `replicates` trees, each estimated from a multinomial reweighting of
/// the columns. Replicates run on the rayon pool; output order and values
/// do not depend on its size.
pub fn bootstrap_trees(
    a: &Alignment,
    replicates: usize,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<Vec<Tree>> {
    bootstrap_trees_with(a, replicates, cfg, |r| bootstrap_weights(a.weights(), seed, r))
}

/// As [`bootstrap_trees`] with caller-supplied column weights per
/// replicate.
pub fn bootstrap_trees_with<F>(
    a: &Alignment,
    replicates: usize,
    cfg: &EstimatorConfig,
    draw: F,
) -> Result<Vec<Tree>>
where
    F: Fn(usize) -> Vec<u32> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            a.with_weights(draw(r))
                .and_then(|w| cfg.estimate(&w))
                .map_err(|e| Error::Replicate {
                    replicate: r,
                    source: Box::new(e),
                })
        })
        .collect()
}
