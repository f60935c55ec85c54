//! Sampling, interpolation, completion, retrieval and the distribution
//! statistics used to compare generated scenes with a training corpus.

mod complete;
mod stats;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::scene::SceneMatrix;
use crate::trainer::Model;

pub use complete::{complete, CompletionConfig, CompletionMask, CompletionResult};
pub use stats::{
    absolute_heatmap, distribution_distance, pair_stats, AngleHistogram, Heatmap, PairStats, PairStatsSpec,
};

/// `canonicalize(decode(z))`.
pub fn synth(model: &Model, z: &[f64]) -> Result<SceneMatrix> {
    Ok(model.scene(&model.decode(z)?)?.canonicalize())
}

/// Prior draw `i` of a run seeded with `seed`.
pub fn prior_sample(z_dim: usize, seed: u64, i: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[0x5a, i]);
    (0..z_dim).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// `n` scenes decoded from independent prior draws.
pub fn sample_scenes(model: &Model, n: usize, seed: u64) -> Result<Vec<SceneMatrix>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| synth(model, &prior_sample(model.z_dim, seed, i)))
        .collect()
}

/// Latent codes `(1 − t_k) z_a + t_k z_b` with `t_k = k / (steps − 1)`.
pub fn interpolation_codes(za: &[f64], zb: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps < 2 {
        return Err(Error::InvalidInput(format!("interpolation needs at least 2 steps, got {steps}")));
    }
    Ok((0..steps)
        .map(|k| {
            let t = k as f64 / (steps - 1) as f64;
            za.iter().zip(zb).map(|(a, b)| (1.0 - t) * a + t * b).collect()
        })
        .collect())
}

/// Scenes along the straight line between the encoder means of `a` and `b`.
pub fn interpolate(model: &Model, a: &SceneMatrix, b: &SceneMatrix, steps: usize) -> Result<Vec<SceneMatrix>> {
    let za = model.encode_mu(&a.to_flat())?;
    let zb = model.encode_mu(&b.to_flat())?;
    interpolation_codes(&za, &zb, steps)?
        .iter()
        .map(|z| synth(model, z))
        .collect()
}

/// Index of the corpus scene whose encoder mean is closest to that of
/// `scene`; ties go to the lowest index.
pub fn nearest_training(model: &Model, scene: &SceneMatrix, corpus: &[SceneMatrix]) -> Result<usize> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("nearest-neighbor query on an empty corpus".into()));
    }
    let z = model.encode_mu(&scene.to_flat())?;
    let dists = corpus
        .par_iter()
        .map(|s| {
            let c = model.encode_mu(&s.to_flat())?;
            Ok(c.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &d) in dists.iter().enumerate() {
        if d < dists[best] {
            best = i;
        }
    }
    Ok(best)
}
