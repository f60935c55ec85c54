//! Synthetic synchronization problems with known ground truth.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::{knn_graph_from_features, SceneGraph};
use super::permutation::PermutationMeasurement;
use super::rotation::RotationMeasurement;
use super::translation::TranslationMeasurement;
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{wrap_angle, RigidMotion};

/// Random k-out graph: every node links to `k` distinct uniformly chosen
/// other nodes, symmetrized; redrawn until connected.
pub fn random_graph(n: usize, k: usize, seed: u64) -> Result<SceneGraph> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidInput(format!("random graph needs n >= 2 and k >= 1, got n={n}, k={k}")));
    }
    let k = k.min(n - 1);
    for attempt in 0.. {
        let mut r = rng::stream(seed, &[0, attempt]);
        let mut edges = Vec::with_capacity(n * k);
        for i in 0..n {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.shuffle(&mut r);
            edges.extend(others[..k].iter().map(|&j| (i, j)));
        }
        let g = SceneGraph::from_edges(n, edges)?;
        if g.num_components() == 1 {
            return Ok(g);
        }
    }
    unreachable!()
}

/// k-NN graph over uniform random points in the unit square; a poorly
/// expanding graph useful for stress tests.
pub fn random_geometric_graph(n: usize, k: usize, seed: u64) -> Result<SceneGraph> {
    let mut r = rng::stream(seed, &[3]);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    knn_graph_from_features(&pts, k)
}

/// Marks `round(fraction · edges)` edges, chosen uniformly.
fn corrupted_mask(edges: usize, fraction: f64, r: &mut impl Rng) -> Vec<bool> {
    let bad = (fraction * edges as f64).round() as usize;
    let mut idx: Vec<usize> = (0..edges).collect();
    idx.shuffle(r);
    let mut mask = vec![false; edges];
    for &e in &idx[..bad.min(edges)] {
        mask[e] = true;
    }
    mask
}

#[derive(Clone, Debug)]
pub struct PoseProblem {
    pub graph: SceneGraph,
    /// Ground truth, gauge-fixed so pose 0 is the identity.
    pub truth: Vec<RigidMotion>,
    pub rotations: Vec<RotationMeasurement>,
    pub translations: Vec<TranslationMeasurement>,
    pub corrupted: Vec<bool>,
}

/// Random poses on a k-NN graph; a `corrupt_fraction` of edges get a uniform
/// random rotation and a uniform random translation in `[−extent, extent]²`.
pub fn pose_problem(n: usize, k: usize, extent: f64, corrupt_fraction: f64, seed: u64) -> Result<PoseProblem> {
    let graph = random_graph(n, k, seed)?;
    let mut r = rng::stream(seed, &[1]);
    let mut truth: Vec<RigidMotion> = (0..n)
        .map(|_| {
            RigidMotion::new(
                r.random_range(-PI..PI),
                [
                    r.random_range(-extent..extent),
                    r.random_range(-extent..extent),
                    r.random_range(-0.1..0.1),
                ],
            )
        })
        .collect();
    let base = truth[0].inverse();
    for t in &mut truth {
        *t = base.compose(t);
    }
    truth[0] = RigidMotion::identity();
    let corrupted = corrupted_mask(graph.edges.len(), corrupt_fraction, &mut r);
    let mut rotations = Vec::new();
    let mut translations = Vec::new();
    for (&(i, j), &bad) in graph.edges.iter().zip(&corrupted) {
        let mut rel = truth[j].inverse().compose(&truth[i]);
        if bad {
            rel = RigidMotion::new(
                r.random_range(-PI..PI),
                [
                    r.random_range(-extent..extent),
                    r.random_range(-extent..extent),
                    rel.t[2],
                ],
            );
        }
        rotations.push(RotationMeasurement { i, j, theta: rel.theta });
        translations.push(TranslationMeasurement { i, j, t: rel.t });
    }
    Ok(PoseProblem {
        graph,
        truth,
        rotations,
        translations,
        corrupted,
    })
}

#[derive(Clone, Debug)]
pub struct PermutationProblem {
    pub graph: SceneGraph,
    /// Ground truth in apply form; scene 0 is the identity.
    pub truth: Vec<Vec<usize>>,
    pub measurements: Vec<PermutationMeasurement>,
    pub corrupted: Vec<bool>,
}

/// Random permutations of `m` slots; corrupted edges carry a uniform random
/// permutation different from the true relative one.
pub fn permutation_problem(n: usize, k: usize, m: usize, corrupt_fraction: f64, seed: u64) -> Result<PermutationProblem> {
    let graph = random_graph(n, k, seed)?;
    let mut r = rng::stream(seed, &[2]);
    let mut truth: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(&mut r);
            p
        })
        .collect();
    truth[0] = (0..m).collect();
    let corrupted = corrupted_mask(graph.edges.len(), corrupt_fraction, &mut r);
    let measurements = graph
        .edges
        .iter()
        .zip(&corrupted)
        .map(|(&(i, j), &bad)| {
            let rel = relative_permutation(&truth[i], &truth[j]);
            let perm = if bad && m > 1 {
                loop {
                    let mut p: Vec<usize> = (0..m).collect();
                    p.shuffle(&mut r);
                    if p != rel {
                        break p;
                    }
                }
            } else {
                rel
            };
            PermutationMeasurement { i, j, perm }
        })
        .collect();
    Ok(PermutationProblem {
        graph,
        truth,
        measurements,
        corrupted,
    })
}

/// `σ_j⁻¹ ∘ σ_i` in apply form.
pub fn relative_permutation(sigma_i: &[usize], sigma_j: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma_j.len()];
    for (a, &b) in sigma_j.iter().enumerate() {
        inv[b] = a;
    }
    inv.iter().map(|&a| sigma_i[a]).collect()
}

/// Largest wrapped angle error after removing the best global offset.
pub fn max_rotation_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let (s, c) = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| wrap_angle(e - t))
        .fold((0.0, 0.0), |(s, c), d| (s + d.sin(), c + d.cos()));
    let offset = s.atan2(c);
    estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| wrap_angle(e - t - offset).abs())
        .fold(0.0, f64::max)
}
