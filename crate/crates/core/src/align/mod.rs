//! Joint corpus alignment: robust pairwise matching over a k-NN scene graph
//! followed by rotation, translation and permutation synchronization.
//!
//! Frame convention: the global pose `(T_i, S_i)` maps scene `i` into the
//! common frame, and an edge `(i, j)` estimates `T_ij = T_j⁻¹ ∘ T_i` and
//! `S_ij = S_j⁻¹ ∘ S_i`.

mod graph;
mod pairwise;
mod permutation;
mod rotation;
pub mod synthetic;
mod translation;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{apply_motion, apply_permutation, PermutationSet, RigidMotion, SceneMatrix};

pub use graph::{knn_graph, knn_graph_from_features, SceneGraph};
pub use pairwise::{
    column_residual_sq, initial_motion, irls_from, pairwise_align, pairwise_align_with,
    robust_objective, slot_residuals_sq, weighted_objective, AlignmentEdge, IrlsRun, PairwiseConfig,
};
pub use permutation::{
    permutation_sync, PermutationMeasurement, PermutationSyncConfig, PermutationSyncResult,
};
pub use rotation::{rotation_sync, RotationMeasurement, RotationSyncConfig, RotationSyncResult};
pub use translation::{
    translation_sync, TranslationMeasurement, TranslationSyncConfig, TranslationSyncResult,
};

pub const DEFAULT_K: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Neighbors per scene; capped at `N − 1`.
    pub k: usize,
    pub pairwise: PairwiseConfig,
    pub rotation: RotationSyncConfig,
    pub translation: TranslationSyncConfig,
    pub permutation: PermutationSyncConfig,
}

impl AlignConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Per-scene motion and permutations into the common frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPoses {
    pub motions: Vec<RigidMotion>,
    pub perms: Vec<PermutationSet>,
}

impl GlobalPoses {
    pub fn apply(&self, i: usize, scene: &SceneMatrix) -> Result<SceneMatrix> {
        Ok(apply_motion(&apply_permutation(scene, &self.perms[i])?, &self.motions[i]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub i: usize,
    pub j: usize,
    pub residual: f64,
    pub theta: f64,
    pub t: [f64; 3],
    /// Wrapped `θ_ij − θ_i + θ_j` after synchronization.
    pub rotation_error: f64,
    /// `‖t_i − t_j − R_j t_ij‖` after synchronization.
    pub translation_error: f64,
    /// Categories whose edge permutation disagrees with the synchronized one.
    pub permutation_disagreements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategorySyncReport {
    pub category: String,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub num_scenes: usize,
    pub k: usize,
    pub num_edges: usize,
    pub bridges: usize,
    pub rotation_sweeps: usize,
    pub rotation_median_residual: f64,
    pub rotation_max_residual: f64,
    pub translation_inlier_edges: usize,
    pub translation_rounds: usize,
    pub translation_fell_back: bool,
    pub permutation: Vec<CategorySyncReport>,
    pub edges: Vec<EdgeReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutput {
    pub aligned: Vec<SceneMatrix>,
    pub poses: GlobalPoses,
    pub report: AlignmentReport,
}

/// Runs pairwise matching on every edge of `graph`, in parallel, preserving
/// edge order.
pub fn align_edges(scenes: &[SceneMatrix], graph: &SceneGraph, cfg: &PairwiseConfig) -> Result<Vec<AlignmentEdge>> {
    graph
        .edges
        .par_iter()
        .map(|&(i, j)| {
            let mut e = pairwise_align_with(&scenes[i], &scenes[j], cfg)?;
            e.i = i;
            e.j = j;
            Ok(e)
        })
        .collect()
}

/// Synchronizes pairwise estimates into global poses.
pub fn synchronize(
    scenes: &[SceneMatrix],
    graph: &SceneGraph,
    edges: &[AlignmentEdge],
    cfg: &AlignConfig,
) -> Result<(GlobalPoses, AlignmentReport)> {
    let config = &scenes[0].config;
    let rot_meas: Vec<_> = edges
        .iter()
        .map(|e| RotationMeasurement {
            i: e.i,
            j: e.j,
            theta: e.motion.theta,
        })
        .collect();
    let rot = rotation_sync(graph, &rot_meas, &cfg.rotation)?;
    let tr_meas: Vec<_> = edges
        .iter()
        .map(|e| TranslationMeasurement {
            i: e.i,
            j: e.j,
            t: e.motion.t,
        })
        .collect();
    let tr = translation_sync(graph, &tr_meas, &rot.thetas, &cfg.translation)?;

    let n = scenes.len();
    let mut perms = vec![PermutationSet { perms: Vec::new() }; n];
    let mut cat_reports = Vec::new();
    for (k, cat) in config.categories.iter().enumerate() {
        let meas: Vec<_> = edges
            .iter()
            .map(|e| PermutationMeasurement {
                i: e.i,
                j: e.j,
                perm: e.perms.perms[k].clone(),
            })
            .collect();
        let r = permutation_sync(graph, cat.max_multiplicity, &meas, &cfg.permutation).map_err(|err| match err {
            Error::NonConvergence { iterations, residual } => {
                log::error!("permutation sync for `{}` did not converge", cat.name);
                Error::NonConvergence { iterations, residual }
            }
            other => other,
        })?;
        for (p, s) in perms.iter_mut().zip(r.perms) {
            p.perms.push(s);
        }
        cat_reports.push(CategorySyncReport {
            category: cat.name.clone(),
            iterations: r.iterations,
            residual: r.residual,
        });
    }

    let motions: Vec<RigidMotion> = rot
        .thetas
        .iter()
        .zip(&tr.translations)
        .map(|(&theta, &t)| RigidMotion::new(theta, t))
        .collect();
    let edge_reports = edges
        .iter()
        .map(|e| {
            let rel = motions[e.j].inverse().compose(&motions[e.i]);
            let rel_perm = perms[e.j].inverse().compose(&perms[e.i]);
            EdgeReport {
                i: e.i,
                j: e.j,
                residual: e.residual,
                theta: e.motion.theta,
                t: e.motion.t,
                rotation_error: crate::scene::wrap_angle(e.motion.theta - rel.theta).abs(),
                translation_error: (0..3)
                    .map(|a| (rel.t[a] - e.motion.t[a]).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                permutation_disagreements: rel_perm
                    .perms
                    .iter()
                    .zip(&e.perms.perms)
                    .filter(|(a, b)| a != b)
                    .count(),
            }
        })
        .collect();
    let report = AlignmentReport {
        num_scenes: n,
        k: cfg.k,
        num_edges: edges.len(),
        bridges: graph.bridges,
        rotation_sweeps: rot.sweeps,
        rotation_median_residual: rot.median_residual,
        rotation_max_residual: rot.max_residual,
        translation_inlier_edges: tr.inlier_edges,
        translation_rounds: tr.rounds,
        translation_fell_back: tr.fell_back,
        permutation: cat_reports,
        edges: edge_reports,
    };
    Ok((GlobalPoses { motions, perms }, report))
}

/// Aligns a corpus into one common frame with consistent slot orderings.
///
/// Aligned scenes are `(T_i ∘ S_i)(M_i)`, canonicalized.
pub fn align_corpus(scenes: &[SceneMatrix], cfg: &AlignConfig) -> Result<AlignmentOutput> {
    let n = scenes.len();
    let k = if cfg.k == 0 { DEFAULT_K } else { cfg.k }.min(n.saturating_sub(1)).max(1);
    let graph = knn_graph(scenes, k)?;
    info!("alignment graph: {n} scenes, {} edges, {} bridges", graph.edges.len(), graph.bridges);
    let edges = align_edges(scenes, &graph, &cfg.pairwise)?;
    let cfg = AlignConfig { k, ..cfg.clone() };
    let (poses, report) = synchronize(scenes, &graph, &edges, &cfg)?;
    let aligned = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| poses.apply(i, s).map(|m| m.canonicalize()))
        .collect::<Result<Vec<_>>>()?;
    Ok(AlignmentOutput {
        aligned,
        poses,
        report,
    })
}
