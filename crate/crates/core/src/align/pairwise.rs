//! Robust pairwise scene matching by iteratively reweighted alternation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene::{
    apply_permutation, rotate2, solve_assignment, solve_procrustes, ObjectColumn, PermutationSet,
    RigidMotion, SceneMatrix,
};

/// Maps scene `i` onto scene `j`: `(motion ∘ perms)(M_i) ≈ M_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEdge {
    pub i: usize,
    pub j: usize,
    pub motion: RigidMotion,
    pub perms: PermutationSet,
    /// Smoothed column-norm objective at the solution.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConfig {
    pub rounds: usize,
    pub alternations: usize,
    pub epsilon: f64,
    pub starts: usize,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        Self {
            rounds: 4,
            alternations: 4,
            epsilon: 1e-3,
            starts: 8,
        }
    }
}

/// Squared column residual `‖q − T p‖²` used by the matching objective.
///
/// Columns absent on both sides match at zero cost. If exactly one side is
/// present only the motion-independent rows (existence, size, descriptor)
/// are compared, so that weighted Procrustes over jointly present columns is
/// the exact motion update.
pub fn column_residual_sq(q: &ObjectColumn, p: &ObjectColumn, motion: &RigidMotion) -> f64 {
    match (q.exists(), p.exists()) {
        (false, false) => 0.0,
        (true, true) => {
            let c = motion.apply_point(p.center);
            let f = motion.apply_direction(p.front);
            static_residual_sq(q, p)
                + (0..3).map(|a| (q.center[a] - c[a]).powi(2)).sum::<f64>()
                + (0..2).map(|a| (q.front[a] - f[a]).powi(2)).sum::<f64>()
        }
        _ => static_residual_sq(q, p),
    }
}

fn static_residual_sq(q: &ObjectColumn, p: &ObjectColumn) -> f64 {
    (q.existence - p.existence).powi(2)
        + (0..3).map(|a| (q.size[a] - p.size[a]).powi(2)).sum::<f64>()
        + q.descriptor
            .iter()
            .zip(&p.descriptor)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
}

/// Per-slot squared residuals of `target` against `(motion ∘ perms)(source)`.
pub fn slot_residuals_sq(
    target: &SceneMatrix,
    source: &SceneMatrix,
    motion: &RigidMotion,
    perms: &PermutationSet,
) -> Vec<f64> {
    let config = &target.config;
    let mut out = vec![0.0; config.num_objects()];
    for (k, p) in perms.perms.iter().enumerate() {
        let start = config.block_range(k).start;
        for (a, &b) in p.iter().enumerate() {
            out[start + a] =
                column_residual_sq(&target.columns[start + a], &source.columns[start + b], motion);
        }
    }
    out
}

/// Weighted matching objective `Σ_a w_a r_a²`.
pub fn weighted_objective(
    target: &SceneMatrix,
    source: &SceneMatrix,
    motion: &RigidMotion,
    perms: &PermutationSet,
    weights: &[f64],
) -> f64 {
    slot_residuals_sq(target, source, motion, perms)
        .iter()
        .zip(weights)
        .map(|(r, w)| w * r)
        .sum()
}

pub fn robust_objective(residuals_sq: &[f64], epsilon: f64) -> f64 {
    residuals_sq.iter().map(|r| (epsilon * epsilon + r).sqrt()).sum()
}

fn active_categories(a: &SceneMatrix, b: &SceneMatrix) -> Vec<bool> {
    (0..a.config.num_categories())
        .map(|k| {
            let r = a.config.block_range(k);
            a.columns[r.clone()].iter().chain(&b.columns[r]).any(ObjectColumn::exists)
        })
        .collect()
}

fn centroid(scene: &SceneMatrix) -> Option<[f64; 3]> {
    let mut c = [0.0; 3];
    let mut n = 0.0;
    for col in scene.columns.iter().filter(|c| c.exists()) {
        for a in 0..3 {
            c[a] += col.center[a];
        }
        n += 1.0;
    }
    (n > 0.0).then(|| c.map(|x| x / n))
}

/// Start for a given rotation: translation matching the centroids of present
/// objects.
pub fn initial_motion(target: &SceneMatrix, source: &SceneMatrix, theta: f64) -> RigidMotion {
    match (centroid(target), centroid(source)) {
        (Some(q), Some(p)) => {
            let rp = rotate2(theta, [p[0], p[1]]);
            RigidMotion::new(theta, [q[0] - rp[0], q[1] - rp[1], q[2] - p[2]])
        }
        _ => RigidMotion::new(theta, [0.0; 3]),
    }
}

/// Per-category weighted assignment of source slots to target slots.
fn assign(
    target: &SceneMatrix,
    source: &SceneMatrix,
    motion: &RigidMotion,
    weights: &[f64],
    active: &[bool],
) -> Result<PermutationSet> {
    let config = &target.config;
    let mut perms = PermutationSet::identity(config);
    for (k, perm) in perms.perms.iter_mut().enumerate() {
        if !active[k] {
            continue;
        }
        let range = config.block_range(k);
        let cost: Vec<Vec<f64>> = range
            .clone()
            .map(|a| {
                range
                    .clone()
                    .map(|b| {
                        weights[a] * column_residual_sq(&target.columns[a], &source.columns[b], motion)
                    })
                    .collect()
            })
            .collect();
        *perm = solve_assignment(&cost)?.perm;
    }
    Ok(perms)
}

/// Weighted Procrustes over slots present in both scenes; `None` if there
/// are none.
fn fit_motion(
    target: &SceneMatrix,
    permuted: &SceneMatrix,
    weights: &[f64],
) -> Result<Option<RigidMotion>> {
    let w: Vec<f64> = target
        .columns
        .iter()
        .zip(&permuted.columns)
        .zip(weights)
        .map(|((q, p), &w)| if q.exists() && p.exists() { w } else { 0.0 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        return Ok(None);
    }
    solve_procrustes(target, permuted, &w).map(Some)
}

/// Result of one reweighting run.
#[derive(Clone, Debug, PartialEq)]
pub struct IrlsRun {
    pub motion: RigidMotion,
    pub perms: PermutationSet,
    pub residual: f64,
    /// Per round, the weighted objective after every assignment and
    /// Procrustes update (weights fixed within a round).
    pub trace: Vec<Vec<f64>>,
}

/// One reweighting run aligning `source` onto `target` from a fixed initial
/// motion.
pub fn irls_from(
    target: &SceneMatrix,
    source: &SceneMatrix,
    init: RigidMotion,
    cfg: &PairwiseConfig,
) -> Result<IrlsRun> {
    target.check_config(source)?;
    let mut trace = Vec::with_capacity(cfg.rounds);
    let active = active_categories(target, source);
    let n_o = target.config.num_objects();
    let mut weights = vec![1.0; n_o];
    let mut motion = init;
    let mut perms = PermutationSet::identity(&target.config);
    for _ in 0..cfg.rounds {
        let mut round_trace = Vec::new();
        for _ in 0..cfg.alternations {
            let next = assign(target, source, &motion, &weights, &active)?;
            round_trace.push(weighted_objective(target, source, &motion, &next, &weights));
            let permuted = apply_permutation(source, &next)?;
            let fitted = fit_motion(target, &permuted, &weights)?;
            let stalled = next == perms && fitted.map_or(true, |m| m == motion);
            perms = next;
            if let Some(m) = fitted {
                motion = m;
            }
            round_trace.push(weighted_objective(target, source, &motion, &perms, &weights));
            if stalled {
                break;
            }
        }
        trace.push(round_trace);
        let r2 = slot_residuals_sq(target, source, &motion, &perms);
        let eps2 = cfg.epsilon * cfg.epsilon;
        weights = r2.iter().map(|r| cfg.epsilon / (eps2 + r).sqrt()).collect();
    }
    let residual = robust_objective(&slot_residuals_sq(target, source, &motion, &perms), cfg.epsilon);
    Ok(IrlsRun {
        motion,
        perms,
        residual,
        trace,
    })
}

/// Robust alignment of `mi` onto `mj` from `cfg.starts` initial rotations.
pub fn pairwise_align(mi: &SceneMatrix, mj: &SceneMatrix) -> Result<AlignmentEdge> {
    pairwise_align_with(mi, mj, &PairwiseConfig::default())
}

pub fn pairwise_align_with(mi: &SceneMatrix, mj: &SceneMatrix, cfg: &PairwiseConfig) -> Result<AlignmentEdge> {
    mj.check_config(mi)?;
    let starts = cfg.starts.max(1);
    let mut best: Option<IrlsRun> = None;
    for s in 0..starts {
        let theta = 2.0 * PI * s as f64 / starts as f64;
        let run = irls_from(mj, mi, initial_motion(mj, mi, theta), cfg)?;
        if best.as_ref().map_or(true, |b| run.residual < b.residual) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(AlignmentEdge {
        i: 0,
        j: 1,
        motion: best.motion,
        perms: best.perms,
        residual: best.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{apply_motion, CategoryConfig};
    use std::sync::Arc;

    fn scene() -> SceneMatrix {
        let cfg = Arc::new(CategoryConfig::uniform(&["bed", "stand"], 3, 2).unwrap());
        let mut s = SceneMatrix::empty(cfg);
        let objs = [
            (0, [0.0, 0.0, 0.3], [0.0, 1.0], [2.0, 1.6, 0.6]),
            (3, [1.3, 0.8, 0.25], [0.0, 1.0], [0.4, 0.4, 0.5]),
            (4, [-1.3, 0.8, 0.25], [0.0, 1.0], [0.4, 0.4, 0.5]),
        ];
        for (slot, center, front, size) in objs {
            s.columns[slot] = ObjectColumn {
                existence: 1.0,
                center,
                front,
                size,
                descriptor: vec![0.1 * slot as f64, -0.2],
            };
        }
        s
    }

    #[test]
    fn self_alignment_floor() {
        let s = scene();
        let e = pairwise_align(&s, &s).unwrap();
        assert_eq!(e.motion, RigidMotion::identity());
        assert!(e.perms.is_identity());
        assert!((e.residual - 6.0 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn recovers_known_motion() {
        let s = scene();
        let t = RigidMotion::new(2.1, [0.5, -1.0, 0.0]);
        let perms = PermutationSet {
            perms: vec![vec![2, 0, 1], vec![1, 2, 0]],
        };
        let target = apply_motion(&apply_permutation(&s, &perms).unwrap(), &t);
        let e = pairwise_align(&s, &target).unwrap();
        let back = apply_motion(&apply_permutation(&s, &e.perms).unwrap(), &e.motion);
        assert!(crate::scene::frobenius_sq(&back, &target) < 1e-12);
    }
}
