use std::f64::consts::PI;

use super::{
    apply_motion, apply_permutation, column_distance_sq, existence_weights, solve_assignment,
    rotate2, solve_procrustes, PermutationSet, RigidMotion, SceneMatrix,
};
use crate::error::Result;

pub const DEFAULT_RESTARTS: usize = 8;
const MAX_ALTERNATIONS: usize = 100;

/// Squared Frobenius norm of `a − b`.
pub fn frobenius_sq(a: &SceneMatrix, b: &SceneMatrix) -> f64 {
    a.columns
        .iter()
        .zip(&b.columns)
        .map(|(x, y)| column_distance_sq(x, y))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneDistance {
    pub value: f64,
    pub motion: RigidMotion,
    pub perms: PermutationSet,
}

/// Per-category assignment of `source` columns onto `target` slots, given
/// that `motion` is applied to the source.
pub(crate) fn best_permutations(
    target: &SceneMatrix,
    source: &SceneMatrix,
    motion: &RigidMotion,
) -> Result<PermutationSet> {
    let moved = apply_motion(source, motion);
    let config = &target.config;
    let mut perms = Vec::with_capacity(config.num_categories());
    for k in 0..config.num_categories() {
        let range = config.block_range(k);
        let cost: Vec<Vec<f64>> = range
            .clone()
            .map(|a| {
                range
                    .clone()
                    .map(|b| column_distance_sq(&target.columns[a], &moved.columns[b]))
                    .collect()
            })
            .collect();
        perms.push(solve_assignment(&cost)?.perm);
    }
    Ok(PermutationSet { perms })
}

/// Rotation `theta` plus the translation matching the centroids of the
/// present objects of each scene, ignoring slot correspondence.
fn centroid_motion(mbar: &SceneMatrix, m: &SceneMatrix, theta: f64) -> RigidMotion {
    let centroid = |s: &SceneMatrix| {
        let present: Vec<_> = s.columns.iter().filter(|c| c.exists()).collect();
        if present.is_empty() {
            return [0.0; 3];
        }
        let n = present.len() as f64;
        [0, 1, 2].map(|a| present.iter().map(|c| c.center[a]).sum::<f64>() / n)
    };
    let (q, p) = (centroid(mbar), centroid(m));
    let rp = rotate2(theta, [p[0], p[1]]);
    RigidMotion::new(theta, [q[0] - rp[0], q[1] - rp[1], q[2] - p[2]])
}

/// Local minimum of `‖mbar − (T∘S)(m)‖²_F` over motions and slot permutations,
/// by alternating exact assignment and Procrustes steps from `restarts`
/// equally spaced initial rotations.
pub fn scene_distance(
    mbar: &SceneMatrix,
    m: &SceneMatrix,
    restarts: usize,
) -> Result<SceneDistance> {
    mbar.check_config(m)?;
    let identity_perms = PermutationSet::identity(&m.config);
    let mut best = SceneDistance {
        value: frobenius_sq(mbar, m),
        motion: RigidMotion::identity(),
        perms: identity_perms.clone(),
    };

    for r in 0..restarts.max(1) {
        let theta0 = 2.0 * PI * r as f64 / restarts.max(1) as f64;
        let mut motion = centroid_motion(mbar, m, theta0);
        let mut last = f64::INFINITY;
        for _ in 0..MAX_ALTERNATIONS {
            let perms = best_permutations(mbar, m, &motion)?;
            let permuted = apply_permutation(m, &perms)?;
            let value = frobenius_sq(mbar, &apply_motion(&permuted, &motion));
            if value < best.value {
                best = SceneDistance {
                    value,
                    motion,
                    perms: perms.clone(),
                };
            }
            if value >= last - 1e-15 * (1.0 + last) {
                break;
            }
            last = value;
            let w = existence_weights(mbar, &permuted);
            match solve_procrustes(mbar, &permuted, &w) {
                Ok(t) => motion = t,
                Err(_) => break,
            }
            let value = frobenius_sq(mbar, &apply_motion(&permuted, &motion));
            if value < best.value {
                best = SceneDistance {
                    value,
                    motion,
                    perms: perms.clone(),
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CategoryConfig, ObjectColumn};
    use std::sync::Arc;

    #[test]
    fn identical_scenes_have_zero_distance() {
        let cfg = Arc::new(CategoryConfig::uniform(&["a", "b"], 2, 1).unwrap());
        let mut s = SceneMatrix::empty(cfg);
        s.columns[0] = ObjectColumn {
            existence: 1.0,
            center: [1.0, 0.0, 0.2],
            front: [0.0, 1.0],
            size: [1.0, 0.5, 0.4],
            descriptor: vec![0.3],
        };
        s.columns[2] = ObjectColumn {
            existence: 1.0,
            center: [-1.0, 2.0, 0.1],
            front: [1.0, 0.0],
            size: [0.3, 0.5, 0.4],
            descriptor: vec![-0.3],
        };
        let d = scene_distance(&s, &s, DEFAULT_RESTARTS).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.motion, RigidMotion::identity());
        assert!(d.perms.is_identity());
    }
}
