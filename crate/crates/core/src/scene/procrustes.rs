//! Weighted rigid alignment in the ground plane with known correspondences.

use super::{rotate2, RigidMotion, SceneMatrix};
use crate::error::{Error, Result};

/// 1 for columns present in both scenes, 0 otherwise.
pub fn existence_weights(target: &SceneMatrix, source: &SceneMatrix) -> Vec<f64> {
    target
        .columns
        .iter()
        .zip(&source.columns)
        .map(|(a, b)| if a.exists() && b.exists() { 1.0 } else { 0.0 })
        .collect()
}

struct Moments {
    total: f64,
    p_mean: [f64; 2],
    q_mean: [f64; 2],
    dz: f64,
}

fn moments(target: &SceneMatrix, source: &SceneMatrix, weights: &[f64]) -> Result<Moments> {
    target.check_config(source)?;
    if weights.len() != source.columns.len() {
        return Err(crate::error::Error::Shape {
            expected: source.columns.len(),
            actual: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidInput(format!("invalid column weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all alignment weights are zero".into()));
    }
    let mut p_mean = [0.0; 2];
    let mut q_mean = [0.0; 2];
    let mut dz = 0.0;
    for ((p, q), &w) in source.columns.iter().zip(&target.columns).zip(weights) {
        if w == 0.0 {
            continue;
        }
        for a in 0..2 {
            p_mean[a] += w * p.center[a];
            q_mean[a] += w * q.center[a];
        }
        dz += w * (q.center[2] - p.center[2]);
    }
    Ok(Moments {
        total,
        p_mean: p_mean.map(|x| x / total),
        q_mean: q_mean.map(|x| x / total),
        dz: dz / total,
    })
}

/// Motion `T` minimizing
/// `Σ_j w_j (‖R p_j + t − q_j‖² + ‖R u_j − v_j‖² + (z_j + t_z − z'_j)²)`
/// where `p, u, z` come from `source` and `q, v, z'` from `target`.
pub fn solve_procrustes(
    target: &SceneMatrix,
    source: &SceneMatrix,
    weights: &[f64],
) -> Result<RigidMotion> {
    let m = moments(target, source, weights)?;
    let mut dot = 0.0;
    let mut cross = 0.0;
    for ((p, q), &w) in source.columns.iter().zip(&target.columns).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let pc = [p.center[0] - m.p_mean[0], p.center[1] - m.p_mean[1]];
        let qc = [q.center[0] - m.q_mean[0], q.center[1] - m.q_mean[1]];
        dot += w * (pc[0] * qc[0] + pc[1] * qc[1] + p.front[0] * q.front[0] + p.front[1] * q.front[1]);
        cross += w * (pc[0] * qc[1] - pc[1] * qc[0] + p.front[0] * q.front[1] - p.front[1] * q.front[0]);
    }
    let theta = if dot == 0.0 && cross == 0.0 {
        0.0
    } else {
        cross.atan2(dot)
    };
    Ok(with_rotation(&m, theta))
}

/// Best translation for a fixed rotation angle.
pub fn translation_for_rotation(
    target: &SceneMatrix,
    source: &SceneMatrix,
    weights: &[f64],
    theta: f64,
) -> Result<RigidMotion> {
    let m = moments(target, source, weights)?;
    Ok(with_rotation(&m, theta))
}

fn with_rotation(m: &Moments, theta: f64) -> RigidMotion {
    debug_assert!(m.total > 0.0);
    let rp = rotate2(theta, m.p_mean);
    RigidMotion::new(theta, [m.q_mean[0] - rp[0], m.q_mean[1] - rp[1], m.dz])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{apply_motion, CategoryConfig, ObjectColumn};
    use std::sync::Arc;

    fn scene_with(cols: &[([f64; 3], [f64; 2])]) -> SceneMatrix {
        let cfg = Arc::new(CategoryConfig::uniform(&["a"], cols.len(), 0).unwrap());
        let mut s = SceneMatrix::empty(cfg);
        for (c, &(center, front)) in s.columns.iter_mut().zip(cols) {
            *c = ObjectColumn {
                existence: 1.0,
                center,
                front,
                size: [1.0, 1.0, 1.0],
                descriptor: vec![],
            };
        }
        s
    }

    #[test]
    fn identity_alignment() {
        let s = scene_with(&[([1.0, 2.0, 0.0], [1.0, 0.0]), ([-1.0, 0.5, 0.2], [0.0, 1.0])]);
        let w = existence_weights(&s, &s);
        let t = solve_procrustes(&s, &s, &w).unwrap();
        assert!(t.theta.abs() < 1e-12);
        assert!(t.t.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn pure_translation() {
        let src = scene_with(&[([0.5, 0.5, 0.1], [0.0, 1.0])]);
        let tgt = scene_with(&[([1.5, 2.5, 3.1], [0.0, 1.0])]);
        let t = solve_procrustes(&tgt, &src, &[1.0]).unwrap();
        assert!(t.theta.abs() < 1e-12);
        assert!((t.t[0] - 1.0).abs() < 1e-12);
        assert!((t.t[1] - 2.0).abs() < 1e-12);
        assert!((t.t[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_known_motion() {
        let src = scene_with(&[
            ([1.0, 2.0, 0.0], [1.0, 0.0]),
            ([-1.0, 0.5, 0.2], [0.0, 1.0]),
            ([0.3, -0.7, 0.4], [0.6, 0.8]),
        ]);
        let truth = RigidMotion::new(2.1, [0.3, -4.0, 0.25]);
        let tgt = apply_motion(&src, &truth);
        let t = solve_procrustes(&tgt, &src, &[1.0, 1.0, 1.0]).unwrap();
        assert!((t.theta - truth.theta).abs() < 1e-9);
        for i in 0..3 {
            assert!((t.t[i] - truth.t[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let s = scene_with(&[([1.0, 2.0, 0.0], [1.0, 0.0])]);
        assert!(matches!(
            solve_procrustes(&s, &s, &[0.0]),
            Err(Error::Degenerate(_))
        ));
    }
}
