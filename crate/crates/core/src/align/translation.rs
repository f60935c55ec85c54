//! Translation synchronization by truncated least squares.

use log::warn;
use serde::{Deserialize, Serialize};

use super::graph::{count_components, SceneGraph};
use crate::error::{Error, Result};
use crate::scene::rotate2;

/// Relative translation measured on an edge: `t ≈ R(−θ_j)(t_i − t_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationMeasurement {
    pub i: usize,
    pub j: usize,
    pub t: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationSyncConfig {
    pub rounds: usize,
    /// Initial threshold as a multiple of the median residual.
    pub initial_factor: f64,
    pub floor: f64,
}

impl Default for TranslationSyncConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            initial_factor: 4.0,
            floor: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationSyncResult {
    pub translations: Vec<[f64; 3]>,
    pub inlier_edges: usize,
    pub rounds: usize,
    /// True if truncation stopped early because it would disconnect the graph.
    pub fell_back: bool,
}

/// Edge target `c_e = t_i − t_j` in the common frame.
fn edge_targets(meas: &[TranslationMeasurement], thetas: &[f64]) -> Vec<[f64; 3]> {
    meas.iter()
        .map(|m| {
            let xy = rotate2(thetas[m.j], [m.t[0], m.t[1]]);
            [xy[0], xy[1], m.t[2]]
        })
        .collect()
}

fn edge_residuals(t: &[[f64; 3]], meas: &[TranslationMeasurement], targets: &[[f64; 3]]) -> Vec<f64> {
    meas.iter()
        .zip(targets)
        .map(|(m, c)| {
            (0..3)
                .map(|a| (t[m.i][a] - t[m.j][a] - c[a]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Weighted least squares with `t_0 = 0`, by conjugate gradients on the
/// grounded graph Laplacian, one solve per coordinate.
fn solve_weighted(
    n: usize,
    meas: &[TranslationMeasurement],
    targets: &[[f64; 3]],
    weights: &[f64],
) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; n];
    for axis in 0..3 {
        let mut b = vec![0.0; n];
        for ((m, c), &w) in meas.iter().zip(targets).zip(weights) {
            b[m.i] += w * c[axis];
            b[m.j] -= w * c[axis];
        }
        b[0] = 0.0;
        let x = conjugate_gradient(n, meas, weights, &b);
        for (o, v) in out.iter_mut().zip(x) {
            o[axis] = v;
        }
    }
    out
}

fn laplacian_apply(meas: &[TranslationMeasurement], weights: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (m, &w) in meas.iter().zip(weights) {
        let d = w * (x[m.i] - x[m.j]);
        y[m.i] += d;
        y[m.j] -= d;
    }
    // Grounding: row and column 0 act as the identity on a zero entry.
    y[0] = x[0];
}

fn conjugate_gradient(n: usize, meas: &[TranslationMeasurement], weights: &[f64], b: &[f64]) -> Vec<f64> {
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let b_norm = rr.sqrt();
    if b_norm == 0.0 {
        return x;
    }
    for _ in 0..(20 * n + 100) {
        laplacian_apply(meas, weights, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= 1e-15 * b_norm {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Global translations `t_i`, gauge-fixed so `t_0 = 0`.
pub fn translation_sync(
    graph: &SceneGraph,
    meas: &[TranslationMeasurement],
    thetas: &[f64],
    cfg: &TranslationSyncConfig,
) -> Result<TranslationSyncResult> {
    let n = graph.num_nodes;
    if thetas.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: thetas.len(),
        });
    }
    let comps = count_components(n, meas.iter().map(|m| (m.i, m.j)));
    if comps != 1 {
        return Err(Error::Disconnected { components: comps });
    }
    if meas.iter().any(|m| m.t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("relative translation".into()));
    }
    let targets = edge_targets(meas, thetas);
    let mut weights = vec![1.0; meas.len()];
    let mut t = solve_weighted(n, meas, &targets, &weights);

    let mut res = edge_residuals(&t, meas, &targets);
    let mut sorted = res.clone();
    sorted.sort_by(f64::total_cmp);
    let med = if sorted.is_empty() { 0.0 } else { sorted[sorted.len() / 2] };
    let tau0 = cfg.initial_factor * med;
    let mut rounds = 0;
    let mut fell_back = false;
    for k in 0..cfg.rounds {
        let tau = (tau0 / 2f64.powi(k as i32)).max(cfg.floor);
        let next: Vec<f64> = res.iter().map(|&r| if r <= tau { 1.0 } else { 0.0 }).collect();
        let kept = meas.iter().zip(&next).filter(|(_, &w)| w > 0.0).map(|(m, _)| (m.i, m.j));
        let comps = count_components(n, kept);
        if comps != 1 {
            warn!("translation sync: truncation at tau={tau:.3} disconnects the graph into {comps} parts; keeping previous solution");
            fell_back = true;
            break;
        }
        weights = next;
        t = solve_weighted(n, meas, &targets, &weights);
        res = edge_residuals(&t, meas, &targets);
        rounds += 1;
    }
    Ok(TranslationSyncResult {
        translations: t,
        inlier_edges: weights.iter().filter(|&&w| w > 0.0).count(),
        rounds,
        fell_back,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RigidMotion;

    #[test]
    fn zero_measurements_give_zero_translations() {
        let g = SceneGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| TranslationMeasurement { i, j, t: [0.0; 3] })
            .collect();
        let r = translation_sync(&g, &meas, &[0.0; 3], &TranslationSyncConfig::default()).unwrap();
        assert!(r.translations.iter().all(|t| *t == [0.0; 3]));
    }

    #[test]
    fn consistent_poses_are_recovered() {
        let poses = [
            RigidMotion::identity(),
            RigidMotion::new(0.7, [1.0, -2.0, 0.1]),
            RigidMotion::new(-2.0, [3.0, 0.5, -0.3]),
            RigidMotion::new(2.9, [-1.5, 2.5, 0.0]),
        ];
        let g = SceneGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| TranslationMeasurement {
                i,
                j,
                t: poses[j].inverse().compose(&poses[i]).t,
            })
            .collect();
        let thetas: Vec<f64> = poses.iter().map(|p| p.theta).collect();
        let r = translation_sync(&g, &meas, &thetas, &TranslationSyncConfig::default()).unwrap();
        for (a, p) in r.translations.iter().zip(&poses) {
            for k in 0..3 {
                assert!((a[k] - p.t[k]).abs() < 1e-12);
            }
        }
    }
}
