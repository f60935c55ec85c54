//! Angular synchronization on SO(2).

use std::collections::VecDeque;

use log::debug;
use serde::{Deserialize, Serialize};

use super::graph::SceneGraph;
use crate::error::{Error, Result};
use crate::scene::wrap_angle;

/// Relative rotation measured on an edge: `theta ≈ θ_i − θ_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationMeasurement {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSyncConfig {
    /// Huber threshold in radians.
    pub huber_delta: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
    pub spectral_iters: usize,
    /// After the Huber stage, refit with unit weights on edges whose residual
    /// is within a threshold, for thresholds `huber_delta / 2^l`,
    /// `l = 0..trim_levels`.
    pub trim_levels: usize,
}

impl Default for RotationSyncConfig {
    fn default() -> Self {
        Self {
            huber_delta: 10f64.to_radians(),
            max_sweeps: 50,
            tolerance: 1e-8,
            spectral_iters: 500,
            trim_levels: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSyncResult {
    pub thetas: Vec<f64>,
    pub sweeps: usize,
    pub max_residual: f64,
    pub median_residual: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    fn cis(a: f64) -> Self {
        Self {
            re: a.cos(),
            im: a.sin(),
        }
    }
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    fn scale(self, s: f64) -> Self {
        Self {
            re: self.re * s,
            im: self.im * s,
        }
    }
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
    fn arg(self) -> f64 {
        self.im.atan2(self.re)
    }
}

/// Incident edges per node as `(neighbor, target offset)` where the
/// consistent value is `θ_node = θ_neighbor + offset`.
fn adjacency(n: usize, meas: &[RotationMeasurement]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for m in meas {
        adj[m.i].push((m.j, m.theta));
        adj[m.j].push((m.i, -m.theta));
    }
    adj
}

/// Angles propagated along a breadth-first spanning tree from node 0.
fn tree_init(adj: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let mut theta = vec![0.0; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(a) = queue.pop_front() {
        for &(b, off) in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                theta[b] = wrap_angle(theta[a] - off);
                queue.push_back(b);
            }
        }
    }
    theta
}

/// Phases of the leading eigenvector of the shifted, degree-normalized
/// connection matrix `H[i,j] = e^{iθ_ij}`.
fn spectral_init(adj: &[Vec<(usize, f64)>], iters: usize) -> Vec<f64> {
    let n = adj.len();
    let inv_sqrt_deg: Vec<f64> = adj.iter().map(|a| 1.0 / ((a.len() + 1) as f64).sqrt()).collect();
    let mut x: Vec<C64> = tree_init(adj).into_iter().map(C64::cis).collect();
    for _ in 0..iters {
        let mut y = vec![C64::default(); n];
        for i in 0..n {
            let mut acc = x[i].scale(inv_sqrt_deg[i]);
            for &(j, off) in &adj[i] {
                acc = acc.add(C64::cis(off).mul(x[j]).scale(inv_sqrt_deg[j]));
            }
            y[i] = x[i].add(acc.scale(inv_sqrt_deg[i])).scale(0.5);
        }
        let norm = y.iter().map(|c| c.re * c.re + c.im * c.im).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let y: Vec<C64> = y.into_iter().map(|c| c.scale(1.0 / norm)).collect();
        let diff = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a.re - b.re).powi(2) + (a.im - b.im).powi(2))
            .sum::<f64>()
            .sqrt();
        x = y;
        if diff < 1e-12 {
            break;
        }
    }
    let a0 = x[0].arg();
    x.iter().map(|c| wrap_angle(c.arg() - a0)).collect()
}

fn residuals(thetas: &[f64], meas: &[RotationMeasurement]) -> Vec<f64> {
    meas.iter()
        .map(|m| wrap_angle(m.theta - thetas[m.i] + thetas[m.j]).abs())
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted Gauss–Seidel sweeps `θ_i ← θ_i + Σ w r / Σ w` until the largest
/// update is below tolerance; returns the sweep count.
fn gauss_seidel(
    adj: &[Vec<(usize, f64)>],
    theta: &mut [f64],
    cfg: &RotationSyncConfig,
    weight: impl Fn(f64) -> f64,
) -> usize {
    let mut sweeps = 0;
    for _ in 0..cfg.max_sweeps {
        sweeps += 1;
        let mut max_step: f64 = 0.0;
        for i in 0..adj.len() {
            let (mut num, mut den) = (0.0, 0.0);
            for &(j, off) in &adj[i] {
                let r = wrap_angle(theta[j] + off - theta[i]);
                let w = weight(r);
                num += w * r;
                den += w;
            }
            if den > 0.0 {
                let step = num / den;
                theta[i] = wrap_angle(theta[i] + step);
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < cfg.tolerance {
            break;
        }
    }
    sweeps
}

/// Global angles `θ_i` with `θ_i − θ_j ≈ θ_ij`, gauge-fixed so `θ_0 = 0`.
pub fn rotation_sync(
    graph: &SceneGraph,
    meas: &[RotationMeasurement],
    cfg: &RotationSyncConfig,
) -> Result<RotationSyncResult> {
    let n = graph.num_nodes;
    let comps = super::graph::count_components(n, meas.iter().map(|m| (m.i, m.j)));
    if comps != 1 {
        return Err(Error::Disconnected { components: comps });
    }
    if meas.iter().any(|m| !m.theta.is_finite()) {
        return Err(Error::NonFinite("relative rotation".into()));
    }
    let adj = adjacency(n, meas);
    let mut theta = spectral_init(&adj, cfg.spectral_iters);

    let delta = cfg.huber_delta;
    let mut sweeps = gauss_seidel(&adj, &mut theta, cfg, |r| {
        if r.abs() <= delta {
            1.0
        } else {
            delta / r.abs()
        }
    });
    for level in 0..cfg.trim_levels {
        let delta = cfg.huber_delta / 2f64.powi(level as i32);
        // Inlier set frozen from the previous solution.
        let inlier: Vec<Vec<bool>> = adj
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                nb.iter()
                    .map(|&(j, off)| wrap_angle(theta[j] + off - theta[i]).abs() <= delta)
                    .collect()
            })
            .collect();
        let trimmed: Vec<Vec<(usize, f64)>> = adj
            .iter()
            .zip(&inlier)
            .map(|(nb, keep)| nb.iter().zip(keep).filter(|(_, &k)| k).map(|(e, _)| *e).collect())
            .collect();
        sweeps += gauss_seidel(&trimmed, &mut theta, cfg, |_| 1.0);
    }
    let t0 = theta[0];
    let thetas: Vec<f64> = theta.iter().map(|t| wrap_angle(t - t0)).collect();
    let mut res = residuals(&thetas, meas);
    let max_residual = res.iter().copied().fold(0.0, f64::max);
    let median_residual = median(&mut res);
    debug!("rotation sync: {sweeps} sweeps, median residual {median_residual:.3e}");
    Ok(RotationSyncResult {
        thetas,
        sweeps,
        max_residual,
        median_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_measurements_give_zero_angles() {
        let g = SceneGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| RotationMeasurement { i, j, theta: 0.0 })
            .collect();
        let r = rotation_sync(&g, &meas, &RotationSyncConfig::default()).unwrap();
        assert!(r.thetas.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn consistent_cycle_is_recovered() {
        let truth = [0.0, 1.0, -2.5, 3.0];
        let g = SceneGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| RotationMeasurement {
                i,
                j,
                theta: wrap_angle(truth[i] - truth[j]),
            })
            .collect();
        let r = rotation_sync(&g, &meas, &RotationSyncConfig::default()).unwrap();
        for (a, b) in r.thetas.iter().zip(truth) {
            assert!(wrap_angle(a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_is_an_error() {
        let g = SceneGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| RotationMeasurement { i, j, theta: 0.0 })
            .collect();
        assert!(matches!(
            rotation_sync(&g, &meas, &RotationSyncConfig::default()),
            Err(Error::Disconnected { components: 2 })
        ));
    }
}
