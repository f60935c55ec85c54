//! Spectral permutation synchronization for one category block.
//!
//! The block matrix `W` with `W[j,i] = X(σ_ij)` on edges and identity blocks
//! on the diagonal is degree-normalized; for consistent measurements its top
//! `m`-dimensional eigenspace has blocks proportional to `X(σ_i)ᵀ`. The
//! eigenspace is found by Chebyshev-filtered block power iteration with
//! Rayleigh–Ritz extraction, seeded from permutations propagated along a
//! spanning tree.

use std::collections::VecDeque;

use log::debug;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{count_components, SceneGraph};
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::solve_assignment;

/// Relative slot permutation on an edge, in apply form:
/// slot `a` of scene `j` corresponds to slot `perm[a]` of scene `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationMeasurement {
    pub i: usize,
    pub j: usize,
    pub perm: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationSyncConfig {
    /// Bound on the eigen-residual `‖W̃v − λv‖` of each leading Ritz vector.
    pub tolerance: f64,
    pub max_iters: usize,
    pub filter_degree: usize,
}

impl Default for PermutationSyncConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iters: 1000,
            filter_degree: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationSyncResult {
    /// Per-scene permutation in apply form; scene 0 is the identity.
    pub perms: Vec<Vec<usize>>,
    pub iterations: usize,
    pub residual: f64,
}

/// `outer ∘ inner` in apply form: apply `inner`, then `outer`.
fn compose(outer: &[usize], inner: &[usize]) -> Vec<usize> {
    outer.iter().map(|&a| inner[a]).collect()
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (a, &b) in p.iter().enumerate() {
        inv[b] = a;
    }
    inv
}

/// Absolute permutations propagated along a breadth-first tree from node 0.
fn tree_init(n: usize, m: usize, meas: &[PermutationMeasurement]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, x) in meas.iter().enumerate() {
        adj[x.i].push((x.j, e));
        adj[x.j].push((x.i, e));
    }
    let mut perms: Vec<Option<Vec<usize>>> = vec![None; n];
    perms[0] = Some((0..m).collect());
    let mut queue = VecDeque::from([0]);
    while let Some(a) = queue.pop_front() {
        let pa = perms[a].clone().expect("visited");
        for &(b, e) in &adj[a] {
            if perms[b].is_some() {
                continue;
            }
            let x = &meas[e];
            // σ_ij = σ_j⁻¹ ∘ σ_i in apply form.
            perms[b] = Some(if x.i == a {
                compose(&pa, &invert(&x.perm))
            } else {
                compose(&pa, &x.perm)
            });
            queue.push_back(b);
        }
    }
    perms.into_iter().map(|p| p.unwrap_or_else(|| (0..m).collect())).collect()
}

/// The normalized operator `W̃ = D^{-1/2} W D^{-1/2}` on vectors of length
/// `N·m` (entry `i·m + r` is row `r` of block `i`).
struct Operator<'a> {
    m: usize,
    meas: &'a [PermutationMeasurement],
    inv_sqrt: Vec<f64>,
}

impl Operator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        for (i, s) in self.inv_sqrt.iter().enumerate() {
            let s2 = s * s;
            for r in 0..m {
                y[i * m + r] = s2 * x[i * m + r];
            }
        }
        for e in self.meas {
            let s = self.inv_sqrt[e.i] * self.inv_sqrt[e.j];
            for (r, &p) in e.perm.iter().enumerate() {
                // W[j,i] = X(σ_ij): row r of block j picks row σ[r] of block i.
                y[e.j * m + r] += s * x[e.i * m + p];
                y[e.i * m + p] += s * x[e.j * m + r];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt; columns that vanish are replaced by zeros.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for c in 0..cols.len() {
        for _ in 0..2 {
            for p in 0..c {
                let d = dot(&cols[c], &cols[p]);
                let (head, tail) = cols.split_at_mut(c);
                for (a, b) in tail[0].iter_mut().zip(&head[p]) {
                    *a -= d * b;
                }
            }
        }
        let norm = dot(&cols[c], &cols[c]).sqrt();
        if norm > 1e-300 {
            cols[c].iter_mut().for_each(|v| *v /= norm);
        } else {
            cols[c].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Rotates the orthonormal block onto Ritz vectors sorted by decreasing Ritz
/// value; returns the Ritz values and the images `W̃v`.
fn rayleigh_ritz(op: &Operator, cols: &mut Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = cols.len();
    let len = cols[0].len();
    let mut images: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let mut y = vec![0.0; len];
            op.apply(c, &mut y);
            y
        })
        .collect();
    let h = DMatrix::from_fn(p, p, |a, b| 0.5 * (dot(&cols[a], &images[b]) + dot(&cols[b], &images[a])));
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
        order
            .iter()
            .map(|&k| {
                let mut v = vec![0.0; len];
                for (a, col) in src.iter().enumerate() {
                    let q = eig.eigenvectors[(a, k)];
                    for (o, x) in v.iter_mut().zip(col) {
                        *o += q * x;
                    }
                }
                v
            })
            .collect()
    };
    *cols = rotate(cols);
    images = rotate(&images);
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    (values, images)
}

/// Chebyshev filter of degree `d` damping `[−1, upper]` relative to 1.
fn chebyshev_filter(op: &Operator, cols: &mut [Vec<f64>], upper: f64, degree: usize) {
    let (a, b) = (-1.0, upper);
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let len = cols[0].len();
    let mut wy = vec![0.0; len];
    for col in cols.iter_mut() {
        let mut prev = col.clone();
        op.apply(&prev, &mut wy);
        let mut cur: Vec<f64> = wy.iter().zip(&prev).map(|(w, x)| (w - c * x) / e).collect();
        for _ in 1..degree {
            op.apply(&cur, &mut wy);
            let next: Vec<f64> = wy
                .iter()
                .zip(&cur)
                .zip(&prev)
                .map(|((w, y), x)| 2.0 * (w - c * y) / e - x)
                .collect();
            prev = std::mem::replace(&mut cur, next);
        }
        let norm = dot(&cur, &cur).sqrt();
        if norm > 0.0 {
            cur.iter_mut().for_each(|v| *v /= norm);
        }
        *col = cur;
    }
}

/// Consistent per-scene slot permutations for one category with `m` slots,
/// anchored so scene 0 keeps its ordering.
pub fn permutation_sync(
    graph: &SceneGraph,
    m: usize,
    meas: &[PermutationMeasurement],
    cfg: &PermutationSyncConfig,
) -> Result<PermutationSyncResult> {
    let n = graph.num_nodes;
    let comps = count_components(n, meas.iter().map(|x| (x.i, x.j)));
    if comps != 1 {
        return Err(Error::Disconnected { components: comps });
    }
    for x in meas {
        let mut seen = vec![false; m];
        if x.perm.len() != m || x.perm.iter().any(|&b| b >= m || std::mem::replace(&mut seen[b], true)) {
            return Err(Error::InvalidInput(format!(
                "edge ({}, {}) carries an invalid permutation",
                x.i, x.j
            )));
        }
    }
    if m == 1 {
        return Ok(PermutationSyncResult {
            perms: vec![vec![0]; n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut deg = vec![1.0f64; n];
    for x in meas {
        deg[x.i] += 1.0;
        deg[x.j] += 1.0;
    }
    let op = Operator {
        m,
        meas,
        inv_sqrt: deg.iter().map(|d| 1.0 / d.sqrt()).collect(),
    };
    let len = n * m;

    // Leading columns: X(σ_i)ᵀ blocks from the tree, scaled by √deg_i.
    // Guard columns: fixed pseudo-random vectors.
    let init = tree_init(n, m, meas);
    let guard = m.max(2);
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            let mut v = vec![0.0; len];
            for (i, p) in init.iter().enumerate() {
                // Column c of X_iᵀ has its 1 at row p[c]... of block i.
                v[i * m + p[c]] = deg[i].sqrt();
            }
            v
        })
        .collect();
    let mut r = rng::stream(0x5eed, &[m as u64, n as u64]);
    cols.extend((0..guard).map(|_| (0..len).map(|_| r.random::<f64>() - 0.5).collect::<Vec<f64>>()));
    orthonormalize(&mut cols);

    let mut iterations = 0;
    let (mut values, mut images) = rayleigh_ritz(&op, &mut cols);
    let mut residual = leading_residual(&cols, &images, &values, m);
    while residual >= cfg.tolerance && iterations < cfg.max_iters {
        iterations += 1;
        let upper = values[cols.len() - 1].clamp(-0.5, 0.99);
        chebyshev_filter(&op, &mut cols, upper, cfg.filter_degree.max(1));
        orthonormalize(&mut cols);
        (values, images) = rayleigh_ritz(&op, &mut cols);
        residual = leading_residual(&cols, &images, &values, m);
    }
    if residual >= cfg.tolerance {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    debug!("permutation sync (m={m}): {iterations} iterations, residual {residual:.2e}");

    let block = |i: usize, r: usize, a: usize| cols[a][i * m + r];
    let mut perms = Vec::with_capacity(n);
    perms.push((0..m).collect());
    for i in 1..n {
        // A = U_0 U_iᵀ ∝ X(σ_i).
        let cost: Vec<Vec<f64>> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| -(0..m).map(|a| block(0, r, a) * block(i, c, a)).sum::<f64>())
                    .collect()
            })
            .collect();
        perms.push(solve_assignment(&cost)?.perm);
    }
    Ok(PermutationSyncResult {
        perms,
        iterations,
        residual,
    })
}

fn leading_residual(cols: &[Vec<f64>], images: &[Vec<f64>], values: &[f64], m: usize) -> f64 {
    (0..m)
        .map(|k| {
            images[k]
                .iter()
                .zip(&cols[k])
                .map(|(w, v)| (w - values[k] * v).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_measurements() {
        let g = SceneGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| PermutationMeasurement { i, j, perm: vec![0, 1, 2] })
            .collect();
        let r = permutation_sync(&g, 3, &meas, &PermutationSyncConfig::default()).unwrap();
        assert!(r.perms.iter().all(|p| *p == vec![0, 1, 2]));
    }

    #[test]
    fn consistent_measurements_are_recovered() {
        let truth = [vec![0, 1, 2], vec![2, 0, 1], vec![1, 0, 2], vec![0, 2, 1]];
        let g = SceneGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let meas: Vec<_> = g
            .edges
            .iter()
            .map(|&(i, j)| PermutationMeasurement {
                i,
                j,
                perm: compose(&invert(&truth[j]), &truth[i]),
            })
            .collect();
        let r = permutation_sync(&g, 3, &meas, &PermutationSyncConfig::default()).unwrap();
        assert_eq!(r.perms, truth.to_vec());
    }
}
