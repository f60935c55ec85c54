//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scenesynth::scene::{
    rotate2, CategoryConfig, ObjectColumn, PermutationSet, RigidMotion, SceneMatrix, ROW_CENTER, ROW_FRONT, ROW_SIZE,
};
use scenesynth::topview::{project, project_backward, ProjectionConfig, ViewWindow};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(names: &[&str], m: usize, d: usize) -> Arc<CategoryConfig> {
    Arc::new(CategoryConfig::uniform(names, m, d).unwrap())
}

pub fn random_column(r: &mut impl Rng, d: usize, extent: f64) -> ObjectColumn {
    let a: f64 = r.random_range(-PI..PI);
    ObjectColumn {
        existence: 1.0,
        center: [r.random_range(-extent..extent), r.random_range(-extent..extent), r.random_range(0.0..1.0)],
        front: [a.cos(), a.sin()],
        size: [r.random_range(0.3..2.0), r.random_range(0.3..2.0), r.random_range(0.3..2.0)],
        descriptor: (0..d).map(|_| StandardNormal.sample(r)).collect(),
    }
}

/// Each slot holds an object with probability `fill`.
pub fn random_scene(cfg: &Arc<CategoryConfig>, r: &mut impl Rng, fill: f64) -> SceneMatrix {
    let mut s = SceneMatrix::empty(cfg.clone());
    for c in s.columns.iter_mut() {
        if r.random_bool(fill) {
            *c = random_column(r, cfg.descriptor_dim, 3.0);
        }
    }
    s
}

pub fn random_motion(r: &mut impl Rng) -> RigidMotion {
    RigidMotion::new(
        r.random_range(-PI..PI),
        [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-0.5..0.5)],
    )
}

pub fn random_perms(cfg: &CategoryConfig, r: &mut impl Rng) -> PermutationSet {
    use rand::seq::SliceRandom;
    PermutationSet {
        perms: cfg
            .categories
            .iter()
            .map(|c| {
                let mut p: Vec<usize> = (0..c.max_multiplicity).collect();
                p.shuffle(r);
                p
            })
            .collect(),
    }
}

pub fn random_matrix(r: &mut impl Rng, m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..m).map(|_| r.random_range(-10.0..10.0)).collect()).collect()
}

/// Minimum of `Σ_i cost[i][σ(i)]` over all permutations.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let m = cost.len();
    (0..m)
        .permutations(m)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Weighted rigid-fit objective over corresponding columns.
pub fn procrustes_objective(target: &SceneMatrix, source: &SceneMatrix, w: &[f64], t: &RigidMotion) -> f64 {
    let mut total = 0.0;
    for ((p, q), &wj) in source.columns.iter().zip(&target.columns).zip(w) {
        let c = rotate2(t.theta, [p.center[0], p.center[1]]);
        let u = rotate2(t.theta, p.front);
        total += wj
            * ((c[0] + t.t[0] - q.center[0]).powi(2)
                + (c[1] + t.t[1] - q.center[1]).powi(2)
                + (u[0] - q.front[0]).powi(2)
                + (u[1] - q.front[1]).powi(2)
                + (p.center[2] + t.t[2] - q.center[2]).powi(2));
    }
    total
}

/// Best objective over `n` equally spaced rotations, each with its optimal
/// translation (difference of weighted centroids).
pub fn procrustes_grid(target: &SceneMatrix, source: &SceneMatrix, w: &[f64], n: usize) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = |s: &SceneMatrix, k: usize| s.columns.iter().zip(w).map(|(c, &wj)| wj * c.center[k]).sum::<f64>() / total;
    let (p, q) = ([mean(source, 0), mean(source, 1)], [mean(target, 0), mean(target, 1)]);
    let tz = mean(target, 2) - mean(source, 2);
    (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64 - PI;
            let rp = rotate2(theta, p);
            let t = RigidMotion::new(theta, [q[0] - rp[0], q[1] - rp[1], tz]);
            procrustes_objective(target, source, w, &t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Signed distance of `p` to the footprint rectangle of `col` together with
/// the local offsets `e = |q| − half` and `q` in the box frame.
fn footprint_sd(p: [f64; 2], col: &ObjectColumn) -> (f64, [f64; 2], [f64; 2]) {
    let n = (col.front[0].powi(2) + col.front[1].powi(2)).sqrt();
    let f = [col.front[0] / n, col.front[1] / n];
    let d = [p[0] - col.center[0], p[1] - col.center[1]];
    let q = [d[0] * f[0] + d[1] * f[1], -d[0] * f[1] + d[1] * f[0]];
    let e = [q[0].abs() - 0.5 * col.size[0], q[1].abs() - 0.5 * col.size[1]];
    let outside = (e[0].max(0.0).powi(2) + e[1].max(0.0).powi(2)).sqrt();
    (outside + e[0].max(e[1]).min(0.0), e, q)
}

/// Whether every pixel keeps at least `margin` away from the places where the
/// truncated distance of some object is not smooth: the band edges, the
/// interior medial axis, the box axes and the corner points.
pub fn kink_free(scene: &SceneMatrix, window: &ViewWindow, delta: f64, margin: f64) -> bool {
    let r = window.resolution;
    for col in scene.columns.iter().filter(|c| c.exists()) {
        for i in 0..r {
            for j in 0..r {
                let (sd, e, q) = footprint_sd(window.pixel_center(i, j), col);
                if (sd.abs() - delta).abs() < margin {
                    return false;
                }
                if sd.abs() > delta {
                    continue;
                }
                if sd < 0.0 && (e[0] - e[1]).abs() < margin {
                    return false;
                }
                if q[0].abs() < margin || q[1].abs() < margin {
                    return false;
                }
                if e[0] > -margin && e[1] > -margin && e[0].max(0.0).hypot(e[1].max(0.0)) < 25.0 * margin {
                    return false;
                }
            }
        }
    }
    true
}

pub struct TopviewCheck {
    pub max_rel: f64,
    pub checked: usize,
}

/// Finite-difference check of the projection gradient on one random scene,
/// or `None` if the scene has a pixel too close to a kink.
pub fn topview_fd_check(seed: u64, h: f64, floor: f64) -> Option<TopviewCheck> {
    let mut r = rng(seed);
    let cfg = config(&["a", "b", "c"], 2, 1);
    let mut scene = SceneMatrix::empty(cfg.clone());
    let count = r.random_range(1..=3);
    for j in 0..count {
        let slot = 2 * j + r.random_range(0..2);
        let mut c = random_column(&mut r, 1, 1.5);
        c.size[0] = r.random_range(0.4..1.6);
        c.size[1] = r.random_range(0.4..1.6);
        // Raw, non-unit fronts exercise the normalization chain rule.
        let s = r.random_range(0.6..1.4);
        c.front = [s * c.front[0], s * c.front[1]];
        scene.columns[slot] = c;
    }
    let window = ViewWindow::new([0.0, 0.0], 3.0, 32).unwrap();
    let pcfg = ProjectionConfig::default();
    if !kink_free(&scene, &window, pcfg.delta, 20.0 * h) {
        return None;
    }
    let upstream: Vec<f64> = (0..32 * 32).map(|_| StandardNormal.sample(&mut r)).collect();
    let loss = |s: &SceneMatrix| project(s, &window, &pcfg).values.iter().zip(&upstream).map(|(v, u)| v * u).sum::<f64>();
    let analytic = project_backward(&scene, &window, &pcfg, &upstream).unwrap().to_flat(&cfg);
    let flat = scene.to_flat();
    let rows = cfg.rows();
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    for (j, col) in scene.columns.iter().enumerate() {
        if !col.exists() {
            continue;
        }
        for row in [ROW_CENTER, ROW_CENTER + 1, ROW_FRONT, ROW_FRONT + 1, ROW_SIZE, ROW_SIZE + 1] {
            let k = j * rows + row;
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let fp = loss(&SceneMatrix::from_flat(cfg.clone(), &plus).unwrap());
            let fm = loss(&SceneMatrix::from_flat(cfg.clone(), &minus).unwrap());
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[k];
            max_rel = max_rel.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(floor));
            checked += 1;
        }
    }
    Some(TopviewCheck { max_rel, checked })
}
