mod common;

use std::sync::Arc;

use rand::Rng;

use scenesynth::align::synthetic::{max_rotation_error, permutation_problem, pose_problem};
use scenesynth::align::{
    align_corpus, initial_motion, irls_from, knn_graph_from_features, pairwise_align, permutation_sync,
    rotation_sync, translation_sync, AlignConfig, PairwiseConfig, PermutationSyncConfig, RotationSyncConfig,
    TranslationSyncConfig,
};
use scenesynth::corpus::{bedroom_config, default_bedroom_spec, generate_corpus};
use scenesynth::scene::{
    apply_motion, apply_permutation, frobenius_sq, wrap_angle, ObjectColumn, RigidMotion, SceneMatrix,
};

use common::{config, random_column, random_motion, random_perms, rng};

/// A scene whose objects are all present and well separated.
fn distinct_scene(seed: u64) -> SceneMatrix {
    let cfg = config(&["bed", "stand", "lamp"], 2, 2);
    let mut r = rng(seed);
    let mut s = SceneMatrix::empty(cfg);
    let n = s.columns.len();
    for (j, c) in s.columns.iter_mut().enumerate() {
        let mut col = random_column(&mut r, 2, 0.3);
        let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let radius = 1.0 + 0.4 * j as f64;
        col.center[0] += radius * a.cos();
        col.center[1] += radius * a.sin();
        *c = col;
    }
    s
}

fn translation_error(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn knn_graph_matches_brute_force() {
    let mut r = rng(1);
    for trial in 0..20 {
        let n = 10 + trial;
        let k = 1 + trial % 4;
        let feats: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random_range(0..4) as f64).collect()).collect();
        let g = knn_graph_from_features(&feats, k).unwrap();
        let dist = |a: usize, b: usize| -> f64 {
            feats[a].iter().zip(&feats[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let adjacent = |a: usize, b: usize| g.edges.contains(&(a.min(b), a.max(b)));
        let mut explained = 0;
        let mut chosen = vec![Vec::new(); n];
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)).then(a.cmp(&b)));
            for &j in &order[..k] {
                assert!(adjacent(i, j), "node {i} misses neighbor {j}");
                chosen[i].push(j);
            }
            let kth = dist(i, order[k - 1]);
            for &j in &order[k..] {
                assert!(dist(i, j) >= kth);
            }
        }
        for &(a, b) in &g.edges {
            if chosen[a].contains(&b) || chosen[b].contains(&a) {
                explained += 1;
            }
        }
        assert_eq!(explained + g.bridges, g.edges.len());
        assert_eq!(g.num_components(), 1);
        assert!(g.degrees().iter().all(|&d| d >= 1));
    }
}

#[test]
fn pairwise_recovers_ground_truth() {
    for seed in 0..20 {
        let mi = distinct_scene(seed);
        let mut r = rng(100 + seed);
        let t = random_motion(&mut r);
        let s = random_perms(&mi.config, &mut r);
        let mj = apply_motion(&apply_permutation(&mi, &s).unwrap(), &t);
        let e = pairwise_align(&mi, &mj).unwrap();
        let aligned = apply_motion(&apply_permutation(&mi, &e.perms).unwrap(), &e.motion);
        assert!(frobenius_sq(&mj, &aligned) < 1e-6, "seed {seed}");
        assert!(wrap_angle(e.motion.theta - t.theta).abs() < 1e-6);
        assert!(e.motion.theta > -std::f64::consts::PI && e.motion.theta <= std::f64::consts::PI);
    }
}

#[test]
fn self_alignment_is_identity() {
    let m = distinct_scene(3);
    let e = pairwise_align(&m, &m).unwrap();
    assert!(e.perms.is_identity());
    assert!(e.motion.theta.abs() < 1e-9);
    let n_o = m.columns.len() as f64;
    assert!((e.residual - n_o * PairwiseConfig::default().epsilon).abs() < 1e-9);
}

#[test]
fn extra_object_does_not_disturb_the_motion() {
    for seed in 0..10 {
        let mut mi = distinct_scene(seed);
        mi.columns[5] = ObjectColumn::absent(2);
        let mut r = rng(200 + seed);
        let t = random_motion(&mut r);
        let mj = apply_motion(&mi, &t);
        let mut extra = random_column(&mut r, 2, 0.2);
        extra.center[0] += 4.0;
        mi.columns[5] = extra;
        let e = pairwise_align(&mi, &mj).unwrap();
        assert!(wrap_angle(e.motion.theta - t.theta).abs().to_degrees() < 1.0, "seed {seed}");
        assert!(translation_error(e.motion.t, t.t) < 0.05, "seed {seed}");
    }
}

#[test]
fn irls_objective_never_increases_within_a_round() {
    let cfg = PairwiseConfig::default();
    for seed in 0..20 {
        let mi = distinct_scene(seed);
        let mut r = rng(300 + seed);
        let mut mj = apply_motion(&apply_permutation(&mi, &random_perms(&mi.config, &mut r)).unwrap(), &random_motion(&mut r));
        for c in &mut mj.columns {
            c.center[0] += r.random_range(-0.2..0.2);
            c.center[1] += r.random_range(-0.2..0.2);
        }
        for k in 0..cfg.starts {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / cfg.starts as f64;
            let run = irls_from(&mj, &mi, initial_motion(&mj, &mi, theta), &cfg).unwrap();
            for round in &run.trace {
                for w in round.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{} > {}", w[1], w[0]);
                }
            }
        }
    }
}

#[test]
fn noise_free_synchronization_is_exact() {
    let p = pose_problem(100, 8, 5.0, 0.0, 1).unwrap();
    let rot = rotation_sync(&p.graph, &p.rotations, &RotationSyncConfig::default()).unwrap();
    let truth: Vec<f64> = p.truth.iter().map(|t| t.theta).collect();
    assert!(max_rotation_error(&rot.thetas, &truth) < 1e-6);
    assert_eq!(rot.thetas[0], 0.0);

    let tr = translation_sync(&p.graph, &p.translations, &rot.thetas, &TranslationSyncConfig::default()).unwrap();
    for (est, truth) in tr.translations.iter().zip(&p.truth) {
        assert!(translation_error(*est, truth.t) < 1e-9, "{est:?} vs {:?}", truth.t);
    }

    let pp = permutation_problem(100, 8, 4, 0.0, 2).unwrap();
    let ps = permutation_sync(&pp.graph, 4, &pp.measurements, &PermutationSyncConfig::default()).unwrap();
    assert_eq!(ps.perms, pp.truth);
}

#[test]
fn corrupted_synchronization_stays_close() {
    for seed in 0..3 {
        let p = pose_problem(100, 8, 5.0, 0.2, seed).unwrap();
        let rot = rotation_sync(&p.graph, &p.rotations, &RotationSyncConfig::default()).unwrap();
        let truth: Vec<f64> = p.truth.iter().map(|t| t.theta).collect();
        assert!(max_rotation_error(&rot.thetas, &truth).to_degrees() < 2.0);
        let tr = translation_sync(&p.graph, &p.translations, &rot.thetas, &TranslationSyncConfig::default()).unwrap();
        let worst = tr
            .translations
            .iter()
            .zip(&p.truth)
            .map(|(est, truth)| translation_error(*est, truth.t))
            .fold(0.0, f64::max);
        assert!(worst < 0.1, "seed {seed}: {worst}");

        let pp = permutation_problem(100, 8, 4, 0.15, seed).unwrap();
        let ps = permutation_sync(&pp.graph, 4, &pp.measurements, &PermutationSyncConfig::default()).unwrap();
        let exact = ps.perms.iter().zip(&pp.truth).filter(|(a, b)| a == b).count();
        assert!(exact >= 95, "seed {seed}: {exact}");
    }
}

fn copies(base: &SceneMatrix, n: usize, seed: u64) -> Vec<SceneMatrix> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| apply_motion(&apply_permutation(base, &random_perms(&base.config, &mut r)).unwrap(), &random_motion(&mut r)))
        .collect()
}

#[test]
fn copies_align_to_one_scene() {
    let scenes = copies(&distinct_scene(9), 12, 10);
    let out = align_corpus(&scenes, &AlignConfig::with_k(4)).unwrap();
    for a in &out.aligned[1..] {
        assert!(frobenius_sq(a, &out.aligned[0]).sqrt() < 1e-6);
    }
    assert_eq!(out.poses.motions[0], RigidMotion::identity());
    assert!(out.poses.perms[0].is_identity());
    for e in &out.report.edges {
        assert!(e.rotation_error < 1e-9);
        assert!(e.translation_error < 1e-9);
        assert_eq!(e.permutation_disagreements, 0);
    }
}

#[test]
fn two_scenes_reduce_to_one_pairwise_match() {
    let scenes = copies(&distinct_scene(4), 2, 5);
    let out = align_corpus(&scenes, &AlignConfig::default()).unwrap();
    assert_eq!(out.report.num_edges, 1);
    let e = pairwise_align(&scenes[0], &scenes[1]).unwrap();
    // Scene 1 is carried into scene 0's frame by the inverse of the edge.
    let expected = e.motion.inverse();
    assert!(wrap_angle(out.poses.motions[1].theta - expected.theta).abs() < 1e-9);
    assert!(translation_error(out.poses.motions[1].t, expected.t) < 1e-9);
    assert_eq!(out.poses.perms[1], e.perms.inverse());
}

/// Holds on consistent inputs; with noisy edge rotations the translation
/// constraints depend on where the origin sits.
#[test]
fn global_motion_moves_the_common_frame_only() {
    let scenes = copies(&distinct_scene(12), 16, 13);
    let g = RigidMotion::new(0.7, [1.5, -2.0, 0.1]);
    let moved: Vec<_> = scenes.iter().map(|s| apply_motion(s, &g)).collect();
    let a = align_corpus(&scenes, &AlignConfig::with_k(4)).unwrap();
    let b = align_corpus(&moved, &AlignConfig::with_k(4)).unwrap();
    for (x, y) in a.aligned.iter().zip(&b.aligned) {
        let expected = apply_motion(x, &g).canonicalize();
        assert!(frobenius_sq(&expected, y).sqrt() < 1e-6);
    }
    for (x, y) in a.poses.motions.iter().zip(&b.poses.motions) {
        let conj = g.compose(x).compose(&g.inverse());
        assert!(wrap_angle(conj.theta - y.theta).abs() < 1e-9);
        assert!(translation_error(conj.t, y.t) < 1e-6);
    }
    assert_eq!(a.poses.perms, b.poses.perms);
}

#[test]
fn small_bedroom_corpus_recovers_rotations() {
    let cfg = Arc::new(bedroom_config(4).unwrap());
    let mut spec = default_bedroom_spec();
    spec.n = 60;
    let corpus = generate_corpus(&spec, &cfg).unwrap();
    let out = align_corpus(&corpus.scenes, &AlignConfig::with_k(16)).unwrap();
    let est: Vec<f64> = out.poses.motions.iter().map(|m| m.theta).collect();
    let truth: Vec<f64> = corpus.truth.motions.iter().map(|m| -m.theta).collect();
    let offsets: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| wrap_angle(e - t)).collect();
    let (s, c) = offsets.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let mean = s.atan2(c);
    let within = offsets.iter().filter(|&&a| wrap_angle(a - mean).abs().to_degrees() < 3.0).count();
    assert!(within * 100 >= 95 * spec.n, "{within}/{}", spec.n);
}
