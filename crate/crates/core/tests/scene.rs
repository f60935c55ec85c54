mod common;

use itertools::Itertools;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use scenesynth::scene::{
    apply_motion, apply_permutation, canonicalize, column_distance_sq, existence_weights, frobenius_sq,
    read_corpus_jsonl, read_scene_json, scene_distance, solve_assignment, solve_procrustes, wrap_angle,
    write_corpus_jsonl, write_scene_json, PermutationSet, SceneMatrix, DEFAULT_RESTARTS,
};

use common::{
    brute_force_assignment, config, procrustes_grid, procrustes_objective, random_matrix, random_motion,
    random_perms, random_scene, rng,
};

fn names() -> [&'static str; 3] {
    ["bed", "stand", "lamp"]
}

fn assert_scenes_close(a: &SceneMatrix, b: &SceneMatrix, tol: f64) {
    assert_eq!(a.to_flat().len(), b.to_flat().len());
    for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn permutation_inverse_restores_exactly(seed: u64, m in 1usize..6) {
        let cfg = config(&names(), m, 2);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.6);
        let p = random_perms(&cfg, &mut r);
        let there = apply_permutation(&scene, &p).unwrap();
        prop_assert_eq!(apply_permutation(&there, &p.inverse()).unwrap(), scene);
    }

    #[test]
    fn motion_inverse_restores(seed: u64) {
        let cfg = config(&names(), 3, 2);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.7);
        let t = random_motion(&mut r);
        let back = apply_motion(&apply_motion(&scene, &t), &t.inverse());
        assert_scenes_close(&back, &scene, 1e-12);
    }

    #[test]
    fn motion_and_permutation_commute(seed: u64) {
        let cfg = config(&names(), 4, 1);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.5);
        let t = random_motion(&mut r);
        let p = random_perms(&cfg, &mut r);
        let ts = apply_motion(&apply_permutation(&scene, &p).unwrap(), &t);
        let st = apply_permutation(&apply_motion(&scene, &t), &p).unwrap();
        prop_assert_eq!(ts, st);
    }

    #[test]
    fn motion_leaves_existence_size_and_descriptor_untouched(seed: u64) {
        let cfg = config(&names(), 2, 3);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.6);
        let moved = apply_motion(&scene, &random_motion(&mut r));
        for (a, b) in scene.columns.iter().zip(&moved.columns) {
            prop_assert_eq!(a.existence.to_bits(), b.existence.to_bits());
            prop_assert_eq!(a.size, b.size);
            prop_assert_eq!(&a.descriptor, &b.descriptor);
        }
    }

    #[test]
    fn permutation_moves_whole_columns_within_blocks(seed: u64) {
        let cfg = config(&names(), 3, 2);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.6);
        let p = random_perms(&cfg, &mut r);
        let out = apply_permutation(&scene, &p).unwrap();
        for k in 0..cfg.num_categories() {
            let start = cfg.block_range(k).start;
            for (a, &b) in p.perms[k].iter().enumerate() {
                prop_assert_eq!(&out.columns[start + a], &scene.columns[start + b]);
            }
        }
    }

    #[test]
    fn composition_matches_sequential_application(seed: u64) {
        let cfg = config(&names(), 3, 1);
        let mut r = rng(seed);
        let scene = random_scene(&cfg, &mut r, 0.7);
        let (a, b) = (random_motion(&mut r), random_motion(&mut r));
        let once = apply_motion(&scene, &a.compose(&b));
        let twice = apply_motion(&apply_motion(&scene, &b), &a);
        assert_scenes_close(&once, &twice, 1e-12);

        let (p, q) = (random_perms(&cfg, &mut r), random_perms(&cfg, &mut r));
        let once = apply_permutation(&scene, &p.compose(&q)).unwrap();
        let twice = apply_permutation(&apply_permutation(&scene, &q).unwrap(), &p).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn canonicalize_is_idempotent(seed: u64) {
        let cfg = config(&names(), 2, 2);
        let mut r = rng(seed);
        let mut scene = random_scene(&cfg, &mut r, 0.8);
        for c in &mut scene.columns {
            c.existence = r.random_range(-0.5..1.5);
            c.front = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            c.size[0] = r.random_range(-0.5..1.0);
        }
        let once = canonicalize(&scene);
        prop_assert_eq!(canonicalize(&once), once.clone());
        for c in once.columns.iter().filter(|c| c.exists()) {
            prop_assert!((c.front[0].hypot(c.front[1]) - 1.0).abs() < 1e-12);
            prop_assert!(c.size.iter().all(|&s| s > 0.0));
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact(seed: u64) {
        let cfg = config(&names(), 2, 3);
        let scene = random_scene(&cfg, &mut rng(seed), 0.6);
        let back = read_scene_json(&write_scene_json(&scene)).unwrap();
        prop_assert_eq!(back.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        scene.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn corpus_round_trip() {
    let cfg = config(&names(), 2, 1);
    let mut r = rng(3);
    let scenes: Vec<_> = (0..5).map(|_| random_scene(&cfg, &mut r, 0.5)).collect();
    assert_eq!(read_corpus_jsonl(&write_corpus_jsonl(&scenes)).unwrap(), scenes);
}

#[test]
fn assignment_matches_brute_force() {
    let mut r = rng(11);
    for trial in 0..300 {
        let m = 1 + trial % 7;
        let cost = random_matrix(&mut r, m);
        let a = solve_assignment(&cost).unwrap();
        let direct: f64 = a.perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert!((a.cost - direct).abs() < 1e-9);
        assert!((a.cost - brute_force_assignment(&cost)).abs() < 1e-9, "m = {m}");
        let mut sorted = a.perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..m).collect::<Vec<_>>());
    }
}

#[test]
fn permutation_costs_equal_direct_block_distances() {
    let cfg = config(&["a", "b"], 4, 2);
    let mut r = rng(21);
    let target = random_scene(&cfg, &mut r, 0.7);
    let source = random_scene(&cfg, &mut r, 0.7);
    let t = random_motion(&mut r);
    let moved = apply_motion(&source, &t);
    for k in 0..2 {
        let range = cfg.block_range(k);
        let cost: Vec<Vec<f64>> = range
            .clone()
            .map(|a| range.clone().map(|b| column_distance_sq(&target.columns[a], &moved.columns[b])).collect())
            .collect();
        for p in (0..4).permutations(4) {
            let mut perms = PermutationSet::identity(&cfg);
            perms.perms[k] = p.clone();
            let out = apply_motion(&apply_permutation(&source, &perms).unwrap(), &t);
            let direct: f64 = range.clone().map(|j| column_distance_sq(&target.columns[j], &out.columns[j])).sum();
            let via_cost: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            assert!((direct - via_cost).abs() < 1e-9 * (1.0 + direct));
        }
    }
}

#[test]
fn procrustes_recovers_known_motion() {
    let cfg = config(&names(), 2, 1);
    let mut r = rng(5);
    let mut done = 0;
    while done < 100 {
        let source = random_scene(&cfg, &mut r, 0.7);
        if source.num_existing() < 2 {
            continue;
        }
        let t = random_motion(&mut r);
        let target = apply_motion(&source, &t);
        let w = existence_weights(&target, &source);
        let est = solve_procrustes(&target, &source, &w).unwrap();
        assert!(wrap_angle(est.theta - t.theta).abs() < 1e-9);
        for a in 0..3 {
            assert!((est.t[a] - t.t[a]).abs() < 1e-9);
        }
        done += 1;
    }
}

#[test]
fn procrustes_beats_rotation_grid() {
    let cfg = config(&names(), 2, 0);
    let mut r = rng(6);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut done = 0;
    while done < 100 {
        let source = random_scene(&cfg, &mut r, 0.8);
        if source.num_existing() < 2 {
            continue;
        }
        let mut target = apply_motion(&source, &random_motion(&mut r));
        for c in &mut target.columns {
            for v in c.center.iter_mut().chain(c.front.iter_mut()) {
                *v += noise.sample(&mut r);
            }
        }
        let w: Vec<f64> = source
            .columns
            .iter()
            .map(|c| if c.exists() { r.random_range(0.1..2.0) } else { 0.0 })
            .collect();
        let est = solve_procrustes(&target, &source, &w).unwrap();
        let best = procrustes_objective(&target, &source, &w, &est);
        let grid = procrustes_grid(&target, &source, &w, 720);
        assert!(best <= grid + 1e-12, "{best} > {grid}");
        done += 1;
    }
}

#[test]
fn scene_distance_vanishes_on_transformed_copies() {
    let cfg = config(&names(), 2, 2);
    let mut r = rng(7);
    for _ in 0..50 {
        let m = random_scene(&cfg, &mut r, 0.7);
        let mbar = apply_motion(&apply_permutation(&m, &random_perms(&cfg, &mut r)).unwrap(), &random_motion(&mut r));
        let d = scene_distance(&mbar, &m, DEFAULT_RESTARTS).unwrap();
        assert!(d.value < 1e-9, "distance {}", d.value);
        let reproduced = apply_motion(&apply_permutation(&m, &d.perms).unwrap(), &d.motion);
        assert!((frobenius_sq(&mbar, &reproduced) - d.value).abs() < 1e-9);
    }
}

#[test]
fn scene_distance_is_bounded_by_noise() {
    let cfg = config(&names(), 2, 2);
    let mut r = rng(8);
    let noise = Normal::new(0.0, 0.02).unwrap();
    for _ in 0..50 {
        let m = random_scene(&cfg, &mut r, 0.7);
        let mut mbar = m.clone();
        for c in mbar.columns.iter_mut().filter(|c| c.exists()) {
            for v in c.center.iter_mut().chain(c.front.iter_mut()).chain(c.size.iter_mut()) {
                *v += noise.sample(&mut r);
            }
        }
        let eps_sq = frobenius_sq(&mbar, &m);
        let d = scene_distance(&mbar, &m, DEFAULT_RESTARTS).unwrap();
        assert!(d.value <= eps_sq, "{} > {}", d.value, eps_sq);
    }
}
