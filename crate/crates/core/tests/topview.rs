mod common;

use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use scenesynth::scene::{apply_motion, ObjectColumn, RigidMotion, SceneMatrix};
use scenesynth::topview::{box_tsdf, project, project_backward, FootprintBox, ProjectionConfig, ViewWindow};

use common::{config, random_column, random_scene, rng, topview_fd_check};

#[test]
fn gradient_matches_finite_differences_on_kink_free_scenes() {
    let mut accepted = 0;
    let mut worst: f64 = 0.0;
    let mut seed = 0;
    while accepted < 200 {
        assert!(seed < 20_000, "too few kink-free configurations ({accepted})");
        if let Some(c) = topview_fd_check(seed, 1e-4, 1e-3) {
            assert!(c.checked > 0);
            worst = worst.max(c.max_rel);
            accepted += 1;
        }
        seed += 1;
    }
    assert!(worst < 1e-4, "worst relative error {worst:.3e}");
}

fn unit_window(resolution: usize) -> ViewWindow {
    ViewWindow::new([0.0, 0.0], 3.0, resolution).unwrap()
}

#[test]
fn empty_scene_projects_to_zero() {
    let cfg = config(&["a", "b"], 2, 1);
    let img = project(&SceneMatrix::empty(cfg), &unit_window(16), &ProjectionConfig::default());
    assert!(img.values.iter().all(|&v| v == 0.0));
}

#[test]
fn side_pixel_size_gradient_is_minus_class_constant() {
    let cfg = config(&["a", "b"], 1, 0);
    let mut scene = SceneMatrix::empty(cfg.clone());
    scene.columns[1] = ObjectColumn {
        existence: 1.0,
        center: [0.0, 0.0, 0.0],
        front: [1.0, 0.0],
        size: [2.0, 2.0, 1.0],
        descriptor: vec![],
    };
    let window = unit_window(30);
    // Pixel (14, 20) is centered at (1.1, 0.1): 0.1 m outside the front face.
    assert_eq!(window.pixel_center(14, 20).map(|v| (v * 1e9).round() / 1e9), [1.1, 0.1]);
    let mut upstream = vec![0.0; 900];
    upstream[14 * 30 + 20] = 1.0;
    let g = project_backward(&scene, &window, &ProjectionConfig::default(), &upstream).unwrap();
    let c = cfg.categories[1].class_constant;
    assert!((g.objects[0].half_sizes[0] + c).abs() < 1e-12);
    assert!(g.objects[0].half_sizes[1].abs() < 1e-12);
    assert!((g.objects[0].center2d[0] + c).abs() < 1e-12);
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let cfg = config(&["a", "b", "c"], 2, 1);
    let scene = random_scene(&cfg, &mut rng(4), 0.7);
    let g = project_backward(&scene, &unit_window(24), &ProjectionConfig::default(), &vec![0.0; 576]).unwrap();
    for o in g.objects {
        assert!(o.center2d.iter().chain(&o.front).chain(&o.half_sizes).all(|&v| v == 0.0));
    }
}

#[test]
fn absent_objects_do_not_contribute() {
    let cfg = config(&["a"], 2, 0);
    let mut r = rng(8);
    let mut scene = SceneMatrix::empty(cfg);
    scene.columns[0] = random_column(&mut r, 0, 1.0);
    let mut ghost = random_column(&mut r, 0, 1.0);
    ghost.existence = 0.49;
    let reference = project(&scene, &unit_window(32), &ProjectionConfig::default());
    scene.columns[1] = ghost;
    let with_ghost = project(&scene, &unit_window(32), &ProjectionConfig::default());
    assert_eq!(reference, with_ghost);
}

/// Projects each present object on its own, with the same class constant.
fn single_object_images(scene: &SceneMatrix, window: &ViewWindow, pcfg: &ProjectionConfig) -> Vec<Vec<f64>> {
    (0..scene.columns.len())
        .filter(|&j| scene.columns[j].exists())
        .map(|j| {
            let mut single = SceneMatrix::empty(scene.config.clone());
            single.columns[j] = scene.columns[j].clone();
            project(&single, window, pcfg).values
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superposition_is_exact(seed: u64) {
        let cfg = config(&["a", "b", "c"], 2, 1);
        let scene = random_scene(&cfg, &mut rng(seed), 0.6);
        let window = unit_window(24);
        let pcfg = ProjectionConfig::default();
        let mut sum = vec![0.0; 24 * 24];
        for img in single_object_images(&scene, &window, &pcfg) {
            for (s, v) in sum.iter_mut().zip(img) {
                *s += v;
            }
        }
        prop_assert_eq!(project(&scene, &window, &pcfg).values, sum);
    }

    #[test]
    fn values_are_bounded_by_total_truncation(seed: u64, delta in 0.05f64..1.0) {
        let cfg = config(&["a", "b", "c"], 2, 1);
        let scene = random_scene(&cfg, &mut rng(seed), 0.6);
        let pcfg = ProjectionConfig::with_delta(delta);
        let cats = cfg.column_categories();
        let bound: f64 = scene.columns.iter().enumerate()
            .filter(|(_, c)| c.exists())
            .map(|(j, _)| cfg.categories[cats[j]].class_constant * delta)
            .sum();
        let img = project(&scene, &unit_window(20), &pcfg);
        prop_assert!(img.values.iter().all(|v| v.is_finite() && v.abs() <= bound + 1e-12));
    }

    #[test]
    fn quarter_turns_rotate_the_image(seed: u64, k in 0usize..4) {
        let cfg = config(&["a", "b"], 2, 1);
        let scene = random_scene(&cfg, &mut rng(seed), 0.6);
        let theta = k as f64 * FRAC_PI_2;
        let turned = apply_motion(&scene, &RigidMotion::new(theta, [0.0; 3]));
        let window = unit_window(20);
        let pcfg = ProjectionConfig::default();
        let a = project(&scene, &window, &pcfg);
        let b = project(&turned, &window, &pcfg);
        let (s, c) = theta.sin_cos();
        for i in 0..20 {
            for j in 0..20 {
                let p = window.pixel_center(i, j);
                let back = [c * p[0] + s * p[1], -s * p[0] + c * p[1]];
                let (ri, rj) = window.to_pixel(back);
                let (ri, rj) = (ri.round() as usize, rj.round() as usize);
                prop_assert!((b.get(i, j) - a.get(ri, rj)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tsdf_is_one_lipschitz_within_the_band(
        seed: u64,
        p in prop::array::uniform2(-2.5f64..2.5),
        q in prop::array::uniform2(-2.5f64..2.5),
    ) {
        let col = random_column(&mut rng(seed), 0, 1.0);
        let b = FootprintBox::of(&col);
        let delta = 0.5;
        let (fp, fq) = (box_tsdf(p, &b, delta), box_tsdf(q, &b, delta));
        let same_side = (fp > 0.0 && fq > 0.0) || (fp < 0.0 && fq < 0.0);
        if same_side {
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            prop_assert!((fp - fq).abs() <= d + 1e-12);
        }
    }
}

