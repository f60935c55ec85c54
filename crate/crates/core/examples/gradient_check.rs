//! Compares the analytic gradients of the top-view projection and of the
//! arrangement networks against central differences.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenesynth::corpus::bedroom_config;
use scenesynth::nn::{build_arrangement_nets, build_image_discriminator, check_network};
use scenesynth::scene::{CategoryConfig, ObjectColumn, SceneMatrix};
use scenesynth::topview::{project, project_backward, ProjectionConfig, ViewWindow};

fn main() -> scenesynth::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(1);

    // A single box well inside the window, probed along every geometric row.
    let cfg = Arc::new(CategoryConfig::uniform(&["table"], 1, 0)?);
    let mut scene = SceneMatrix::empty(cfg.clone());
    scene.columns[0] = ObjectColumn {
        existence: 1.0,
        center: [0.13, -0.21, 0.4],
        front: [0.6, 0.8],
        size: [1.07, 0.71, 0.8],
        descriptor: vec![],
    };
    let window = ViewWindow::new([0.0, 0.0], 2.0, 32)?;
    let pcfg = ProjectionConfig::default();
    let upstream: Vec<f64> = (0..32 * 32).map(|_| r.random_range(-1.0..1.0)).collect();
    let loss = |s: &SceneMatrix| project(s, &window, &pcfg).values.iter().zip(&upstream).map(|(v, u)| v * u).sum::<f64>();
    let analytic = project_backward(&scene, &window, &pcfg, &upstream)?.to_flat(&cfg);
    let flat = scene.to_flat();
    let h = 1e-5;
    println!("row  analytic      numeric");
    for row in 1..cfg.rows() - 1 {
        let (mut plus, mut minus) = (flat.clone(), flat.clone());
        plus[row] += h;
        minus[row] -= h;
        let numeric = (loss(&SceneMatrix::from_flat(cfg.clone(), &plus)?)
            - loss(&SceneMatrix::from_flat(cfg.clone(), &minus)?))
            / (2.0 * h);
        println!("{row:>3}  {:>11.6}  {numeric:>11.6}", analytic[row]);
    }

    let bedroom = bedroom_config(4)?;
    let nets = build_arrangement_nets(&bedroom, 10, 0.1, 4, 7)?;
    let x: Vec<f64> = (0..bedroom.flat_len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
    let image = build_image_discriminator(64, 4, 8)?;
    let img: Vec<f64> = (0..64 * 64).map(|_| r.random_range(-1.0..1.0)).collect();
    for (name, net, input) in [
        ("encoder", &nets.encoder, &x),
        ("decoder", &nets.decoder, &z),
        ("discriminator", &nets.discriminator, &x),
        ("image discriminator", &image, &img),
    ] {
        let c = check_network(net, input, 1e-5, 300, 9)?;
        println!("{name:<20} {} entries, max relative error {:.2e}", c.checked, c.max_rel());
    }
    Ok(())
}
