//! Generates a bedroom corpus with unknown poses and slot orders, aligns it,
//! and scores the recovered rotations against the hidden ones.
//!
//! `cargo run --release --example corpus_alignment -- [n]`

use std::sync::Arc;

use scenesynth::align::{align_corpus, AlignConfig};
use scenesynth::corpus::{bedroom_config, default_bedroom_spec, generate_corpus};
use scenesynth::scene::wrap_angle;

fn main() -> scenesynth::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let cfg = Arc::new(bedroom_config(4)?);
    let mut spec = default_bedroom_spec();
    spec.n = n;
    let corpus = generate_corpus(&spec, &cfg)?;
    let out = align_corpus(&corpus.scenes, &AlignConfig::with_k(0))?;

    // The recovered frame is only defined up to one global motion.
    let offsets: Vec<f64> = out
        .poses
        .motions
        .iter()
        .zip(&corpus.truth.motions)
        .map(|(e, t)| wrap_angle(e.theta + t.theta))
        .collect();
    let (s, c) = offsets.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let gauge = s.atan2(c);
    let errors: Vec<f64> = offsets.iter().map(|a| wrap_angle(a - gauge).abs().to_degrees()).collect();
    let within = errors.iter().filter(|&&e| e < 3.0).count();

    let r = &out.report;
    println!("{} scenes, {} edges (k = {})", r.num_scenes, r.num_edges, r.k);
    println!("rotation residual median {:.2} deg, max {:.2} deg", r.rotation_median_residual.to_degrees(), r.rotation_max_residual.to_degrees());
    println!("{within}/{n} scenes within 3 deg, worst {:.2} deg", errors.iter().fold(0.0f64, |a, &b| a.max(b)));
    Ok(())
}
