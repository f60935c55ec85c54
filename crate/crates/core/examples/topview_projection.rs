//! Projects a generated bedroom to its truncated-distance top view and writes
//! the image next to a vector drawing of the same scene.
//!
//! `cargo run --example topview_projection -- [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use scenesynth::corpus::{bedroom_config, default_bedroom_spec, generate_corpus};
use scenesynth::topview::{project, render_svg, write_pgm, ProjectionConfig, ViewWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/topview".into()));
    std::fs::create_dir_all(&out)?;

    let cfg = Arc::new(bedroom_config(4)?);
    let mut spec = default_bedroom_spec();
    spec.n = 4;
    let corpus = generate_corpus(&spec, &cfg)?;
    let window = ViewWindow::fit(&corpus.truth.canonical, 128)?;

    for (i, scene) in corpus.truth.canonical.iter().enumerate() {
        let img = project(scene, &window, &ProjectionConfig::default());
        let (lo, hi) = img.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!("scene {i}: {} objects, values in [{lo:.3}, {hi:.3}]", scene.num_existing());
        std::fs::write(out.join(format!("scene_{i}.pgm")), write_pgm(&img))?;
        std::fs::write(out.join(format!("scene_{i}.svg")), render_svg(scene, &window))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
