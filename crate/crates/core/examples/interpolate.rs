//! Walks the latent line between two generated scenes and draws each frame.
//!
//! `cargo run --release --example interpolate -- <checkpoint> [out_dir]`

use std::path::PathBuf;

use scenesynth::synthesis::{interpolate, sample_scenes};
use scenesynth::topview::render_svg;
use scenesynth::trainer::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: interpolate <checkpoint> [out_dir]  (train one with the train_desk example)");
        std::process::exit(1);
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/interp".into()));
    std::fs::create_dir_all(&out)?;

    let model = load_checkpoint(ckpt.as_ref())?.model;
    let ends = sample_scenes(&model, 2, 5)?;
    let frames = interpolate(&model, &ends[0], &ends[1], 8)?;
    for (i, f) in frames.iter().enumerate() {
        let names: Vec<&str> = (0..f.columns.len())
            .filter(|&j| f.columns[j].exists())
            .map(|j| model.category.categories[model.category.column_categories()[j]].name.as_str())
            .collect();
        println!("frame {i}: {}", names.join(", "));
        std::fs::write(out.join(format!("frame_{i:02}.svg")), render_svg(f, &model.window))?;
    }
    Ok(())
}
