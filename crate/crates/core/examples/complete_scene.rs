//! Fixes one object of a training scene and lets the model fill in the rest.
//!
//! `cargo run --release --example complete_scene -- <checkpoint> [out_dir]`

use std::path::PathBuf;

use scenesynth::scene::SceneMatrix;
use scenesynth::synthesis::{complete, CompletionConfig, CompletionMask};
use scenesynth::topview::render_svg;
use scenesynth::trainer::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: complete_scene <checkpoint> [out_dir]  (train one with the train_desk example)");
        std::process::exit(1);
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/complete".into()));
    std::fs::create_dir_all(&out)?;

    let state = load_checkpoint(ckpt.as_ref())?;
    let model = &state.model;
    let cfg = &model.category;
    let beds = cfg.block_range(cfg.index_of("bed").ok_or("checkpoint has no bed category")?);
    let (source, bed) = state
        .inputs
        .iter()
        .find_map(|s| beds.clone().find(|&j| s.columns[j].exists()).map(|j| (s, j)))
        .ok_or("no scene with a bed")?;

    let mut partial = SceneMatrix::empty(source.config.clone());
    partial.columns[bed] = source.columns[bed].clone();
    let mask = CompletionMask::columns(cfg, &[bed])?;
    let r = complete(model, &partial, &mask, &CompletionConfig::default())?;

    println!("kept-object residual {:.2e}, objective {:.4}", r.data_term, r.objective);
    println!("restart starts: {:?}, best {}", r.start_objectives.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>(), r.best_restart);
    println!("completed scene has {} objects", r.scene.num_existing());
    std::fs::write(out.join("partial.svg"), render_svg(&partial, &model.window))?;
    std::fs::write(out.join("completed.svg"), render_svg(&r.scene, &model.window))?;
    Ok(())
}
