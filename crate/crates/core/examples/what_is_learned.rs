//! Samples many scenes and compares their layout statistics with the
//! training corpus: where stands sit relative to beds, how they face, and
//! where the most common categories are placed in the room.
//!
//! `cargo run --release --example what_is_learned -- <checkpoint> [out_dir]`

use std::path::PathBuf;

use scenesynth::cli::most_frequent;
use scenesynth::synthesis::{absolute_heatmap, distribution_distance, pair_stats, sample_scenes, PairStatsSpec};
use scenesynth::topview::write_pgm_values;
use scenesynth::trainer::load_checkpoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: what_is_learned <checkpoint> [out_dir]  (train one with the train_desk example)");
        std::process::exit(1);
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/learned".into()));
    std::fs::create_dir_all(&out)?;

    let state = load_checkpoint(ckpt.as_ref())?;
    let model = &state.model;
    let cfg = &model.category;
    let generated = sample_scenes(model, 2000, 11)?;

    for (a, b) in [("bed", "stand"), ("bed", "television"), ("desk", "chair")] {
        let (Some(anchor), Some(second)) = (cfg.index_of(a), cfg.index_of(b)) else {
            continue;
        };
        let spec = PairStatsSpec { anchor, second, grid: 16, extent: 3.0 };
        let g = pair_stats(&generated, &spec)?;
        let t = pair_stats(&state.inputs, &spec)?;
        println!(
            "{a} -> {b}: {} generated pairs, position TV {:.3}, orientation TV {:.3}",
            g.pairs,
            distribution_distance(&g.heatmap.values, &t.heatmap.values)?,
            distribution_distance(&g.angles.bins, &t.angles.bins)?
        );
        std::fs::write(out.join(format!("{a}_{b}_generated.pgm")), write_pgm_values(&g.heatmap.values, 16, 16))?;
        std::fs::write(out.join(format!("{a}_{b}_training.pgm")), write_pgm_values(&t.heatmap.values, 16, 16))?;
    }
    for k in most_frequent(&state.inputs, 2) {
        let g = absolute_heatmap(&generated, k, &model.window, 16)?;
        let t = absolute_heatmap(&state.inputs, k, &model.window, 16)?;
        println!("{} placement TV {:.3}", cfg.categories[k].name, distribution_distance(&g.values, &t.values)?);
    }
    Ok(())
}
