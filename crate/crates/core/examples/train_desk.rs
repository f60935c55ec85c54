//! Generates and aligns a bedroom corpus, then trains the generator on it.
//! Checkpoints land in the output directory and feed the `interpolate`,
//! `complete_scene` and `what_is_learned` examples.
//!
//! `cargo run --release --example train_desk -- [out_dir] [n] [outer]`

use std::path::PathBuf;
use std::sync::Arc;

use scenesynth::align::{align_corpus, AlignConfig};
use scenesynth::corpus::{bedroom_config, default_bedroom_spec, generate_corpus};
use scenesynth::trainer::{checkpoint_path, init_state, run, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/train".into()));
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(120);
    let outer: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);

    let cfg = Arc::new(bedroom_config(4)?);
    let mut spec = default_bedroom_spec();
    spec.n = n;
    let corpus = generate_corpus(&spec, &cfg)?;
    let aligned = align_corpus(&corpus.scenes, &AlignConfig::with_k(0))?.aligned;

    let config = TrainConfig {
        t_outer: outer,
        t_inner: 4,
        seed: 1,
        ..Default::default()
    };
    let mut state = init_state(&aligned, &config)?;
    println!("initial reconstruction MSE {:.5}", state.reconstruction_mse()?);
    run(&mut state, Some(&out))?;
    for r in state.history.iter().filter(|r| r.term == "recon_mse" && r.phase == "eval") {
        println!("outer {} inner {}: MSE {:.5}", r.outer, r.inner, r.value);
    }
    println!("consistency increases: {}", state.consistency_violations);
    println!("final checkpoint: {}", checkpoint_path(&out, outer).display());
    Ok(())
}
