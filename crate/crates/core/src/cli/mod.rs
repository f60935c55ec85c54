//! The `scenesynth` command line: argument parsing, run configuration and one
//! driver per subcommand.
//!
//! Settings are resolved in three layers: built-in defaults, then the JSON
//! file given by `--config` (any subset of [`RunConfig`]), then flags. The
//! resolved configuration is written to `run_config.json` in the output
//! directory before any work starts.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::align::align_corpus;
use crate::corpus::generate_corpus;
use crate::error::Error;
use crate::scene::{read_corpus_jsonl, read_scene_json, write_corpus_jsonl, write_scene_json, SceneMatrix};
use crate::synthesis::{
    absolute_heatmap, complete, distribution_distance, interpolate, pair_stats, prior_sample, sample_scenes, synth,
    CompletionMask, PairStatsSpec,
};
use crate::topview::{project, render_svg, write_pgm, write_pgm_values, ProjectionConfig, ViewWindow};
use crate::trainer::{self, load_checkpoint, TrainState};

pub use config::{
    merge_json, CorpusSection, EvalSection, PairSpecNames, RenderSection, RunConfig, SynthSection, RUN_CONFIG_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scenesynth", version, about = "Generate, align, learn and synthesize 3D object arrangements")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, visible_alias = "out-dir")]
    out: Option<PathBuf>,
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known poses and slot orders.
    GenCorpus(GenCorpusArgs),
    /// Align a corpus into a common frame and slot order.
    Align(AlignArgs),
    /// Train the generator on an aligned corpus.
    Train(TrainArgs),
    /// Decode scenes from prior samples.
    Synth(SynthArgs),
    /// Interpolate between two scenes in latent space.
    Interp(InterpArgs),
    /// Complete a partial scene.
    Complete(CompleteArgs),
    /// Render scenes as SVG footprints and PGM top views.
    Render(RenderArgs),
    /// Compare generated and training distributions.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    /// `bedroom`, `livingroom`, or a JSON corpus spec file.
    #[arg(long, default_value = "bedroom")]
    spec: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    descriptor_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// JSON-lines corpus.
    #[arg(long)]
    corpus: PathBuf,
    /// Neighbors per scene in the alignment graph.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// JSON-lines corpus of aligned scenes.
    #[arg(long)]
    corpus: PathBuf,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    t_outer: Option<usize>,
    #[arg(long)]
    t_inner: Option<usize>,
    #[arg(long)]
    z_dim: Option<usize>,
    #[arg(long)]
    width_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of scenes.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct InterpArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scene JSON of the first endpoint.
    #[arg(long)]
    a: PathBuf,
    /// Scene JSON of the second endpoint.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct CompleteArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scene JSON holding the fixed objects.
    #[arg(long)]
    partial: PathBuf,
    /// JSON mask: `{"columns": [..]}` or `{"rows": r, "entries": [..]}`.
    /// Defaults to the columns holding an object.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Scene JSON or JSON-lines corpus.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// `cx,cy,half_extent` in meters.
    #[arg(long, value_parser = parse_window)]
    window: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Reference corpus; defaults to the checkpoint's training scenes.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON file with the `eval` section of the run configuration.
    #[arg(long)]
    stats_spec: Option<PathBuf>,
    /// Number of generated scenes.
    #[arg(long)]
    n: Option<usize>,
}

fn parse_window(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, h] if h > 0.0 => Ok([x, y, h]),
        _ => Err("expected cx,cy,half_extent with half_extent > 0".into()),
    }
}

/// Failure of one invocation, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn existing_file(flag: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: no such file `{}`", path.display())))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(p) = &cli.common.config {
        existing_file("--config", p)?;
    }
    let mut cfg = RunConfig::from_file(cli.common.config.as_deref())?;
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.common.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.common.out {
        cfg.out = o.clone();
    }
    if cfg.threads > 0 {
        // Fails only if a pool already exists, e.g. when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(cfg, a),
        Command::Align(a) => align(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Synth(a) => synth_cmd(cfg, a),
        Command::Interp(a) => interp(cfg, a),
        Command::Complete(a) => complete_cmd(cfg, a),
        Command::Render(a) => render(cfg, a),
        Command::Eval(a) => eval(cfg, a),
    }
}

fn start(cfg: &mut RunConfig, command: &str, inputs: &[(&str, &Path)]) -> CliResult<()> {
    cfg.command = command.into();
    cfg.inputs = inputs.iter().map(|(k, p)| (k.to_string(), p.to_path_buf())).collect();
    cfg.resolve()?;
    Ok(())
}

fn begin_output(cfg: &RunConfig) -> CliResult<()> {
    cfg.write(&cfg.out)?;
    info!("{}: writing to {}", cfg.command, cfg.out.display());
    Ok(())
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn read_corpus(flag: &str, path: &Path) -> CliResult<Vec<SceneMatrix>> {
    existing_file(flag, path)?;
    Ok(read_corpus_jsonl(&fs::read(path)?)?)
}

fn read_checkpoint(path: &Path) -> CliResult<TrainState> {
    existing_file("--checkpoint", path)?;
    Ok(load_checkpoint(path)?)
}

/// Reads a scene and attaches the model's category handle; the vocabularies
/// must agree.
fn read_model_scene(flag: &str, path: &Path, state: &TrainState) -> CliResult<SceneMatrix> {
    existing_file(flag, path)?;
    let mut scene = read_scene_json(&fs::read(path)?)?;
    if *scene.config != *state.model.category {
        return Err(Error::Config(format!("{flag}: scene categories differ from the checkpoint's")).into());
    }
    scene.config = state.model.category.clone();
    Ok(scene)
}

fn gen_corpus(mut cfg: RunConfig, a: GenCorpusArgs) -> CliResult<()> {
    match a.spec.as_str() {
        "bedroom" | "livingroom" => {
            cfg.corpus.room = a.spec.clone();
            cfg.corpus.spec = None;
            cfg.corpus.categories = None;
        }
        path => {
            let p = Path::new(path);
            existing_file("--spec", p)?;
            let mut base = serde_json::to_value(&cfg.corpus)?;
            let over: serde_json::Value = serde_json::from_slice(&fs::read(p)?).map_err(|e| Error::Parse {
                path: path.into(),
                message: e.to_string(),
            })?;
            merge_json(&mut base, &over);
            cfg.corpus = serde_json::from_value(base).map_err(|e| Error::Parse {
                path: path.into(),
                message: e.to_string(),
            })?;
        }
    }
    if let Some(d) = a.descriptor_dim {
        cfg.corpus.descriptor_dim = d;
        if let Some(c) = &mut cfg.corpus.categories {
            c.descriptor_dim = d;
        }
    }
    start(&mut cfg, "gen-corpus", &[])?;
    if let Some(n) = a.n {
        cfg.corpus.spec.as_mut().expect("resolved").n = n;
    }
    let categories = Arc::new(cfg.corpus.categories.clone().expect("resolved"));
    let spec = cfg.corpus.spec.clone().expect("resolved");
    spec.validate(&categories)?;
    begin_output(&cfg)?;
    let corpus = generate_corpus(&spec, &categories)?;
    write(&cfg.out, "corpus.jsonl", &write_corpus_jsonl(&corpus.scenes))?;
    write(&cfg.out, "canonical.jsonl", &write_corpus_jsonl(&corpus.truth.canonical))?;
    let truth = json!({ "motions": corpus.truth.motions, "perms": corpus.truth.perms });
    write(&cfg.out, "truth.json", &serde_json::to_vec_pretty(&truth)?)?;
    info!("generated {} scenes", corpus.scenes.len());
    Ok(())
}

fn align(mut cfg: RunConfig, a: AlignArgs) -> CliResult<()> {
    start(&mut cfg, "align", &[("corpus", &a.corpus)])?;
    if let Some(k) = a.k {
        cfg.align.k = k;
    }
    let scenes = read_corpus("--corpus", &a.corpus)?;
    begin_output(&cfg)?;
    let out = align_corpus(&scenes, &cfg.align)?;
    write(&cfg.out, "aligned.jsonl", &write_corpus_jsonl(&out.aligned))?;
    write(&cfg.out, "poses.json", &serde_json::to_vec_pretty(&out.poses)?)?;
    write(&cfg.out, "report.json", &serde_json::to_vec_pretty(&out.report)?)?;
    info!(
        "aligned {} scenes over {} edges, median rotation residual {:.3e} rad",
        out.aligned.len(),
        out.report.num_edges,
        out.report.rotation_median_residual
    );
    Ok(())
}

fn train(mut cfg: RunConfig, a: TrainArgs) -> CliResult<()> {
    let mut inputs = vec![("corpus", a.corpus.as_path())];
    if let Some(r) = &a.resume {
        inputs.push(("resume", r.as_path()));
    }
    start(&mut cfg, "train", &inputs)?;
    let t = &mut cfg.train;
    if let Some(v) = a.t_outer {
        t.t_outer = v;
    }
    if let Some(v) = a.t_inner {
        t.t_inner = v;
    }
    if let Some(v) = a.z_dim {
        t.z_dim = v;
    }
    if let Some(v) = a.width_scale {
        t.width_scale = v;
    }
    cfg.train.validate()?;
    let scenes = read_corpus("--corpus", &a.corpus)?;
    let state = match &a.resume {
        Some(p) => {
            existing_file("--resume", p)?;
            let mut s = load_checkpoint(p)?;
            if s.inputs != scenes {
                return Err(CliError::Usage("--resume: checkpoint was trained on a different corpus".into()));
            }
            begin_output(&cfg)?;
            trainer::run(&mut s, Some(&cfg.out))?;
            s
        }
        None => {
            begin_output(&cfg)?;
            trainer::train(&scenes, &cfg.train, Some(&cfg.out))?
        }
    };
    let summary = json!({
        "outer": state.outer,
        "recon_mse": state.reconstruction_mse()?,
        "consistency_violations": state.consistency_violations,
        "generator_phases": state.generator_phases,
        "discriminator_phases": state.discriminator_phases,
    });
    write(&cfg.out, "summary.json", &serde_json::to_vec_pretty(&summary)?)?;
    Ok(())
}

fn synth_cmd(mut cfg: RunConfig, a: SynthArgs) -> CliResult<()> {
    start(&mut cfg, "synth", &[("checkpoint", &a.checkpoint)])?;
    if let Some(n) = a.n {
        cfg.synth.n = n;
    }
    let state = read_checkpoint(&a.checkpoint)?;
    begin_output(&cfg)?;
    let model = &state.model;
    let mut codes = Vec::with_capacity(cfg.synth.n);
    for i in 0..cfg.synth.n {
        let z = prior_sample(model.z_dim, cfg.seed, i as u64);
        let scene = synth(model, &z)?;
        write(&cfg.out, &format!("scene_{i:04}.json"), &write_scene_json(&scene))?;
        write(&cfg.out, &format!("scene_{i:04}.svg"), &render_svg(&scene, &model.window))?;
        codes.push(z);
    }
    write(&cfg.out, "codes.json", &serde_json::to_vec(&codes)?)?;
    Ok(())
}

fn interp(mut cfg: RunConfig, a: InterpArgs) -> CliResult<()> {
    start(&mut cfg, "interp", &[("checkpoint", &a.checkpoint), ("a", &a.a), ("b", &a.b)])?;
    if let Some(s) = a.steps {
        cfg.synth.steps = s;
    }
    let state = read_checkpoint(&a.checkpoint)?;
    let sa = read_model_scene("--a", &a.a, &state)?;
    let sb = read_model_scene("--b", &a.b, &state)?;
    if cfg.synth.steps < 2 {
        return Err(CliError::Usage(format!("--steps must be at least 2, got {}", cfg.synth.steps)));
    }
    begin_output(&cfg)?;
    let frames = interpolate(&state.model, &sa, &sb, cfg.synth.steps)?;
    for (i, f) in frames.iter().enumerate() {
        write(&cfg.out, &format!("frame_{i:03}.json"), &write_scene_json(f))?;
        write(&cfg.out, &format!("frame_{i:03}.svg"), &render_svg(f, &state.model.window))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MaskFile {
    Columns { columns: Vec<usize> },
    Full(CompletionMask),
}

#[derive(Serialize)]
struct CompletionSummary<'a> {
    z: &'a [f64],
    data_term: f64,
    objective: f64,
    start_objectives: &'a [f64],
    best_restart: usize,
    motion: &'a crate::scene::RigidMotion,
    perms: &'a crate::scene::PermutationSet,
}

fn complete_cmd(mut cfg: RunConfig, a: CompleteArgs) -> CliResult<()> {
    let mut inputs = vec![("checkpoint", a.checkpoint.as_path()), ("partial", a.partial.as_path())];
    if let Some(m) = &a.mask {
        inputs.push(("mask", m.as_path()));
    }
    start(&mut cfg, "complete", &inputs)?;
    let c = &mut cfg.complete;
    if let Some(v) = a.alpha {
        c.alpha = v;
    }
    if let Some(v) = a.restarts {
        c.restarts = v;
    }
    if let Some(v) = a.iters {
        c.iters = v;
    }
    cfg.complete.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let state = read_checkpoint(&a.checkpoint)?;
    let partial = read_model_scene("--partial", &a.partial, &state)?;
    let mask = match &a.mask {
        None => CompletionMask::existing(&partial),
        Some(p) => {
            existing_file("--mask", p)?;
            let parsed: MaskFile = serde_json::from_slice(&fs::read(p)?).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            match parsed {
                MaskFile::Columns { columns } => CompletionMask::columns(&partial.config, &columns)?,
                MaskFile::Full(m) => m,
            }
        }
    };
    mask.validate(&partial.config).map_err(|e| CliError::Usage(format!("--mask: {e}")))?;
    begin_output(&cfg)?;
    let r = complete(&state.model, &partial, &mask, &cfg.complete)?;
    let window = &state.model.window;
    write(&cfg.out, "completed.json", &write_scene_json(&r.scene))?;
    write(&cfg.out, "completed.svg", &render_svg(&r.scene, window))?;
    write(&cfg.out, "partial.svg", &render_svg(&partial, window))?;
    let summary = CompletionSummary {
        z: &r.z,
        data_term: r.data_term,
        objective: r.objective,
        start_objectives: &r.start_objectives,
        best_restart: r.best_restart,
        motion: &r.motion,
        perms: &r.perms,
    };
    write(&cfg.out, "completion.json", &serde_json::to_vec_pretty(&summary)?)?;
    info!("completion data term {:.3e}, objective {:.3e}", r.data_term, r.objective);
    Ok(())
}

fn render(mut cfg: RunConfig, a: RenderArgs) -> CliResult<()> {
    start(&mut cfg, "render", &[("scene", &a.scene)])?;
    let r = &mut cfg.render;
    if let Some(v) = a.resolution {
        r.resolution = v;
    }
    if let Some(v) = a.delta {
        r.delta = v;
    }
    if let Some([x, y, h]) = a.window {
        r.window = Some(ViewWindow::new([x, y], h, r.resolution).map_err(|e| CliError::Usage(format!("--window: {e}")))?);
    }
    if !(cfg.render.delta > 0.0) || cfg.render.resolution == 0 {
        return Err(CliError::Usage("--delta and --resolution must be positive".into()));
    }
    let scenes = read_corpus("--scene", &a.scene)?;
    if scenes.is_empty() {
        return Err(CliError::Usage(format!("--scene: `{}` holds no scenes", a.scene.display())));
    }
    let window = match cfg.render.window {
        Some(mut w) => {
            w.resolution = cfg.render.resolution;
            w
        }
        None => ViewWindow::fit(&scenes, cfg.render.resolution)?,
    };
    cfg.render.window = Some(window);
    begin_output(&cfg)?;
    let pcfg = ProjectionConfig {
        delta: cfg.render.delta,
        fill_interior: cfg.render.fill_interior,
        normalize_class_constants: cfg.render.normalize_class_constants,
    };
    let stem = a.scene.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    for (i, s) in scenes.iter().enumerate() {
        let name = if scenes.len() == 1 { stem.to_string() } else { format!("{stem}_{i:04}") };
        write(&cfg.out, &format!("{name}.svg"), &render_svg(s, &window))?;
        write(&cfg.out, &format!("{name}.pgm"), &write_pgm(&project(s, &window, &pcfg)))?;
    }
    Ok(())
}

fn category_index(state: &TrainState, name: &str) -> CliResult<usize> {
    state
        .model
        .category
        .index_of(name)
        .ok_or_else(|| CliError::Usage(format!("--stats-spec: unknown category `{name}`")))
}

fn eval(mut cfg: RunConfig, a: EvalArgs) -> CliResult<()> {
    let mut inputs = vec![("checkpoint", a.checkpoint.as_path())];
    if let Some(c) = &a.corpus {
        inputs.push(("corpus", c.as_path()));
    }
    if let Some(s) = &a.stats_spec {
        inputs.push(("stats_spec", s.as_path()));
        existing_file("--stats-spec", s)?;
        let mut base = serde_json::to_value(&cfg.eval)?;
        let over: serde_json::Value = serde_json::from_slice(&fs::read(s)?).map_err(|e| Error::Parse {
            path: s.display().to_string(),
            message: e.to_string(),
        })?;
        merge_json(&mut base, &over);
        cfg.eval = serde_json::from_value(base).map_err(|e| CliError::Usage(format!("--stats-spec: {e}")))?;
    }
    start(&mut cfg, "eval", &inputs)?;
    if let Some(n) = a.n {
        cfg.eval.samples = n;
    }
    if cfg.eval.grid < 8 || !(cfg.eval.extent > 0.0) {
        return Err(CliError::Usage("--stats-spec: grid must be at least 8 and extent positive".into()));
    }
    let state = read_checkpoint(&a.checkpoint)?;
    let reference = match &a.corpus {
        Some(p) => {
            let mut scenes = read_corpus("--corpus", p)?;
            for s in &mut scenes {
                if *s.config != *state.model.category {
                    return Err(Error::Config("--corpus: categories differ from the checkpoint's".into()).into());
                }
                s.config = state.model.category.clone();
            }
            scenes
        }
        None => state.inputs.clone(),
    };
    let pairs = cfg
        .eval
        .pairs
        .iter()
        .map(|p| Ok((category_index(&state, &p.anchor)?, category_index(&state, &p.second)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let absolute: Vec<usize> = if cfg.eval.absolute.is_empty() {
        most_frequent(&reference, cfg.eval.top)
    } else {
        cfg.eval.absolute.iter().map(|n| category_index(&state, n)).collect::<CliResult<_>>()?
    };
    begin_output(&cfg)?;
    let model = &state.model;
    let generated = sample_scenes(model, cfg.eval.samples, cfg.seed)?;
    let names = &model.category.categories;
    let grid = cfg.eval.grid;
    let mut pair_out = Vec::new();
    for (anchor, second) in pairs {
        let spec = PairStatsSpec { anchor, second, grid, extent: cfg.eval.extent };
        let g = pair_stats(&generated, &spec)?;
        let t = pair_stats(&reference, &spec)?;
        let tag = format!("{}_{}", slug(&names[anchor].name), slug(&names[second].name));
        write(&cfg.out, &format!("pair_{tag}_generated.pgm"), &write_pgm_values(&g.heatmap.values, grid, grid))?;
        write(&cfg.out, &format!("pair_{tag}_reference.pgm"), &write_pgm_values(&t.heatmap.values, grid, grid))?;
        pair_out.push(json!({
            "anchor": names[anchor].name,
            "second": names[second].name,
            "pairs_generated": g.pairs,
            "pairs_reference": t.pairs,
            "heatmap_tv": distribution_distance(&g.heatmap.values, &t.heatmap.values)?,
            "angle_tv": distribution_distance(&g.angles.bins, &t.angles.bins)?,
            "angles_generated": g.angles.bins,
            "angles_reference": t.angles.bins,
        }));
    }
    let mut abs_out = Vec::new();
    for k in absolute {
        let g = absolute_heatmap(&generated, k, &model.window, grid)?;
        let t = absolute_heatmap(&reference, k, &model.window, grid)?;
        let tag = slug(&names[k].name);
        write(&cfg.out, &format!("abs_{tag}_generated.pgm"), &write_pgm_values(&g.values, grid, grid))?;
        write(&cfg.out, &format!("abs_{tag}_reference.pgm"), &write_pgm_values(&t.values, grid, grid))?;
        abs_out.push(json!({
            "category": names[k].name,
            "count_generated": g.count,
            "count_reference": t.count,
            "tv": distribution_distance(&g.values, &t.values)?,
        }));
    }
    for (i, s) in generated.iter().take(cfg.eval.renders).enumerate() {
        write(&cfg.out, &format!("sample_{i:03}.svg"), &render_svg(s, &model.window))?;
    }
    let stats = json!({
        "samples": generated.len(),
        "reference": reference.len(),
        "pairs": pair_out,
        "absolute": abs_out,
    });
    write(&cfg.out, "stats.json", &serde_json::to_vec_pretty(&stats)?)?;
    Ok(())
}

/// Indices of the `top` categories with the most objects, ties to the lower
/// index.
pub fn most_frequent(scenes: &[SceneMatrix], top: usize) -> Vec<usize> {
    let Some(first) = scenes.first() else {
        return Vec::new();
    };
    let mut counts = vec![0usize; first.config.num_categories()];
    for s in scenes {
        for (c, n) in counts.iter_mut().zip(s.category_counts()) {
            *c += n;
        }
    }
    let mut order: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(top);
    order
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}
