//! Alternating minimization over networks, latent scenes, slot permutations,
//! rigid motions and the two critics.
//!
//! Every stochastic draw comes from a stream keyed by the run seed and the
//! loop counters, so a run resumed from a checkpoint continues exactly as the
//! uninterrupted run would.

mod model;
mod objective;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{lipschitz_control, AdamConfig, AdamState};
use crate::rng;
use crate::scene::{
    apply_motion, apply_permutation, solve_assignment, solve_procrustes, CategoryConfig, PermutationSet, RigidMotion,
    SceneMatrix,
};
use crate::topview::{ProjectionConfig, ViewWindow};

pub use model::{Model, ModelSpec};
pub use objective::{
    generator_objective, generator_sample, latent_objective, GeneratorSample, GeneratorTerms, LatentTerms, Weights,
};

const PHASE_GENERATOR: u64 = 1;
const PHASE_DISCRIMINATOR: u64 = 2;
const CHECKPOINT_MAGIC: &str = "scenesynth-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub kl_weight: f64,
    pub latent_recon_weight: f64,
    pub t_inner: usize,
    pub t_outer: usize,
    pub gen_epochs: usize,
    pub disc_epochs: usize,
    pub latent_iters: usize,
    pub latent_tol: f64,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_latent: f64,
    pub lr_critic: f64,
    pub clip: f64,
    pub z_dim: usize,
    pub width_scale: f64,
    pub sc_h: usize,
    pub image_channels: usize,
    pub resolution: usize,
    pub delta: f64,
    pub normalize_class_constants: bool,
    /// Fitted to the training scenes when absent.
    pub window: Option<ViewWindow>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            gamma: 100.0,
            kl_weight: 1.0,
            latent_recon_weight: 1.0,
            t_inner: 10,
            t_outer: 10,
            gen_epochs: 2,
            disc_epochs: 10,
            latent_iters: 12,
            latent_tol: 1e-6,
            batch_size: 32,
            lr_generator: 1e-3,
            lr_latent: 1e-3,
            lr_critic: 5e-4,
            clip: 0.01,
            z_dim: 10,
            width_scale: 0.1,
            sc_h: 4,
            image_channels: 4,
            resolution: 64,
            delta: 0.5,
            normalize_class_constants: true,
            window: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("lr_generator", self.lr_generator),
            ("lr_latent", self.lr_latent),
            ("lr_critic", self.lr_critic),
            ("clip", self.clip),
            ("width_scale", self.width_scale),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("kl_weight", self.kl_weight)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.batch_size == 0 || self.z_dim == 0 || self.sc_h == 0 || self.image_channels == 0 {
            return Err(Error::Config("batch_size, z_dim, sc_h and image_channels must be positive".into()));
        }
        if self.resolution % 16 != 0 {
            return Err(Error::Config(format!("resolution {} is not a multiple of 16", self.resolution)));
        }
        Ok(())
    }

    pub fn weights(&self) -> Weights {
        Weights {
            lambda: self.lambda,
            mu: self.mu,
            gamma: self.gamma,
            kl: self.kl_weight,
            latent_recon: self.latent_recon_weight,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            z_dim: self.z_dim,
            width_scale: self.width_scale,
            sc_h: self.sc_h,
            image_channels: self.image_channels,
        }
    }

    pub fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            delta: self.delta,
            fill_interior: false,
            normalize_class_constants: self.normalize_class_constants,
        }
    }
}

/// One row of the loss trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub outer: usize,
    pub inner: usize,
    pub phase: String,
    pub term: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub encoder: AdamState,
    pub decoder: AdamState,
    pub discriminator: AdamState,
    pub image_discriminator: AdamState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub model: Model,
    pub optimizers: Optimizers,
    /// Input scenes `M_i`.
    pub inputs: Vec<SceneMatrix>,
    /// Flattened latent scenes `M̄_i`.
    pub latent: Vec<Vec<f64>>,
    pub motions: Vec<RigidMotion>,
    pub perms: Vec<PermutationSet>,
    /// Completed outer iterations.
    pub outer: usize,
    /// Completed inner iterations of the current outer iteration.
    pub inner: usize,
    pub generator_phases: usize,
    pub discriminator_phases: usize,
    /// Scene-level increases of the consistency term seen in the
    /// permutation and transform steps.
    pub consistency_violations: usize,
    pub history: Vec<LossRecord>,
}

/// Sets up the state: latent scenes are the inputs, motions and permutations
/// are identities, networks get He-uniform weights.
pub fn init_state(scenes: &[SceneMatrix], config: &TrainConfig) -> Result<TrainState> {
    config.validate()?;
    let first = scenes
        .first()
        .ok_or_else(|| Error::InvalidInput("training needs at least one scene".into()))?;
    let category: Arc<CategoryConfig> = first.config.clone();
    if let Some(bad) = scenes.iter().position(|s| !s.same_config(first)) {
        return Err(Error::Config(format!("scene {bad} uses a different category configuration")));
    }
    let window = match config.window {
        Some(w) => {
            if w.resolution != config.resolution {
                return Err(Error::Config(format!(
                    "window resolution {} differs from configured resolution {}",
                    w.resolution, config.resolution
                )));
            }
            w
        }
        None => ViewWindow::fit(scenes, config.resolution)?,
    };
    let model = Model::build(category.clone(), &config.model_spec(), window, config.projection(), config.seed)?;
    let adam = |n: usize, lr: f64| AdamState::new(n, AdamConfig::with_lr(lr));
    let optimizers = Optimizers {
        encoder: adam(model.encoder.num_params(), config.lr_generator),
        decoder: adam(model.decoder.num_params(), config.lr_generator),
        discriminator: adam(model.discriminator.num_params(), config.lr_critic),
        image_discriminator: adam(model.image_discriminator.num_params(), config.lr_critic),
    };
    let n = scenes.len();
    Ok(TrainState {
        config: config.clone(),
        model,
        optimizers,
        inputs: scenes.iter().map(|s| SceneMatrix { config: category.clone(), columns: s.columns.clone() }).collect(),
        latent: scenes.iter().map(|s| s.to_flat()).collect(),
        motions: vec![RigidMotion::identity(); n],
        perms: vec![PermutationSet::identity(&category); n],
        outer: 0,
        inner: 0,
        generator_phases: 0,
        discriminator_phases: 0,
        consistency_violations: 0,
        history: Vec::new(),
    })
}

fn standard_normal(r: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

fn shuffled(n: usize, seed: u64, path: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, path));
    order
}

impl TrainState {
    pub fn num_scenes(&self) -> usize {
        self.inputs.len()
    }

    fn record(&mut self, phase: &str, term: &str, value: f64) {
        self.history.push(LossRecord {
            outer: self.outer,
            inner: self.inner,
            phase: phase.into(),
            term: term.into(),
            value,
        });
    }

    /// `(T_i ∘ S_i)(M_i)`.
    pub fn target(&self, i: usize) -> Result<SceneMatrix> {
        Ok(apply_motion(&apply_permutation(&self.inputs[i], &self.perms[i])?, &self.motions[i]))
    }

    pub fn latent_scene(&self, i: usize) -> Result<SceneMatrix> {
        self.model.scene(&self.latent[i])
    }

    /// `‖M̄_i − (T_i ∘ S_i)(M_i)‖²`.
    pub fn consistency(&self, i: usize) -> Result<f64> {
        let t = self.target(i)?.to_flat();
        Ok(self.latent[i].iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum())
    }

    pub fn consistency_all(&self) -> Result<Vec<f64>> {
        (0..self.num_scenes()).into_par_iter().map(|i| self.consistency(i)).collect()
    }

    /// Mean per-entry autoencoding error of the latent scenes, using the
    /// encoder mean.
    pub fn reconstruction_mse(&self) -> Result<f64> {
        let errs = self
            .latent
            .par_iter()
            .map(|x| self.model.reconstruction_error(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(errs.iter().sum::<f64>() / (errs.len() * self.model.flat_len()) as f64)
    }

    /// Adam epochs on encoder and decoder.
    pub fn step_generator(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let w = cfg.weights();
        let (n, z_dim) = (self.num_scenes(), self.model.z_dim);
        for epoch in 0..cfg.gen_epochs {
            let key = [PHASE_GENERATOR, self.outer as u64, self.inner as u64, epoch as u64];
            let order = shuffled(n, cfg.seed, &key);
            let mut epoch_terms = GeneratorTerms::default();
            let mut batches = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let samples: Vec<GeneratorSample> = batch
                    .iter()
                    .map(|&i| {
                        let mut r = rng::stream(cfg.seed, &[key[0], key[1], key[2], key[3], i as u64]);
                        GeneratorSample {
                            x: self.latent[i].clone(),
                            noise: standard_normal(&mut r, z_dim),
                            z_fake: standard_normal(&mut r, z_dim),
                        }
                    })
                    .collect();
                let (terms, ge, gd) = generator_objective(&self.model, &w, &samples)?;
                if !(ge.is_finite() && gd.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "generator gradients at outer {} inner {}",
                        self.outer, self.inner
                    )));
                }
                self.optimizers.encoder.step_network(&mut self.model.encoder, &ge)?;
                self.optimizers.decoder.step_network(&mut self.model.decoder, &gd)?;
                epoch_terms.recon += terms.recon;
                epoch_terms.kl += terms.kl;
                epoch_terms.critic += terms.critic;
                epoch_terms.image_critic += terms.image_critic;
                epoch_terms.total += terms.total;
                batches += 1.0;
            }
            for (term, v) in [
                ("recon", epoch_terms.recon),
                ("kl", epoch_terms.kl),
                ("critic", epoch_terms.critic),
                ("image_critic", epoch_terms.image_critic),
                ("total", epoch_terms.total),
            ] {
                self.record("generator", term, v / batches);
            }
        }
        self.generator_phases += 1;
        Ok(())
    }

    /// Adam on each latent scene in isolation, with fresh moments per scene.
    pub fn step_latent(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let w = cfg.weights();
        let targets = (0..self.num_scenes())
            .map(|i| self.target(i).map(|t| t.to_flat()))
            .collect::<Result<Vec<_>>>()?;
        let model = &self.model;
        let results = self
            .latent
            .par_iter()
            .zip(&targets)
            .map(|(x0, target)| -> Result<(Vec<f64>, f64, f64, usize)> {
                let mut x = x0.clone();
                let mut adam = AdamState::new(x.len(), AdamConfig::with_lr(cfg.lr_latent));
                let (before, mut grad) = latent_objective(model, &w, &x, target)?;
                let mut iters = 0;
                for it in 0..cfg.latent_iters {
                    if it > 0 {
                        grad = latent_objective(model, &w, &x, target)?.1;
                    }
                    let step = adam.step(&mut x, &grad)?;
                    iters += 1;
                    if step < cfg.latent_tol {
                        break;
                    }
                }
                let after = latent_objective(model, &w, &x, target)?.0;
                Ok((x, before.total, after.total, iters))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = results.len() as f64;
        let (mut before, mut after, mut iters) = (0.0, 0.0, 0.0);
        for (i, (x, b, a, it)) in results.into_iter().enumerate() {
            self.latent[i] = x;
            before += b;
            after += a;
            iters += it as f64;
        }
        self.record("latent", "objective_before", before / n);
        self.record("latent", "objective_after", after / n);
        self.record("latent", "iterations", iters / n);
        Ok(())
    }

    /// Exact per-category slot assignment against `T_i⁻¹(M̄_i)`.
    pub fn step_permutations(&mut self) -> Result<()> {
        let before = self.consistency_all()?;
        let new_perms = (0..self.num_scenes())
            .into_par_iter()
            .map(|i| optimal_permutations(&self.latent_scene(i)?, &self.inputs[i], &self.motions[i]))
            .collect::<Result<Vec<_>>>()?;
        self.perms = new_perms;
        let after = self.consistency_all()?;
        self.check_monotone("permutations", &before, &after);
        Ok(())
    }

    /// Closed-form rigid motion onto `M̄_i` given `S_i(M_i)`.
    pub fn step_transforms(&mut self) -> Result<()> {
        let before = self.consistency_all()?;
        let new_motions = (0..self.num_scenes())
            .into_par_iter()
            .map(|i| {
                let source = apply_permutation(&self.inputs[i], &self.perms[i])?;
                if source.num_existing() == 0 {
                    warn!("scene {i} has no objects; keeping its motion");
                    return Ok(self.motions[i]);
                }
                let weights = vec![1.0; source.columns.len()];
                solve_procrustes(&self.latent_scene(i)?, &source, &weights)
            })
            .collect::<Result<Vec<_>>>()?;
        self.motions = new_motions;
        let after = self.consistency_all()?;
        self.check_monotone("transforms", &before, &after);
        Ok(())
    }

    fn check_monotone(&mut self, phase: &str, before: &[f64], after: &[f64]) {
        let violations = before
            .iter()
            .zip(after)
            .filter(|(b, a)| **a > **b + 1e-12 * (1.0 + **b))
            .count();
        if violations > 0 {
            warn!("{phase}: consistency increased on {violations} scenes");
        }
        self.consistency_violations += violations;
        let n = before.len() as f64;
        self.record(phase, "consistency_before", before.iter().sum::<f64>() / n);
        self.record(phase, "consistency_after", after.iter().sum::<f64>() / n);
        self.record(phase, "violations", violations as f64);
    }

    /// Critic epochs maximizing `E D(real) − E D(fake)` for both critics,
    /// clipping weights after every update.
    pub fn step_discriminators(&mut self) -> Result<()> {
        let cfg = self.config.clone();
        let (n, z_dim) = (self.num_scenes(), self.model.z_dim);
        let real_images = self
            .latent
            .par_iter()
            .map(|x| self.model.project_flat(x))
            .collect::<Result<Vec<_>>>()?;
        for epoch in 0..cfg.disc_epochs {
            let key = [PHASE_DISCRIMINATOR, self.outer as u64, epoch as u64];
            let order = shuffled(n, cfg.seed, &key);
            let (mut gap, mut igap, mut batches) = (0.0, 0.0, 0.0);
            for batch in order.chunks(cfg.batch_size) {
                let model = &self.model;
                let parts = batch
                    .par_iter()
                    .map(|&i| {
                        let mut r = rng::stream(cfg.seed, &[key[0], key[1], key[2], i as u64]);
                        let z = standard_normal(&mut r, z_dim);
                        let fake = model.decode(&z)?;
                        let fake_img = model.project_flat(&fake)?;
                        let d = &model.discriminator;
                        let di = &model.image_discriminator;
                        let mut gd = d.zero_grads();
                        let mut gi = di.zero_grads();
                        let (vr, tr) = d.forward(&self.latent[i])?;
                        d.backward_into(&tr, &[-1.0], &mut gd)?;
                        let (vf, tf) = d.forward(&fake)?;
                        d.backward_into(&tf, &[1.0], &mut gd)?;
                        let (ir, tir) = di.forward(&real_images[i])?;
                        di.backward_into(&tir, &[-1.0], &mut gi)?;
                        let (ifk, tif) = di.forward(&fake_img)?;
                        di.backward_into(&tif, &[1.0], &mut gi)?;
                        Ok((vr[0] - vf[0], ir[0] - ifk[0], gd, gi))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut gd = self.model.discriminator.zero_grads();
                let mut gi = self.model.image_discriminator.zero_grads();
                let (mut bg, mut big) = (0.0, 0.0);
                for (g1, g2, a, b) in &parts {
                    bg += g1;
                    big += g2;
                    gd.add_assign(a);
                    gi.add_assign(b);
                }
                let inv = 1.0 / parts.len() as f64;
                gd.scale(inv);
                gi.scale(inv);
                if !(gd.is_finite() && gi.is_finite() && bg.is_finite() && big.is_finite()) {
                    return Err(Error::NonFinite(format!("critic loss at outer {}", self.outer)));
                }
                self.optimizers.discriminator.step_network(&mut self.model.discriminator, &gd)?;
                self.optimizers
                    .image_discriminator
                    .step_network(&mut self.model.image_discriminator, &gi)?;
                lipschitz_control(&mut self.model.discriminator, cfg.clip);
                lipschitz_control(&mut self.model.image_discriminator, cfg.clip);
                gap += bg * inv;
                igap += big * inv;
                batches += 1.0;
            }
            self.record("discriminator", "critic_gap", gap / batches);
            self.record("discriminator", "image_critic_gap", igap / batches);
        }
        self.discriminator_phases += 1;
        Ok(())
    }

    /// One inner iteration: generator, latent scenes, permutations, motions.
    pub fn inner_iteration(&mut self) -> Result<()> {
        self.step_generator()?;
        self.step_latent()?;
        self.step_permutations()?;
        self.step_transforms()?;
        let mse = self.reconstruction_mse()?;
        self.record("eval", "recon_mse", mse);
        self.inner += 1;
        Ok(())
    }

    /// Finishes the current outer iteration.
    pub fn outer_iteration(&mut self) -> Result<()> {
        while self.inner < self.config.t_inner {
            self.inner_iteration()?;
        }
        self.step_discriminators()?;
        self.outer += 1;
        self.inner = 0;
        info!(
            "outer {}/{}: recon mse {:.4e}",
            self.outer,
            self.config.t_outer,
            self.history
                .iter()
                .rev()
                .find(|r| r.term == "recon_mse")
                .map_or(f64::NAN, |r| r.value)
        );
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.outer >= self.config.t_outer
    }
}

/// Slot assignment minimizing `‖T⁻¹(M̄)_k − (M σ)_k‖²` per category.
pub fn optimal_permutations(latent: &SceneMatrix, input: &SceneMatrix, motion: &RigidMotion) -> Result<PermutationSet> {
    let back = apply_motion(latent, &motion.inverse());
    let cfg = &input.config;
    let mut perms = Vec::with_capacity(cfg.num_categories());
    for k in 0..cfg.num_categories() {
        let range = cfg.block_range(k);
        let cost: Vec<Vec<f64>> = range
            .clone()
            .map(|a| range.clone().map(|b| crate::scene::column_distance_sq(&back.columns[a], &input.columns[b])).collect())
            .collect();
        perms.push(solve_assignment(&cost)?.perm);
    }
    Ok(PermutationSet { perms })
}

/// Loss-trace CSV: `outer,inner,phase,term,value`.
pub fn loss_trace_csv(history: &[LossRecord]) -> String {
    let mut s = String::from("outer,inner,phase,term,value\n");
    for r in history {
        s.push_str(&format!("{},{},{},{},{:e}\n", r.outer, r.inner, r.phase, r.term, r.value));
    }
    s
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    magic: String,
    version: u32,
    state: TrainState,
}

pub fn checkpoint_path(dir: &Path, outer: usize) -> PathBuf {
    dir.join(format!("ckpt_{outer:03}.bin"))
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let ck = Checkpoint {
        magic: CHECKPOINT_MAGIC.into(),
        version: CHECKPOINT_VERSION,
        state: state.clone(),
    };
    let bytes = bincode::serialize(&ck).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = fs::read(path)?;
    let ck: Checkpoint = bincode::deserialize(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if ck.magic != CHECKPOINT_MAGIC || ck.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported checkpoint ({} v{})",
            path.display(),
            ck.magic,
            ck.version
        )));
    }
    let mut state = ck.state;
    // Restore the shared configuration handle.
    let cat = state.model.category.clone();
    for s in &mut state.inputs {
        s.config = cat.clone();
    }
    Ok(state)
}

/// Runs the remaining outer iterations, writing a checkpoint and the loss
/// trace into `out_dir` after each one.
pub fn run(state: &mut TrainState, out_dir: Option<&Path>) -> Result<()> {
    while !state.is_finished() {
        state.outer_iteration()?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
            save_checkpoint(state, &checkpoint_path(dir, state.outer))?;
            fs::write(dir.join("loss_trace.csv"), loss_trace_csv(&state.history))?;
        }
    }
    Ok(())
}

/// Initializes and trains to completion.
pub fn train(scenes: &[SceneMatrix], config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainState> {
    if scenes.len() < 2 {
        return Err(Error::InvalidInput(format!("training needs at least 2 scenes, got {}", scenes.len())));
    }
    let mut state = init_state(scenes, config)?;
    let mse = state.reconstruction_mse()?;
    state.record("init", "recon_mse", mse);
    run(&mut state, out_dir)?;
    Ok(state)
}
