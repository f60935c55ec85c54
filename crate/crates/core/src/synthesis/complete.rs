use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState};
use crate::rng;
use crate::scene::{
    apply_motion, apply_permutation, solve_assignment, solve_procrustes, CategoryConfig, PermutationSet, RigidMotion,
    SceneMatrix, ROW_EXISTENCE,
};
use crate::trainer::Model;

/// Per-entry 0/1 mask over a scene matrix, flattened column-major like
/// [`SceneMatrix::to_flat`]. 1 marks an entry fixed by the partial input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionMask {
    pub rows: usize,
    pub entries: Vec<bool>,
}

impl CompletionMask {
    pub fn none(config: &CategoryConfig) -> Self {
        Self {
            rows: config.rows(),
            entries: vec![false; config.flat_len()],
        }
    }

    pub fn all(config: &CategoryConfig) -> Self {
        Self {
            rows: config.rows(),
            entries: vec![true; config.flat_len()],
        }
    }

    /// Every entry of the listed columns.
    pub fn columns(config: &CategoryConfig, cols: &[usize]) -> Result<Self> {
        let mut m = Self::none(config);
        for &j in cols {
            if j >= config.num_objects() {
                return Err(Error::InvalidInput(format!("mask column {j} out of range")));
            }
            m.entries[j * m.rows..(j + 1) * m.rows].fill(true);
        }
        Ok(m)
    }

    /// Constrains the columns of `scene` that hold an object.
    pub fn existing(scene: &SceneMatrix) -> Self {
        let cols: Vec<usize> = (0..scene.columns.len()).filter(|&j| scene.columns[j].exists()).collect();
        Self::columns(&scene.config, &cols).expect("column indices come from the scene")
    }

    pub fn validate(&self, config: &CategoryConfig) -> Result<()> {
        if self.rows != config.rows() || self.entries.len() != config.flat_len() {
            return Err(Error::Shape {
                expected: config.flat_len(),
                actual: self.entries.len(),
            });
        }
        for (j, col) in self.entries.chunks(self.rows).enumerate() {
            if col.iter().any(|&e| e) && !col[ROW_EXISTENCE] {
                return Err(Error::InvalidInput(format!(
                    "mask column {j} constrains entries but not its existence tag"
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        !self.entries.iter().any(|&e| e)
    }

    /// Whether column `j` carries any constraint.
    pub fn constrains_column(&self, j: usize) -> bool {
        self.entries[j * self.rows + ROW_EXISTENCE]
    }

    fn permuted(&self, config: &CategoryConfig, perms: &PermutationSet) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        for (k, p) in perms.perms.iter().enumerate() {
            let start = config.block_range(k).start;
            for (a, &b) in p.iter().enumerate() {
                let (dst, src) = ((start + a) * self.rows, (start + b) * self.rows);
                for r in 0..self.rows {
                    out[dst + r] = if self.entries[src + r] { 1.0 } else { 0.0 };
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub alpha: f64,
    pub restarts: usize,
    /// Gradient steps on `z` per restart.
    pub iters: usize,
    /// Adam learning rate on `z`.
    pub step: f64,
    /// Damped Gauss-Newton iterations applied to the best code of each
    /// restart.
    pub polish_iters: usize,
    pub seed: u64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            restarts: 8,
            iters: 500,
            step: 0.1,
            polish_iters: 50,
            seed: 0,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be finite and non-negative, got {}", self.alpha)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("completion needs at least one restart".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    /// `canonicalize(G(z*))`.
    pub scene: SceneMatrix,
    pub z: Vec<f64>,
    /// Maps the partial input into the frame of the raw decoder output.
    pub motion: RigidMotion,
    pub perms: PermutationSet,
    /// Masked residual `‖C' ⊙ ((T∘S)(M_in) − G(z*))‖²`.
    pub data_term: f64,
    /// `data_term + α‖z*‖²`.
    pub objective: f64,
    /// Objective of every restart at its starting code, after fitting `(T, S)`.
    pub start_objectives: Vec<f64>,
    /// Index of the restart that produced the result.
    pub best_restart: usize,
}

struct Problem<'a> {
    model: &'a Model,
    input: &'a SceneMatrix,
    mask: &'a CompletionMask,
    constrained: Vec<f64>,
    alpha: f64,
}

struct Run {
    z: Vec<f64>,
    motion: RigidMotion,
    perms: PermutationSet,
    data: f64,
    start: f64,
}

impl Problem<'_> {
    fn target(&self, motion: &RigidMotion, perms: &PermutationSet) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = apply_motion(&apply_permutation(self.input, perms)?, motion).to_flat();
        Ok((x, self.mask.permuted(&self.input.config, perms)))
    }

    fn data(&self, g: &[f64], x: &[f64], c: &[f64]) -> f64 {
        g.iter().zip(x).zip(c).map(|((g, x), c)| c * (g - x).powi(2)).sum()
    }

    fn objective(&self, data: f64, z: &[f64]) -> f64 {
        data + self.alpha * z.iter().map(|v| v * v).sum::<f64>()
    }

    /// Exact slot assignment per category given `T`.
    fn best_perms(&self, g: &SceneMatrix, motion: &RigidMotion) -> Result<PermutationSet> {
        let cfg = &self.input.config;
        let moved = apply_motion(self.input, motion).to_flat();
        let gf = g.to_flat();
        let rows = cfg.rows();
        let mut perms = Vec::with_capacity(cfg.num_categories());
        for k in 0..cfg.num_categories() {
            let range = cfg.block_range(k);
            let cost: Vec<Vec<f64>> = range
                .clone()
                .map(|a| {
                    range
                        .clone()
                        .map(|b| {
                            (0..rows)
                                .filter(|&r| self.mask.entries[b * rows + r])
                                .map(|r| (gf[a * rows + r] - moved[b * rows + r]).powi(2))
                                .sum()
                        })
                        .collect()
                })
                .collect();
            perms.push(solve_assignment(&cost)?.perm);
        }
        Ok(PermutationSet { perms })
    }

    /// Closed-form motion over the constrained columns; kept only when it
    /// does not raise the masked residual.
    fn best_motion(&self, g: &SceneMatrix, gf: &[f64], perms: &PermutationSet, current: &RigidMotion) -> Result<RigidMotion> {
        let source = apply_permutation(self.input, perms)?;
        let c = self.mask.permuted(&self.input.config, perms);
        let rows = self.mask.rows;
        let weights: Vec<f64> = c.chunks(rows).map(|col| col[ROW_EXISTENCE]).collect();
        let candidate = solve_procrustes(g, &source, &weights)?;
        let data_of = |m: &RigidMotion| self.data(gf, &apply_motion(&source, m).to_flat(), &c);
        Ok(if data_of(&candidate) <= data_of(current) {
            candidate
        } else {
            *current
        })
    }

    /// Alternates the exact `S` and `T` solves until neither changes.
    fn fit_pose(&self, gf: &[f64], motion: &mut RigidMotion, perms: &mut PermutationSet) -> Result<f64> {
        let g = self.model.scene(gf)?;
        for _ in 0..10 {
            let p = self.best_perms(&g, motion)?;
            let m = self.best_motion(&g, gf, &p, motion)?;
            let done = p == *perms && m == *motion;
            *perms = p;
            *motion = m;
            if done {
                break;
            }
        }
        let (x, c) = self.target(motion, perms)?;
        Ok(self.data(gf, &x, &c))
    }

    fn value_and_grad(&self, z: &[f64], x: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (g, tape) = self.model.decoder.forward(z)?;
        let dy: Vec<f64> = g.iter().zip(x).zip(c).map(|((g, x), c)| 2.0 * c * (g - x)).collect();
        let mut grad = self.model.decoder.input_grad(&tape, &dy)?;
        for (gz, v) in grad.iter_mut().zip(z) {
            *gz += 2.0 * self.alpha * v;
        }
        Ok((self.objective(self.data(&g, x, c), z), grad))
    }

    fn run(&self, z0: Vec<f64>, cfg: &CompletionConfig) -> Result<Run> {
        let mut z = z0;
        let mut motion = RigidMotion::identity();
        let mut perms = PermutationSet::identity(&self.input.config);
        let data = self.fit_pose(&self.model.decode(&z)?, &mut motion, &mut perms)?;
        let start = self.objective(data, &z);
        let mut best = Run {
            z: z.clone(),
            motion,
            perms: perms.clone(),
            data,
            start,
        };
        let mut adam = AdamState::new(z.len(), AdamConfig::with_lr(cfg.step));
        let (mut x, mut c) = self.target(&motion, &perms)?;
        for _ in 0..cfg.iters {
            let (_, grad) = self.value_and_grad(&z, &x, &c)?;
            if adam.step(&mut z, &grad)? < 1e-12 {
                break;
            }
            let data = self.fit_pose(&self.model.decode(&z)?, &mut motion, &mut perms)?;
            if !data.is_finite() {
                return Err(Error::NonFinite("completion data term".into()));
            }
            if self.objective(data, &z) < self.objective(best.data, &best.z) {
                best = Run {
                    z: z.clone(),
                    motion,
                    perms: perms.clone(),
                    data,
                    start,
                };
            }
            (x, c) = self.target(&motion, &perms)?;
        }
        self.polish(best, cfg.polish_iters)
    }

    /// Levenberg-Marquardt on `z` with the decoder Jacobian taken by central
    /// differences, refitting `(T, S)` after every accepted step.
    fn polish(&self, mut run: Run, iters: usize) -> Result<Run> {
        let n = run.z.len();
        let mut damping = 1e-3;
        let (mut x, mut c) = self.target(&run.motion, &run.perms)?;
        let mut f = self.objective(run.data, &run.z);
        for _ in 0..iters {
            let g = self.model.decode(&run.z)?;
            let mut jac = DMatrix::zeros(g.len(), n);
            for k in 0..n {
                let h = 1e-6 * (1.0 + run.z[k].abs());
                let mut zp = run.z.clone();
                zp[k] += h;
                let up = self.model.decode(&zp)?;
                zp[k] -= 2.0 * h;
                let down = self.model.decode(&zp)?;
                for i in 0..g.len() {
                    jac[(i, k)] = c[i] * (up[i] - down[i]) / (2.0 * h);
                }
            }
            let r = DVector::from_iterator(g.len(), g.iter().zip(&x).zip(&c).map(|((g, x), c)| c * (g - x)));
            let zv = DVector::from_column_slice(&run.z);
            let jtj = jac.transpose() * &jac;
            let rhs = -(jac.transpose() * r + &zv * self.alpha);
            let mut accepted = false;
            while damping < 1e12 {
                let a = &jtj + DMatrix::identity(n, n) * (self.alpha + damping);
                let Some(chol) = a.cholesky() else {
                    damping *= 4.0;
                    continue;
                };
                let trial: Vec<f64> = (zv.clone() + chol.solve(&rhs)).iter().copied().collect();
                let ft = self.objective(self.data(&self.model.decode(&trial)?, &x, &c), &trial);
                if ft < f {
                    let (mut motion, mut perms) = (run.motion, run.perms.clone());
                    let data = self.fit_pose(&self.model.decode(&trial)?, &mut motion, &mut perms)?;
                    run = Run {
                        z: trial,
                        motion,
                        perms,
                        data,
                        start: run.start,
                    };
                    (x, c) = self.target(&run.motion, &run.perms)?;
                    let improved = f - self.objective(data, &run.z);
                    f -= improved;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = improved > 1e-15 * (1.0 + f);
                    break;
                }
                damping *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        Ok(run)
    }
}

/// Fills in the unconstrained entries of `input` by searching the latent
/// space for `argmin_z ‖C' ⊙ ((T∘S)(M_in) − G(z))‖² + α‖z‖²`, where the mask
/// travels with the input columns under `S`.
///
/// Each restart alternates Adam steps on `z` with exact slot assignment and
/// rigid fits, keeps the best point visited, and refines it with damped
/// Gauss-Newton steps that are accepted only when the objective drops, so a
/// restart never ends above its starting objective. Restart 0 starts from
/// the encoder mean of the masked input, the others from prior draws. The
/// lowest final objective wins, ties to the lowest restart index.
pub fn complete(model: &Model, input: &SceneMatrix, mask: &CompletionMask, cfg: &CompletionConfig) -> Result<CompletionResult> {
    cfg.validate()?;
    input.validate()?;
    if *input.config != *model.category {
        return Err(Error::Config("partial scene and model use different categories".into()));
    }
    mask.validate(&input.config)?;
    let flat = input.to_flat();
    let constrained: Vec<f64> = flat.iter().zip(&mask.entries).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
    if mask.is_empty() {
        warn!("completion mask is empty; returning an unconstrained sample");
        let z = super::prior_sample(model.z_dim, cfg.seed, 0);
        let g = model.decode(&z)?;
        let objective = cfg.alpha * z.iter().map(|v| v * v).sum::<f64>();
        return Ok(CompletionResult {
            scene: model.scene(&g)?.canonicalize(),
            z,
            motion: RigidMotion::identity(),
            perms: PermutationSet::identity(&input.config),
            data_term: 0.0,
            objective,
            start_objectives: vec![objective],
            best_restart: 0,
        });
    }
    let problem = Problem {
        model,
        input,
        mask,
        constrained,
        alpha: cfg.alpha,
    };
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let z0 = if r == 0 {
                model.encode_mu(&problem.constrained)?
            } else {
                let mut g = rng::stream(cfg.seed, &[0xc3, r as u64]);
                (0..model.z_dim).map(|_| StandardNormal.sample(&mut g)).collect()
            };
            problem.run(z0, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    let objective = |r: &Run| problem.objective(r.data, &r.z);
    for (i, r) in runs.iter().enumerate() {
        if objective(r) < objective(&runs[best]) {
            best = i;
        }
    }
    let start_objectives = runs.iter().map(|r| r.start).collect();
    let run = runs.into_iter().nth(best).expect("at least one restart");
    Ok(CompletionResult {
        scene: model.scene(&model.decode(&run.z)?)?.canonicalize(),
        objective: problem.objective(run.data, &run.z),
        z: run.z,
        motion: run.motion,
        perms: run.perms,
        data_term: run.data,
        start_objectives,
        best_restart: best,
    })
}
