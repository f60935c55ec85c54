//! Synthetic scene corpora with known ground truth.
//!
//! Scenes are assembled in a canonical room frame from placement patterns
//! (an anchor object and satellites placed relative to it), then moved by a
//! random global pose and have their slots shuffled. The emitted ground truth
//! undoes both.

mod defaults;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{
    apply_motion, apply_permutation, rotate2, CategoryConfig, ObjectColumn, PermutationSet, RigidMotion, SceneMatrix,
};

pub use defaults::{
    bedroom_config, default_bedroom_spec, default_livingroom_spec, livingroom_config, BEDROOM_CATEGORIES,
    LIVINGROOM_CATEGORIES,
};

/// Where one instance of an anchor may sit in the canonical room frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub position: [f64; 2],
    pub heading: f64,
}

/// Shape and count of one category inside a pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub category: String,
    /// Probabilities of 0, 1, 2, … instances.
    pub multiplicity: Vec<f64>,
    /// Extent along front, side and up.
    pub size: [f64; 3],
    #[serde(default)]
    pub size_std: f64,
    /// Height of the bottom face above the floor.
    #[serde(default)]
    pub elevation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub object: ObjectSpec,
    /// Instance `j` is placed around `sites[j % sites.len()]`.
    pub sites: Vec<Site>,
    pub position_std: f64,
    pub heading_std: f64,
}

/// Placement relative to an anchor instance.
///
/// Offsets live in the anchor frame: origin at the midpoint of the anchor's
/// front edge, `+y` along the anchor's front and `+x` to its right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSpec {
    /// Instances per anchor instance.
    pub object: ObjectSpec,
    /// Instance `j` is placed around `offsets[j % offsets.len()]`.
    pub offsets: Vec<[f64; 2]>,
    pub offset_std: f64,
    pub heading_offset: f64,
    pub heading_offset_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub anchor: AnchorSpec,
    #[serde(default)]
    pub satellites: Vec<SatelliteSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n: usize,
    pub patterns: Vec<PatternSpec>,
    /// Draw the global rotation uniformly from the four quarter turns.
    pub quarter_turns: bool,
    pub rotation_jitter_std: f64,
    pub translation_std: f64,
    pub shuffle_slots: bool,
    pub descriptor_std: f64,
    pub seed: u64,
}

/// Per-scene nuisance and the canonical scenes it was applied to.
///
/// `scenes[i] = T_i(S_i(canonical[i]))` with `T_i = motions[i]` and
/// `S_i = perms[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub motions: Vec<RigidMotion>,
    pub perms: Vec<PermutationSet>,
    pub canonical: Vec<SceneMatrix>,
}

impl GroundTruth {
    /// Maps an observed scene back into the canonical frame and slot order.
    pub fn undo(&self, i: usize, scene: &SceneMatrix) -> Result<SceneMatrix> {
        apply_permutation(&apply_motion(scene, &self.motions[i].inverse()), &self.perms[i].inverse())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub scenes: Vec<SceneMatrix>,
    pub truth: GroundTruth,
}

fn check_object(o: &ObjectSpec, config: &CategoryConfig) -> Result<usize> {
    let k = config
        .index_of(&o.category)
        .ok_or_else(|| Error::Config(format!("unknown category `{}`", o.category)))?;
    let p = &o.multiplicity;
    let total: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "multiplicity of `{}` is not a probability vector",
            o.category
        )));
    }
    if p.len() > config.categories[k].max_multiplicity + 1 {
        return Err(Error::Config(format!(
            "multiplicity of `{}` exceeds its {} slots",
            o.category, config.categories[k].max_multiplicity
        )));
    }
    if !(o.size_std >= 0.0) || o.size.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Config(format!("invalid size for `{}`", o.category)));
    }
    Ok(k)
}

impl CorpusSpec {
    pub fn validate(&self, config: &CategoryConfig) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("corpus needs at least one scene".into()));
        }
        let stds = [self.rotation_jitter_std, self.translation_std, self.descriptor_std];
        if stds.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Config("standard deviations must be non-negative".into()));
        }
        for p in &self.patterns {
            check_object(&p.anchor.object, config)?;
            if p.anchor.sites.is_empty() || !(p.anchor.position_std >= 0.0 && p.anchor.heading_std >= 0.0) {
                return Err(Error::Config(format!(
                    "anchor `{}` needs sites and non-negative stds",
                    p.anchor.object.category
                )));
            }
            for s in &p.satellites {
                check_object(&s.object, config)?;
                if s.offsets.is_empty() || !(s.offset_std >= 0.0 && s.heading_offset_std >= 0.0) {
                    return Err(Error::Config(format!(
                        "satellite `{}` needs offsets and non-negative stds",
                        s.object.category
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy with all nuisance and noise switched off.
    pub fn noiseless(&self) -> Self {
        let mut s = self.clone();
        s.quarter_turns = false;
        s.rotation_jitter_std = 0.0;
        s.translation_std = 0.0;
        s.shuffle_slots = false;
        s.descriptor_std = 0.0;
        for p in &mut s.patterns {
            p.anchor.position_std = 0.0;
            p.anchor.heading_std = 0.0;
            p.anchor.object.size_std = 0.0;
            for sat in &mut p.satellites {
                sat.offset_std = 0.0;
                sat.heading_offset_std = 0.0;
                sat.object.size_std = 0.0;
            }
        }
        s
    }
}

/// Fixed per-category descriptor means, pairwise at least `3·std` apart.
pub fn descriptor_means(config: &CategoryConfig, std: f64) -> Vec<Vec<f64>> {
    let d = config.descriptor_dim;
    let mut r = rng::stream(0xde5c, &[d as u64, config.num_categories() as u64]);
    let min_sep = 3.0 * std;
    let mut half = 1.0;
    let mut means: Vec<Vec<f64>> = Vec::new();
    let mut misses = 0;
    while means.len() < config.num_categories() {
        let c: Vec<f64> = (0..d).map(|_| r.random_range(-half..=half)).collect();
        let ok = means
            .iter()
            .all(|m| m.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_sep);
        if ok || d == 0 {
            means.push(c);
            misses = 0;
        } else {
            misses += 1;
            if misses > 1000 {
                half *= 1.5;
                misses = 0;
            }
        }
    }
    means
}

fn normal(r: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        mean
    } else {
        Normal::new(mean, std).expect("finite std").sample(r)
    }
}

fn draw_count(r: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    if probs.len() == 1 {
        return 0;
    }
    WeightedIndex::new(probs).expect("validated multiplicity").sample(r)
}

struct Builder<'a> {
    config: &'a CategoryConfig,
    means: &'a [Vec<f64>],
    descriptor_std: f64,
    columns: Vec<ObjectColumn>,
    filled: Vec<usize>,
}

impl Builder<'_> {
    fn place(&mut self, r: &mut ChaCha8Rng, o: &ObjectSpec, xy: [f64; 2], heading: f64) -> bool {
        let k = self.config.index_of(&o.category).expect("validated category");
        let slot = self.filled[k];
        if slot >= self.config.categories[k].max_multiplicity {
            return false;
        }
        self.filled[k] += 1;
        let size = o.size.map(|s| normal(r, s, o.size_std).max(0.05 * s));
        let descriptor = self.means[k].iter().map(|&m| normal(r, m, self.descriptor_std)).collect();
        self.columns[self.config.block_range(k).start + slot] = ObjectColumn {
            existence: 1.0,
            center: [xy[0], xy[1], o.elevation + 0.5 * size[2]],
            front: [heading.cos(), heading.sin()],
            size,
            descriptor,
        };
        true
    }
}

/// Anchor-frame origin and axes of a footprint: front-edge midpoint, right
/// axis, front axis.
pub fn anchor_frame(center: [f64; 2], front: [f64; 2], length: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let right = [front[1], -front[0]];
    let origin = [center[0] + 0.5 * length * front[0], center[1] + 0.5 * length * front[1]];
    (origin, right, front)
}

fn canonical_scene(
    spec: &CorpusSpec,
    config: &Arc<CategoryConfig>,
    means: &[Vec<f64>],
    r: &mut ChaCha8Rng,
) -> SceneMatrix {
    let mut b = Builder {
        config,
        means,
        descriptor_std: spec.descriptor_std,
        columns: SceneMatrix::empty(config.clone()).columns,
        filled: vec![0; config.num_categories()],
    };
    for p in &spec.patterns {
        let a = &p.anchor;
        let count = draw_count(r, &a.object.multiplicity);
        for j in 0..count {
            let site = a.sites[j % a.sites.len()];
            let xy = [normal(r, site.position[0], a.position_std), normal(r, site.position[1], a.position_std)];
            let heading = normal(r, site.heading, a.heading_std);
            let k = config.index_of(&a.object.category).expect("validated category");
            let slot = config.block_range(k).start + b.filled[k];
            if !b.place(r, &a.object, xy, heading) {
                continue;
            }
            let anchor = b.columns[slot].clone();
            let (origin, right, front) = anchor_frame(xy, anchor.front, anchor.size[0]);
            for s in &p.satellites {
                let n = draw_count(r, &s.object.multiplicity);
                for q in 0..n {
                    let off = s.offsets[q % s.offsets.len()];
                    let u = normal(r, off[0], s.offset_std);
                    let v = normal(r, off[1], s.offset_std);
                    let pos = [
                        origin[0] + u * right[0] + v * front[0],
                        origin[1] + u * right[1] + v * front[1],
                    ];
                    let h = heading + normal(r, s.heading_offset, s.heading_offset_std);
                    b.place(r, &s.object, pos, h);
                }
            }
        }
    }
    SceneMatrix {
        config: config.clone(),
        columns: b.columns,
    }
}

/// Generates `spec.n` scenes with per-scene random streams keyed by
/// `(seed, index)`, so output does not depend on the thread count.
pub fn generate_corpus(spec: &CorpusSpec, config: &Arc<CategoryConfig>) -> Result<Corpus> {
    spec.validate(config)?;
    let means = descriptor_means(config, spec.descriptor_std.max(1e-3));
    let out: Vec<(SceneMatrix, SceneMatrix, RigidMotion, PermutationSet)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(spec.seed, &[0xc0, i as u64]);
            let canon = canonical_scene(spec, config, &means, &mut r);
            let quarter = if spec.quarter_turns { r.random_range(0..4) } else { 0 };
            let theta = quarter as f64 * FRAC_PI_2 + normal(&mut r, 0.0, spec.rotation_jitter_std);
            let t = [
                normal(&mut r, 0.0, spec.translation_std),
                normal(&mut r, 0.0, spec.translation_std),
                0.0,
            ];
            let motion = RigidMotion::new(theta, t);
            let mut perms = PermutationSet::identity(config);
            if spec.shuffle_slots {
                for p in &mut perms.perms {
                    p.shuffle(&mut r);
                }
            }
            let observed = apply_motion(&apply_permutation(&canon, &perms)?, &motion);
            Ok((observed, canon, motion, perms))
        })
        .collect::<Result<_>>()?;
    let mut scenes = Vec::with_capacity(spec.n);
    let mut truth = GroundTruth {
        motions: Vec::with_capacity(spec.n),
        perms: Vec::with_capacity(spec.n),
        canonical: Vec::with_capacity(spec.n),
    };
    for (s, c, m, p) in out {
        scenes.push(s);
        truth.canonical.push(c);
        truth.motions.push(m);
        truth.perms.push(p);
    }
    Ok(Corpus { scenes, truth })
}

/// Rotates a planar offset into a frame with the given front.
pub fn to_anchor_frame(p: [f64; 2], origin: [f64; 2], front: [f64; 2]) -> [f64; 2] {
    let d = [p[0] - origin[0], p[1] - origin[1]];
    let heading = front[1].atan2(front[0]);
    let local = rotate2(-heading, d);
    // local = (along front, left); anchor frame is (right, front).
    [-local[1], local[0]]
}
