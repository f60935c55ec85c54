use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{build_arrangement_nets, build_image_discriminator, Network};
use crate::rng;
use crate::scene::{CategoryConfig, SceneMatrix};
use crate::topview::{project, ProjectionConfig, ViewWindow};

/// The four networks together with what is needed to feed them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub category: Arc<CategoryConfig>,
    pub z_dim: usize,
    pub encoder: Network,
    pub decoder: Network,
    pub discriminator: Network,
    pub image_discriminator: Network,
    pub window: ViewWindow,
    pub projection: ProjectionConfig,
}

/// Architecture knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub z_dim: usize,
    pub width_scale: f64,
    /// Expected in-degree of sparsely connected units.
    pub sc_h: usize,
    pub image_channels: usize,
}

impl Model {
    pub fn build(
        category: Arc<CategoryConfig>,
        spec: &ModelSpec,
        window: ViewWindow,
        projection: ProjectionConfig,
        seed: u64,
    ) -> Result<Self> {
        let nets = build_arrangement_nets(&category, spec.z_dim, spec.width_scale, spec.sc_h, seed)?;
        let image_discriminator =
            build_image_discriminator(window.resolution, spec.image_channels, rng::derive_seed(seed, &[5]))?;
        Ok(Self {
            category,
            z_dim: spec.z_dim,
            encoder: nets.encoder,
            decoder: nets.decoder,
            discriminator: nets.discriminator,
            image_discriminator,
            window,
            projection,
        })
    }

    pub fn flat_len(&self) -> usize {
        self.category.flat_len()
    }

    /// Encoder mean of a flattened scene.
    pub fn encode_mu(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.encoder.predict(x)?;
        out.truncate(self.z_dim);
        Ok(out)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.z_dim {
            return Err(Error::Shape {
                expected: self.z_dim,
                actual: z.len(),
            });
        }
        self.decoder.predict(z)
    }

    pub fn scene(&self, flat: &[f64]) -> Result<SceneMatrix> {
        SceneMatrix::from_flat(self.category.clone(), flat)
    }

    /// Top view of a flattened (possibly raw) scene.
    pub fn project_flat(&self, flat: &[f64]) -> Result<Vec<f64>> {
        Ok(project(&self.scene(flat)?, &self.window, &self.projection).values)
    }

    /// `‖dec(mu(enc(x))) − x‖²`.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let y = self.decode(&self.encode_mu(x)?)?;
        Ok(y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum())
    }
}
