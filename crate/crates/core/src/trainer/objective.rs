use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::nn::{kl_gaussian, reparameterize, GaussianCode, Gradients};
use crate::topview::{project, project_backward};

/// Term weights shared by the generator and latent objectives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub kl: f64,
    /// Weight of the autoencoding term inside the latent objective.
    pub latent_recon: f64,
}

/// One training example for the generator objective.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSample {
    pub x: Vec<f64>,
    /// Reparameterization noise for the encoder posterior.
    pub noise: Vec<f64>,
    /// Prior draw fed to the critics through the decoder.
    pub z_fake: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    pub recon: f64,
    pub kl: f64,
    pub critic: f64,
    pub image_critic: f64,
    pub total: f64,
}

impl GeneratorTerms {
    fn add(&mut self, o: &GeneratorTerms) {
        self.recon += o.recon;
        self.kl += o.kl;
        self.critic += o.critic;
        self.image_critic += o.image_critic;
        self.total += o.total;
    }

    fn scale(&mut self, s: f64) {
        self.recon *= s;
        self.kl *= s;
        self.critic *= s;
        self.image_critic *= s;
        self.total *= s;
    }
}

/// Gradient of `−D_I(P(x))`-style image terms: returns `scale · ∂D_I(P(x))/∂x`
/// and the critic value.
pub(crate) fn image_critic_grad(model: &Model, x: &[f64], scale: f64, out: &mut [f64]) -> Result<f64> {
    let scene = model.scene(x)?;
    let img = project(&scene, &model.window, &model.projection).values;
    let (v, tape) = model.image_discriminator.forward(&img)?;
    if scale != 0.0 {
        let dimg: Vec<f64> = model
            .image_discriminator
            .input_grad(&tape, &[1.0])?
            .into_iter()
            .map(|g| g * scale)
            .collect();
        project_backward(&scene, &model.window, &model.projection, &dimg)?.accumulate_flat(&model.category, out, 1.0);
    }
    Ok(v[0])
}

fn critic_grad(model: &Model, x: &[f64], scale: f64, out: &mut [f64]) -> Result<f64> {
    let (v, tape) = model.discriminator.forward(x)?;
    if scale != 0.0 {
        for (o, g) in out.iter_mut().zip(model.discriminator.input_grad(&tape, &[1.0])?) {
            *o += scale * g;
        }
    }
    Ok(v[0])
}

/// Per-sample loss
/// `‖dec(z) − x‖² + w_kl·KL − λ·D(dec(z_fake)) − μ·D_I(P(dec(z_fake)))`
/// with `z` reparameterized from the encoder posterior, and its encoder and
/// decoder gradients.
pub fn generator_sample(model: &Model, w: &Weights, s: &GeneratorSample) -> Result<(GeneratorTerms, Gradients, Gradients)> {
    let z_dim = model.z_dim;
    let (e_out, e_tape) = model.encoder.forward(&s.x)?;
    let code = GaussianCode::from_encoder_output(&e_out);
    let z = reparameterize(&code, &s.noise);
    let (y, d_tape) = model.decoder.forward(&z)?;
    let diff: Vec<f64> = y.iter().zip(&s.x).map(|(a, b)| a - b).collect();
    let recon: f64 = diff.iter().map(|d| d * d).sum();
    let dy: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
    let mut dec_grads = model.decoder.zero_grads();
    let dz = model.decoder.backward_into(&d_tape, &dy, &mut dec_grads)?;

    let (kl, dmu_kl, dlv_kl) = kl_gaussian(&code);
    let dmu: Vec<f64> = (0..z_dim).map(|k| dz[k] + w.kl * dmu_kl[k]).collect();
    let dlv: Vec<f64> = (0..z_dim)
        .map(|k| dz[k] * 0.5 * (0.5 * code.logvar[k]).exp() * s.noise[k] + w.kl * dlv_kl[k])
        .collect();
    let g_out = GaussianCode::encoder_output_grad(&e_out, &dmu, &dlv);
    let (_, enc_grads) = model.encoder.backward(&e_tape, &g_out)?;

    let mut terms = GeneratorTerms {
        recon,
        kl,
        ..Default::default()
    };
    if w.lambda != 0.0 || w.mu != 0.0 {
        let (yf, f_tape) = model.decoder.forward(&s.z_fake)?;
        let mut dyf = vec![0.0; yf.len()];
        if w.lambda != 0.0 {
            terms.critic = critic_grad(model, &yf, -w.lambda, &mut dyf)?;
        }
        if w.mu != 0.0 {
            terms.image_critic = image_critic_grad(model, &yf, -w.mu, &mut dyf)?;
        }
        model.decoder.backward_into(&f_tape, &dyf, &mut dec_grads)?;
    }
    terms.total = recon + w.kl * kl - w.lambda * terms.critic - w.mu * terms.image_critic;
    if !terms.total.is_finite() {
        return Err(Error::NonFinite("generator loss".into()));
    }
    Ok((terms, enc_grads, dec_grads))
}

/// Batch mean of [`generator_sample`], reduced in sample order.
pub fn generator_objective(
    model: &Model,
    w: &Weights,
    samples: &[GeneratorSample],
) -> Result<(GeneratorTerms, Gradients, Gradients)> {
    use rayon::prelude::*;
    let parts = samples
        .par_iter()
        .map(|s| generator_sample(model, w, s))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = GeneratorTerms::default();
    let mut enc = model.encoder.zero_grads();
    let mut dec = model.decoder.zero_grads();
    for (t, e, d) in &parts {
        terms.add(t);
        enc.add_assign(e);
        dec.add_assign(d);
    }
    let inv = 1.0 / samples.len().max(1) as f64;
    terms.scale(inv);
    enc.scale(inv);
    dec.scale(inv);
    Ok((terms, enc, dec))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentTerms {
    pub recon: f64,
    pub consistency: f64,
    pub critic: f64,
    pub image_critic: f64,
    pub total: f64,
}

/// `w_r‖dec(mu(enc(x))) − x‖² + γ‖x − target‖² + λ·D(x) + μ·D_I(P(x))` and
/// its gradient with respect to `x`.
pub fn latent_objective(model: &Model, w: &Weights, x: &[f64], target: &[f64]) -> Result<(LatentTerms, Vec<f64>)> {
    let mut grad = vec![0.0; x.len()];
    let mut t = LatentTerms::default();
    if w.latent_recon != 0.0 {
        let (e_out, e_tape) = model.encoder.forward(x)?;
        let (y, d_tape) = model.decoder.forward(&e_out[..model.z_dim])?;
        let r: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        t.recon = r.iter().map(|v| v * v).sum();
        let dy: Vec<f64> = r.iter().map(|v| 2.0 * w.latent_recon * v).collect();
        let dmu = model.decoder.input_grad(&d_tape, &dy)?;
        let mut g_out = vec![0.0; e_out.len()];
        g_out[..model.z_dim].copy_from_slice(&dmu);
        let gx = model.encoder.input_grad(&e_tape, &g_out)?;
        for ((g, a), b) in grad.iter_mut().zip(gx).zip(&dy) {
            *g += a - b;
        }
    }
    for ((g, a), b) in grad.iter_mut().zip(x).zip(target) {
        let d = a - b;
        t.consistency += d * d;
        *g += 2.0 * w.gamma * d;
    }
    if w.lambda != 0.0 {
        t.critic = critic_grad(model, x, w.lambda, &mut grad)?;
    }
    if w.mu != 0.0 {
        t.image_critic = image_critic_grad(model, x, w.mu, &mut grad)?;
    }
    t.total = w.latent_recon * t.recon + w.gamma * t.consistency + w.lambda * t.critic + w.mu * t.image_critic;
    if !t.total.is_finite() {
        return Err(Error::NonFinite("latent objective".into()));
    }
    Ok((t, grad))
}
