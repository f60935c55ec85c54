use serde::{Deserialize, Serialize};

use super::{make_sc_mask, Layer, Network, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::CategoryConfig;

/// Total hidden widths of the encoder at full scale, in stage order.
pub const FULL_WIDTHS: [usize; 6] = [2000, 200, 1600, 200, 400, 80];

/// Encoder stage kinds; `true` marks a sparsely connected stage.
const ENCODER_SPARSE: [bool; 7] = [true, false, true, false, true, false, false];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrangementNets {
    pub encoder: Network,
    pub decoder: Network,
    pub discriminator: Network,
}

/// Encoder layer widths `[input, hidden…, z_dim]` with the hidden widths
/// scaled by `width_scale` (rounded, at least 1).
pub fn arrangement_layer_dims(input_dim: usize, z_dim: usize, width_scale: f64) -> Vec<usize> {
    let mut dims = vec![input_dim];
    dims.extend(FULL_WIDTHS.iter().map(|&w| ((w as f64 * width_scale).round() as usize).max(1)));
    dims.push(z_dim);
    dims
}

fn stack(dims: &[usize], sparse: &[bool], h: usize, seed: u64, tag: u64) -> Result<Network> {
    let stages = dims.len() - 1;
    let mut layers = Vec::with_capacity(2 * stages);
    for s in 0..stages {
        let (i, o) = (dims[s], dims[s + 1]);
        layers.push(if sparse[s] {
            Layer::sparse(make_sc_mask(i, o, h, rng::derive_seed(seed, &[tag, s as u64]))?)
        } else {
            Layer::dense(i, o)
        });
        if s + 1 < stages {
            layers.push(Layer::leaky_relu(o, LEAKY_SLOPE));
        }
    }
    let mut net = Network::new(layers)?;
    net.init_he(&mut rng::stream(seed, &[tag, u64::MAX]));
    Ok(net)
}

/// Builds the encoder (output `[mu ‖ logvar]`, length `2·z_dim`), the
/// mirrored decoder and the arrangement critic. `h` is the expected
/// in-degree of sparsely connected units.
pub fn build_arrangement_nets(
    config: &CategoryConfig,
    z_dim: usize,
    width_scale: f64,
    h: usize,
    seed: u64,
) -> Result<ArrangementNets> {
    if z_dim == 0 || !(width_scale > 0.0) {
        return Err(Error::Config(format!(
            "arrangement nets need z_dim ≥ 1 and width_scale > 0, got {z_dim} and {width_scale}"
        )));
    }
    let dims = arrangement_layer_dims(config.flat_len(), z_dim, width_scale);

    let mut enc_dims = dims.clone();
    *enc_dims.last_mut().expect("non-empty") = 2 * z_dim;
    let encoder = stack(&enc_dims, &ENCODER_SPARSE, h, seed, 1)?;

    let dec_dims: Vec<usize> = dims.iter().rev().copied().collect();
    let dec_sparse: Vec<bool> = ENCODER_SPARSE.iter().rev().copied().collect();
    let decoder = stack(&dec_dims, &dec_sparse, h, seed, 2)?;

    let mut disc_dims = dims;
    *disc_dims.last_mut().expect("non-empty") = 1;
    let discriminator = stack(&disc_dims, &ENCODER_SPARSE, h, seed, 3)?;

    Ok(ArrangementNets {
        encoder,
        decoder,
        discriminator,
    })
}

/// Four stride-2 convolution blocks (`base`, `2·base`, `4·base`, `8·base`
/// channels) over a single-channel `r × r` image, then a linear scalar head.
pub fn build_image_discriminator(r: usize, base: usize, seed: u64) -> Result<Network> {
    if r == 0 || r % 16 != 0 || base == 0 {
        return Err(Error::Config(format!(
            "image critic needs r a positive multiple of 16 and base ≥ 1, got r={r}, base={base}"
        )));
    }
    let mut layers = Vec::new();
    let (mut ch, mut side) = (1, r);
    for b in 0..4 {
        let out = base << b;
        let conv = Layer::conv(ch, out, side, side, 2, 2)?;
        side /= 2;
        layers.push(Layer::leaky_relu(conv.out_dim, LEAKY_SLOPE));
        layers.insert(layers.len() - 1, conv);
        ch = out;
    }
    layers.push(Layer::dense(ch * side * side, 1));
    let mut net = Network::new(layers)?;
    net.init_he(&mut rng::stream(seed, &[4]));
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerKind;

    fn parametric_dims(net: &Network) -> Vec<(usize, usize, bool)> {
        net.layers
            .iter()
            .filter(|l| l.is_parametric())
            .map(|l| (l.in_dim, l.out_dim, matches!(l.kind, LayerKind::Sparse(_))))
            .collect()
    }

    #[test]
    fn full_scale_encoder_has_listed_widths() {
        let names: Vec<String> = (0..30).map(|k| format!("c{k}")).collect();
        let cfg = CategoryConfig::uniform(&names, 4, 119).unwrap();
        let nets = build_arrangement_nets(&cfg, 32, 1.0, 4, 0).unwrap();
        let expected = [
            (120 * 128, 2000, true),
            (2000, 200, false),
            (200, 1600, true),
            (1600, 200, false),
            (200, 400, true),
            (400, 80, false),
            (80, 64, false),
        ];
        assert_eq!(parametric_dims(&nets.encoder), expected);
        let dec: Vec<_> = parametric_dims(&nets.decoder);
        assert_eq!(dec.first().unwrap().0, 32);
        assert_eq!(dec.last().unwrap().1, 120 * 128);
        assert_eq!(nets.discriminator.out_dim(), 1);
    }

    #[test]
    fn image_critic_spatial_sizes() {
        let net = build_image_discriminator(128, 8, 0).unwrap();
        let sides: Vec<usize> = net
            .layers
            .iter()
            .filter_map(|l| match l.kind {
                LayerKind::Conv { out_channels, .. } => Some(((l.out_dim / out_channels) as f64).sqrt() as usize),
                _ => None,
            })
            .collect();
        assert_eq!(sides, vec![64, 32, 16, 8]);
        assert_eq!(net.out_dim(), 1);
        assert!(build_image_discriminator(100, 8, 0).is_err());
    }
}
