//! Feed-forward networks with hand-written reverse-mode gradients.
//!
//! Activations are flat `f64` vectors; convolutional layers read and write
//! channel-major (CHW) layouts.

mod adam;
mod arch;
mod check;
mod mask;
mod vae;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{lipschitz_control, AdamConfig, AdamState};
pub use arch::{
    arrangement_layer_dims, build_arrangement_nets, build_image_discriminator, ArrangementNets,
    FULL_WIDTHS,
};
pub use check::{check_network, relative_error, GradCheck, FD_FLOOR};
pub use mask::{make_sc_mask, SparseMask};
pub use vae::{kl_gaussian, reparameterize, GaussianCode, LOGVAR_BOUND};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Fully connected; weights row-major `out × in`.
    Dense,
    /// Sparsely connected; one weight per mask connection, in mask order.
    Sparse(SparseMask),
    /// Valid-padding convolution over a CHW input; weights
    /// `[out_ch][in_ch][kernel][kernel]`.
    Conv {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
    },
    LeakyRelu { slope: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn dense(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn sparse(mask: SparseMask) -> Self {
        let (in_dim, out_dim) = (mask.in_dim, mask.out_dim);
        Self {
            weight: vec![0.0; mask.num_connections()],
            bias: vec![0.0; out_dim],
            kind: LayerKind::Sparse(mask),
            in_dim,
            out_dim,
        }
    }

    pub fn conv(in_channels: usize, out_channels: usize, height: usize, width: usize, kernel: usize, stride: usize) -> Result<Self> {
        if kernel == 0 || stride == 0 || height < kernel || width < kernel {
            return Err(Error::Config(format!(
                "convolution kernel {kernel} stride {stride} does not fit a {height}×{width} input"
            )));
        }
        let (oh, ow) = ((height - kernel) / stride + 1, (width - kernel) / stride + 1);
        Ok(Self {
            kind: LayerKind::Conv {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
                stride,
            },
            in_dim: in_channels * height * width,
            out_dim: out_channels * oh * ow,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn leaky_relu(dim: usize, slope: f64) -> Self {
        Self {
            kind: LayerKind::LeakyRelu { slope },
            in_dim: dim,
            out_dim: dim,
            weight: Vec::new(),
            bias: Vec::new(),
        }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self.kind, LayerKind::LeakyRelu { .. })
    }

    /// Number of inputs feeding each output unit (for sparse layers the
    /// mean in-degree).
    pub fn fan_in(&self) -> f64 {
        match &self.kind {
            LayerKind::Dense => self.in_dim as f64,
            LayerKind::Sparse(m) => m.num_connections() as f64 / m.out_dim.max(1) as f64,
            LayerKind::Conv { in_channels, kernel, .. } => (in_channels * kernel * kernel) as f64,
            LayerKind::LeakyRelu { .. } => 0.0,
        }
    }

    /// He-uniform weights `U(−√(6/fan_in), √(6/fan_in))` and zero biases.
    /// Sparse layers use each unit's own in-degree.
    pub fn init_he(&mut self, rng: &mut impl Rng) {
        match &self.kind {
            LayerKind::Sparse(m) => {
                for o in 0..m.out_dim {
                    let r = m.row(o);
                    let bound = (6.0 / r.len().max(1) as f64).sqrt();
                    for w in &mut self.weight[m.offsets[o]..m.offsets[o + 1]] {
                        *w = rng.random_range(-bound..=bound);
                    }
                }
            }
            LayerKind::LeakyRelu { .. } => {}
            _ => {
                let bound = (6.0 / self.fan_in().max(1.0)).sqrt();
                for w in &mut self.weight {
                    *w = rng.random_range(-bound..=bound);
                }
            }
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    fn forward(&self, x: &[f64], y: &mut [f64]) {
        match &self.kind {
            LayerKind::Dense => {
                for (o, yo) in y.iter_mut().enumerate() {
                    let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                    *yo = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            LayerKind::Sparse(m) => {
                for (o, yo) in y.iter_mut().enumerate() {
                    let ws = &self.weight[m.offsets[o]..m.offsets[o + 1]];
                    *yo = self.bias[o] + m.row(o).iter().zip(ws).map(|(&i, w)| w * x[i as usize]).sum::<f64>();
                }
            }
            LayerKind::Conv {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
                stride,
            } => {
                let (oh, ow) = ((height - kernel) / stride + 1, (width - kernel) / stride + 1);
                for o in 0..*out_channels {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut s = self.bias[o];
                            for c in 0..*in_channels {
                                for u in 0..*kernel {
                                    let xr = &x[(c * height + i * stride + u) * width + j * stride..];
                                    let wr = &self.weight[((o * in_channels + c) * kernel + u) * kernel..];
                                    for v in 0..*kernel {
                                        s += wr[v] * xr[v];
                                    }
                                }
                            }
                            y[(o * oh + i) * ow + j] = s;
                        }
                    }
                }
            }
            LayerKind::LeakyRelu { slope } => {
                for (yo, &v) in y.iter_mut().zip(x) {
                    *yo = if v > 0.0 { v } else { slope * v };
                }
            }
        }
    }

    /// `dx` only, for layers whose parameters are held fixed.
    fn backward_input(&self, dy: &[f64], dx: &mut [f64], x: &[f64]) {
        match &self.kind {
            LayerKind::Dense => {
                for (o, &g) in dy.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                    for (d, w) in dx.iter_mut().zip(row) {
                        *d += g * w;
                    }
                }
            }
            LayerKind::Sparse(m) => {
                for (o, &g) in dy.iter().enumerate() {
                    let ws = &self.weight[m.offsets[o]..m.offsets[o + 1]];
                    for (&i, w) in m.row(o).iter().zip(ws) {
                        dx[i as usize] += g * w;
                    }
                }
            }
            LayerKind::Conv {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
                stride,
            } => {
                let (oh, ow) = ((height - kernel) / stride + 1, (width - kernel) / stride + 1);
                for o in 0..*out_channels {
                    for i in 0..oh {
                        for j in 0..ow {
                            let g = dy[(o * oh + i) * ow + j];
                            if g == 0.0 {
                                continue;
                            }
                            for c in 0..*in_channels {
                                for u in 0..*kernel {
                                    let xo = (c * height + i * stride + u) * width + j * stride;
                                    let wo = ((o * in_channels + c) * kernel + u) * kernel;
                                    for v in 0..*kernel {
                                        dx[xo + v] += g * self.weight[wo + v];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::LeakyRelu { slope } => {
                for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(x) {
                    *d = if v > 0.0 { g } else { slope * g };
                }
            }
        }
    }

    /// Accumulates parameter gradients into `gw`, `gb` and writes `dx`.
    fn backward(&self, x: &[f64], dy: &[f64], dx: &mut [f64], params: Option<(&mut [f64], &mut [f64])>) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        let Some((gw, gb)) = params else {
            self.backward_input(dy, dx, x);
            return;
        };
        match &self.kind {
            LayerKind::Dense => {
                for (o, &g) in dy.iter().enumerate() {
                    gb[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    let row = o * self.in_dim..(o + 1) * self.in_dim;
                    for ((gwi, w), (dxi, xi)) in gw[row.clone()]
                        .iter_mut()
                        .zip(&self.weight[row])
                        .zip(dx.iter_mut().zip(x))
                    {
                        *gwi += g * xi;
                        *dxi += g * w;
                    }
                }
            }
            LayerKind::Sparse(m) => {
                for (o, &g) in dy.iter().enumerate() {
                    gb[o] += g;
                    let span = m.offsets[o]..m.offsets[o + 1];
                    for ((&i, w), gwi) in m.row(o).iter().zip(&self.weight[span.clone()]).zip(&mut gw[span]) {
                        *gwi += g * x[i as usize];
                        dx[i as usize] += g * w;
                    }
                }
            }
            LayerKind::Conv {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
                stride,
            } => {
                let (oh, ow) = ((height - kernel) / stride + 1, (width - kernel) / stride + 1);
                for o in 0..*out_channels {
                    for i in 0..oh {
                        for j in 0..ow {
                            let g = dy[(o * oh + i) * ow + j];
                            gb[o] += g;
                            if g == 0.0 {
                                continue;
                            }
                            for c in 0..*in_channels {
                                for u in 0..*kernel {
                                    let xo = (c * height + i * stride + u) * width + j * stride;
                                    let wo = ((o * in_channels + c) * kernel + u) * kernel;
                                    for v in 0..*kernel {
                                        gw[wo + v] += g * x[xo + v];
                                        dx[xo + v] += g * self.weight[wo + v];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::LeakyRelu { slope } => {
                for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(x) {
                    *d = if v > 0.0 { g } else { slope * g };
                }
            }
        }
    }
}

/// Per-layer gradient tensors shaped like the network parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight).chain(self.bias.iter_mut().zip(&other.bias)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Layer-major, weights before biases; matches [`Network::params_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weight.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Layer inputs recorded by a forward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape {
                    expected: pair[0].out_dim,
                    actual: pair[1].in_dim,
                });
            }
        }
        if layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn init_he(&mut self, rng: &mut impl Rng) {
        for l in &mut self.layers {
            l.init_he(rng);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::Shape {
                expected: self.in_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut y = vec![0.0; l.out_dim];
            l.forward(&cur, &mut y);
            inputs.push(std::mem::replace(&mut cur, y));
        }
        Ok((cur, Tape { inputs }))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut y = vec![0.0; l.out_dim];
            l.forward(&cur, &mut y);
            cur = y;
        }
        Ok(cur)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            weight: self.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_into(&self, tape: &Tape, dy: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if dy.len() != self.out_dim() {
            return Err(Error::Shape {
                expected: self.out_dim(),
                actual: dy.len(),
            });
        }
        let mut g = dy.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let mut dx = vec![0.0; l.in_dim];
            l.backward(&tape.inputs[k], &g, &mut dx, Some((&mut grads.weight[k], &mut grads.bias[k])));
            g = dx;
        }
        Ok(g)
    }

    /// `dL/dx` without parameter gradients.
    pub fn input_grad(&self, tape: &Tape, dy: &[f64]) -> Result<Vec<f64>> {
        if dy.len() != self.out_dim() {
            return Err(Error::Shape {
                expected: self.out_dim(),
                actual: dy.len(),
            });
        }
        let mut g = dy.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let mut dx = vec![0.0; l.in_dim];
            l.backward(&tape.inputs[k], &g, &mut dx, None);
            g = dx;
        }
        Ok(g)
    }

    pub fn backward(&self, tape: &Tape, dy: &[f64]) -> Result<(Vec<f64>, Gradients)> {
        let mut grads = self.zero_grads();
        let dx = self.backward_into(tape, dy, &mut grads)?;
        Ok((dx, grads))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape {
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dense_passes_through() {
        let mut l = Layer::dense(3, 3);
        for i in 0..3 {
            l.weight[i * 3 + i] = 1.0;
        }
        let net = Network::new(vec![l]).unwrap();
        let (y, tape) = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 0.5]);
        let (dx, _) = net.backward(&tape, &[0.3, 0.1, -1.0]).unwrap();
        assert_eq!(dx, vec![0.3, 0.1, -1.0]);
    }

    #[test]
    fn conv_output_dims() {
        let l = Layer::conv(1, 8, 128, 128, 2, 2).unwrap();
        assert_eq!(l.out_dim, 8 * 64 * 64);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = Network::new(vec![Layer::dense(3, 2)]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { expected: 3, actual: 1 })));
        assert!(Network::new(vec![Layer::dense(3, 2), Layer::dense(3, 1)]).is_err());
    }
}
