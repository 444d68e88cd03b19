//! Kolmogorov-Arnold autoencoder.
//!
//! The encoder maps an `m`-sample waveform through decreasing widths down to a
//! small latent code; the decoder mirrors the widths back up to `m`. The
//! reconstruction of a pristine-looking signal serves as its virtual baseline.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bspline::BSplineGrid;
use crate::kan::{KanLayer, LayerGrad};
use crate::math::mix64;
use crate::{Error, Result};

/// Encoder widths of the full-size model; the decoder mirrors them.
pub const DEFAULT_WIDTHS: [usize; 4] = [6000, 512, 256, 8];

/// How squared errors are reduced over the samples of one waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Sum divided by the waveform length.
    #[default]
    Mean,
    /// Plain sum of squares.
    Sum,
}

/// Squared reconstruction error between `x` and `x_rec`.
pub fn loss(x: &[f64], x_rec: &[f64], reduction: Reduction) -> Result<f64> {
    if x.len() != x_rec.len() {
        return Err(Error::shape("reconstruction", x.len(), x_rec.len()));
    }
    let sum: f64 = x.iter().zip(x_rec).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(match reduction {
        Reduction::Mean if !x.is_empty() => sum / x.len() as f64,
        _ => sum,
    })
}

/// Encoder and decoder stacks of KAN layers.
#[derive(Debug, Clone, PartialEq)]
pub struct KaeModel {
    encoder: Vec<KanLayer>,
    decoder: Vec<KanLayer>,
}

/// Gradient buffers mirroring a [`KaeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct KaeGrad {
    /// One per encoder layer.
    pub encoder: Vec<LayerGrad>,
    /// One per decoder layer.
    pub decoder: Vec<LayerGrad>,
}

impl KaeGrad {
    /// Zeroes all buffers.
    pub fn clear(&mut self) {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).for_each(LayerGrad::clear);
    }

    /// Multiplies all buffers by `s`.
    pub fn scale(&mut self, s: f64) {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).for_each(|g| g.scale(s));
    }

    /// Flat views in the same order as [`KaeModel::param_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|g| [g.coeffs.as_slice(), g.w_base.as_slice(), g.w_spline.as_slice()])
            .collect()
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "autoencoder needs at least an input and a latent width, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::Config(format!("zero layer width in {widths:?}")));
    }
    Ok(())
}

impl KaeModel {
    /// Randomly initialized model with encoder widths `widths`
    /// (e.g. `[m, 512, 256, 8]`) and the mirrored decoder.
    pub fn new_random(widths: &[usize], grid: BSplineGrid, seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x4B41_455F_494E_4954));
        let encoder = widths
            .windows(2)
            .map(|w| KanLayer::random(w[0], w[1], grid, &mut rng))
            .collect();
        let decoder = widths
            .windows(2)
            .rev()
            .map(|w| KanLayer::random(w[1], w[0], grid, &mut rng))
            .collect();
        Ok(KaeModel { encoder, decoder })
    }

    /// Model whose every parameter is zero.
    pub fn zeros(widths: &[usize], grid: BSplineGrid) -> Result<Self> {
        check_widths(widths)?;
        let encoder = widths.windows(2).map(|w| KanLayer::zeros(w[0], w[1], grid)).collect();
        let decoder = widths.windows(2).rev().map(|w| KanLayer::zeros(w[1], w[0], grid)).collect();
        Ok(KaeModel { encoder, decoder })
    }

    /// Assembles a model from explicit layers, checking that widths chain and
    /// that the decoder ends at the encoder's input width.
    pub fn from_layers(encoder: Vec<KanLayer>, decoder: Vec<KanLayer>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::Config("encoder and decoder need at least one layer".into()));
        }
        for stack in [&encoder, &decoder] {
            for w in stack.windows(2) {
                if w[0].out_dim() != w[1].in_dim() {
                    return Err(Error::shape("layer chaining", w[0].out_dim(), w[1].in_dim()));
                }
            }
        }
        let latent = encoder.last().map(KanLayer::out_dim).unwrap_or(0);
        if decoder[0].in_dim() != latent {
            return Err(Error::shape("decoder input", latent, decoder[0].in_dim()));
        }
        let m = encoder[0].in_dim();
        let out = decoder.last().map(KanLayer::out_dim).unwrap_or(0);
        if out != m {
            return Err(Error::shape("decoder output", m, out));
        }
        Ok(KaeModel { encoder, decoder })
    }

    /// Encoder layers, input side first.
    pub fn encoder(&self) -> &[KanLayer] {
        &self.encoder
    }

    /// Decoder layers, latent side first.
    pub fn decoder(&self) -> &[KanLayer] {
        &self.decoder
    }

    /// Encoder widths `[m, ..., latent]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.encoder.iter().map(KanLayer::in_dim).collect();
        w.push(self.latent_width());
        w
    }

    /// Input (and output) waveform length `m`.
    pub fn input_width(&self) -> usize {
        self.encoder[0].in_dim()
    }

    /// Bottleneck width.
    pub fn latent_width(&self) -> usize {
        self.encoder[self.encoder.len() - 1].out_dim()
    }

    /// Grid of the first layer. Every layer of a model built by this crate shares it.
    pub fn grid(&self) -> &BSplineGrid {
        self.encoder[0].grid()
    }

    /// Latent code of `x`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::shape("encoder input", self.input_width(), x.len()));
        }
        run(&self.encoder, x)
    }

    /// Waveform decoded from latent code `s`.
    pub fn decode(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.latent_width() {
            return Err(Error::shape("decoder input", self.latent_width(), s.len()));
        }
        run(&self.decoder, s)
    }

    /// `decode(encode(x))`.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }

    /// Zeroed gradient buffers.
    pub fn zero_grad(&self) -> KaeGrad {
        KaeGrad {
            encoder: self.encoder.iter().map(KanLayer::zero_grad).collect(),
            decoder: self.decoder.iter().map(KanLayer::zero_grad).collect(),
        }
    }

    /// Reconstruction loss of `x` with its parameter gradient accumulated
    /// into `grad`. Also returns the total derivative of the loss with
    /// respect to `x`, including its direct appearance as the target.
    pub fn backprop(&self, x: &[f64], reduction: Reduction, grad: &mut KaeGrad) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.input_width() {
            return Err(Error::shape("encoder input", self.input_width(), x.len()));
        }
        let layers: Vec<&KanLayer> = self.encoder.iter().chain(&self.decoder).collect();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &layers {
            let next = layer.forward(&acts[acts.len() - 1])?;
            acts.push(next);
        }
        let out = &acts[layers.len()];
        let value = loss(x, out, reduction)?;
        let scale = match reduction {
            Reduction::Mean => 2.0 / x.len() as f64,
            Reduction::Sum => 2.0,
        };
        let mut upstream: Vec<f64> = out.iter().zip(x).map(|(o, t)| scale * (o - t)).collect();
        let direct: Vec<f64> = upstream.iter().map(|g| -g).collect();
        let n_enc = self.encoder.len();
        for (l, layer) in layers.iter().enumerate().rev() {
            let g = if l < n_enc {
                &mut grad.encoder[l]
            } else {
                &mut grad.decoder[l - n_enc]
            };
            upstream = layer.backward(&acts[l], &upstream, g)?;
        }
        let dx = upstream.iter().zip(&direct).map(|(a, b)| a + b).collect();
        Ok((value, dx))
    }

    /// Named mutable parameter blocks, encoder first, `(coeffs, w_base, w_spline)` per layer.
    pub fn param_blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (side, stack) in [("encoder", &mut self.encoder), ("decoder", &mut self.decoder)] {
            for (l, layer) in stack.iter_mut().enumerate() {
                let [c, b, s] = layer.params_mut();
                out.push((format!("{side}[{l}].coeffs"), c));
                out.push((format!("{side}[{l}].w_base"), b));
                out.push((format!("{side}[{l}].w_spline"), s));
            }
        }
        out
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(|l| l.coeffs().len() + l.w_base().len() + l.w_spline().len())
            .sum()
    }
}

fn run(layers: &[KanLayer], x: &[f64]) -> Result<Vec<f64>> {
    let mut cur = x.to_vec();
    for layer in layers {
        cur = layer.forward(&cur)?;
    }
    Ok(cur)
}
