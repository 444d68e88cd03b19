//! Kolmogorov-Arnold layers.
//!
//! Every edge `(j, i)` of a layer carries its own univariate function
//!
//! ```text
//! phi(x) = w_base * silu(x) + w_spline * sum_m c_m B_m(x)
//! ```
//!
//! and output `j` is the sum over inputs `i` of `phi_{j,i}(x_i)`. All edges of
//! a layer share one [`BSplineGrid`], so the basis is evaluated once per input.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::bspline::BSplineGrid;
use crate::math::{silu, silu_grad, sqrt};
use crate::{Error, Result};

/// Standard deviation of the initial spline coefficients.
pub const INIT_COEFF_STD: f64 = 0.1;

/// Parameters of one learnable activation.
#[derive(Debug, Clone, PartialEq)]
pub struct KanEdge {
    /// One coefficient per basis function.
    pub spline_coeffs: Vec<f64>,
    /// Weight on the silu residual branch.
    pub w_base: f64,
    /// Weight on the spline branch.
    pub w_spline: f64,
}

/// Scalar value of an edge activation.
pub fn edge_activation(x: f64, edge: &KanEdge, grid: &BSplineGrid) -> f64 {
    debug_assert_eq!(edge.spline_coeffs.len(), grid.num_basis());
    let lb = grid.local(x);
    let spline: f64 = lb
        .values()
        .iter()
        .zip(&edge.spline_coeffs[lb.start..])
        .map(|(b, c)| b * c)
        .sum();
    edge.w_base * silu(x) + edge.w_spline * spline
}

/// A dense `out_dim x in_dim` matrix of edges over a shared grid.
///
/// Parameters are stored input-major: edge `(j, i)` has flat index
/// `i * out_dim + j`, and its coefficients occupy
/// `coeffs[e * nb .. (e + 1) * nb]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    in_dim: usize,
    out_dim: usize,
    grid: BSplineGrid,
    coeffs: Vec<f64>,
    w_base: Vec<f64>,
    w_spline: Vec<f64>,
}

/// Gradient buffers shaped like a [`KanLayer`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    /// d/d spline coefficients.
    pub coeffs: Vec<f64>,
    /// d/d w_base.
    pub w_base: Vec<f64>,
    /// d/d w_spline.
    pub w_spline: Vec<f64>,
}

impl LayerGrad {
    /// Zeroes every buffer.
    pub fn clear(&mut self) {
        self.coeffs.fill(0.0);
        self.w_base.fill(0.0);
        self.w_spline.fill(0.0);
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        for v in self
            .coeffs
            .iter_mut()
            .chain(self.w_base.iter_mut())
            .chain(self.w_spline.iter_mut())
        {
            *v *= s;
        }
    }
}

impl KanLayer {
    /// Layer with every parameter zero (the null function).
    pub fn zeros(in_dim: usize, out_dim: usize, grid: BSplineGrid) -> Self {
        let n = in_dim * out_dim;
        KanLayer {
            in_dim,
            out_dim,
            grid,
            coeffs: vec![0.0; n * grid.num_basis()],
            w_base: vec![0.0; n],
            w_spline: vec![0.0; n],
        }
    }

    /// Random initialization: coefficients `N(0, 0.1)`, `w_spline = 1`,
    /// `w_base ~ U(-1/sqrt(in_dim), 1/sqrt(in_dim))`.
    pub fn random<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, grid: BSplineGrid, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim, grid);
        let normal = Normal::new(0.0, INIT_COEFF_STD).expect("valid std");
        for c in &mut layer.coeffs {
            *c = normal.sample(rng);
        }
        let bound = 1.0 / sqrt(in_dim.max(1) as f64);
        let uniform = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        for w in &mut layer.w_base {
            *w = uniform.sample(rng);
        }
        layer.w_spline.fill(1.0);
        layer
    }

    /// Builds a layer from flat input-major parameter arrays.
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        grid: BSplineGrid,
        coeffs: Vec<f64>,
        w_base: Vec<f64>,
        w_spline: Vec<f64>,
    ) -> Result<Self> {
        let n = in_dim * out_dim;
        if w_base.len() != n {
            return Err(Error::shape("w_base", n, w_base.len()));
        }
        if w_spline.len() != n {
            return Err(Error::shape("w_spline", n, w_spline.len()));
        }
        if coeffs.len() != n * grid.num_basis() {
            return Err(Error::shape("spline coefficients", n * grid.num_basis(), coeffs.len()));
        }
        if coeffs.iter().chain(&w_base).chain(&w_spline).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite layer parameter".into()));
        }
        Ok(KanLayer {
            in_dim,
            out_dim,
            grid,
            coeffs,
            w_base,
            w_spline,
        })
    }

    /// Input width.
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// Output width.
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Shared spline grid.
    pub fn grid(&self) -> &BSplineGrid {
        &self.grid
    }

    /// Flat coefficient array, input-major.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Flat base weights, input-major.
    pub fn w_base(&self) -> &[f64] {
        &self.w_base
    }

    /// Flat spline weights, input-major.
    pub fn w_spline(&self) -> &[f64] {
        &self.w_spline
    }

    /// Mutable views of `(coeffs, w_base, w_spline)`.
    pub fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.coeffs, &mut self.w_base, &mut self.w_spline]
    }

    #[inline]
    fn index(&self, out: usize, inp: usize) -> usize {
        inp * self.out_dim + out
    }

    /// Copy of edge `(out, inp)`.
    pub fn edge(&self, out: usize, inp: usize) -> KanEdge {
        let e = self.index(out, inp);
        let nb = self.grid.num_basis();
        KanEdge {
            spline_coeffs: self.coeffs[e * nb..(e + 1) * nb].to_vec(),
            w_base: self.w_base[e],
            w_spline: self.w_spline[e],
        }
    }

    /// Overwrites edge `(out, inp)`.
    pub fn set_edge(&mut self, out: usize, inp: usize, edge: &KanEdge) -> Result<()> {
        let nb = self.grid.num_basis();
        if edge.spline_coeffs.len() != nb {
            return Err(Error::shape("edge coefficients", nb, edge.spline_coeffs.len()));
        }
        let e = self.index(out, inp);
        self.coeffs[e * nb..(e + 1) * nb].copy_from_slice(&edge.spline_coeffs);
        self.w_base[e] = edge.w_base;
        self.w_spline[e] = edge.w_spline;
        Ok(())
    }

    /// Zero-filled gradient buffers for this layer.
    pub fn zero_grad(&self) -> LayerGrad {
        LayerGrad {
            coeffs: vec![0.0; self.coeffs.len()],
            w_base: vec![0.0; self.w_base.len()],
            w_spline: vec![0.0; self.w_spline.len()],
        }
    }

    /// `y_j = sum_i phi_{j,i}(x_i)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.out_dim];
        self.forward_into(x, &mut y)?;
        Ok(y)
    }

    /// [`forward`](Self::forward) into a caller buffer.
    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::shape("layer input", self.in_dim, x.len()));
        }
        if y.len() != self.out_dim {
            return Err(Error::shape("layer output", self.out_dim, y.len()));
        }
        y.fill(0.0);
        let nb = self.grid.num_basis();
        for (i, &xi) in x.iter().enumerate() {
            let lb = self.grid.local(xi);
            let vals = lb.values();
            let sx = silu(xi);
            let row = i * self.out_dim;
            for (j, yj) in y.iter_mut().enumerate() {
                let e = row + j;
                let c = &self.coeffs[e * nb + lb.start..];
                let spline: f64 = vals.iter().zip(c).map(|(b, c)| b * c).sum();
                *yj += self.w_base[e] * sx + self.w_spline[e] * spline;
            }
        }
        Ok(())
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`,
    /// given the layer input `x` and `upstream = dL/dy`.
    pub fn backward(&self, x: &[f64], upstream: &[f64], grad: &mut LayerGrad) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::shape("layer input", self.in_dim, x.len()));
        }
        if upstream.len() != self.out_dim {
            return Err(Error::shape("upstream gradient", self.out_dim, upstream.len()));
        }
        if grad.w_base.len() != self.w_base.len() || grad.coeffs.len() != self.coeffs.len() {
            return Err(Error::shape("gradient buffer", self.w_base.len(), grad.w_base.len()));
        }
        let nb = self.grid.num_basis();
        let mut gx = vec![0.0; self.in_dim];
        for (i, &xi) in x.iter().enumerate() {
            let lb = self.grid.local(xi);
            let vals = lb.values();
            let ders = lb.derivs();
            let sx = silu(xi);
            let dsx = silu_grad(xi);
            let row = i * self.out_dim;
            let mut acc = 0.0;
            for (j, &g) in upstream.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let e = row + j;
                let off = e * nb + lb.start;
                let c = &self.coeffs[off..off + vals.len()];
                let mut spline = 0.0;
                let mut dspline = 0.0;
                for q in 0..vals.len() {
                    spline += c[q] * vals[q];
                    dspline += c[q] * ders[q];
                }
                let ws = self.w_spline[e];
                grad.w_base[e] += g * sx;
                grad.w_spline[e] += g * spline;
                let gc = &mut grad.coeffs[off..off + vals.len()];
                let gws = g * ws;
                for q in 0..vals.len() {
                    gc[q] += gws * vals[q];
                }
                acc += g * (self.w_base[e] * dsx + ws * dspline);
            }
            gx[i] = acc;
        }
        Ok(gx)
    }
}

/// Free-function form of [`KanLayer::forward`].
pub fn layer_forward(layer: &KanLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

/// Gradients of `upstream . layer_forward(layer, x)` with respect to the
/// input and to every edge parameter.
pub fn layer_backward(layer: &KanLayer, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, LayerGrad)> {
    let mut grad = layer.zero_grad();
    let gx = layer.backward(x, upstream, &mut grad)?;
    Ok((gx, grad))
}
