//! Layer primitives with explicit backward passes.
//!
//! The architecture here is small and fixed, so no graph framework is
//! used: each layer exposes `forward_train` (returning whatever cache its
//! backward pass needs), `forward_eval`, and `backward` (accumulating
//! parameter gradients and returning the input gradient). Convolutions
//! run as im2col + matrix multiplication. Activations flow in
//! `(batch, position, channel)` layout so the innermost gather in im2col
//! copies contiguous channel slices.
//!
//! Parameters are visited in a fixed declaration order through
//! [`ParamVisitor`]; the optimizer, EMA update, and checkpoint code all
//! rely on that order and on stable parameter names.

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Borrowed view of one named parameter tensor and its gradient.
pub struct ParamRef<'a, T> {
    pub name: &'a str,
    pub value: &'a mut [T],
    pub grad: &'a mut [T],
}

/// Borrowed view of one named non-trainable state tensor (batch-norm
/// running statistics).
pub struct StateRef<'a, T> {
    pub name: &'a str,
    pub value: &'a mut [T],
}

/// Walks every tensor a layer owns, in a fixed order.
pub trait ParamVisitor<T: Real> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>));
    fn visit_state(&mut self, _f: &mut dyn FnMut(StateRef<'_, T>)) {}
}

/// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and
/// biases, drawn from a stream derived from `(seed, parameter name)` so
/// initialization does not depend on construction order.
fn init_uniform<T: Real>(seed: u64, name: &str, fan_in: usize, buf: &mut [T]) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut rng = seed::stream(seed, &["init", name]);
    for x in buf.iter_mut() {
        let r: f64 = rng.random();
        *x = T::c((2.0 * r - 1.0) * bound);
    }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

/// Fully connected layer, `y = x W^T + b`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub name: String,
    pub w: Array2<T>, // (out, in)
    pub b: Array1<T>,
    pub gw: Array2<T>,
    pub gb: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut w = Array2::zeros((out_dim, in_dim));
        let mut b = Array1::zeros(out_dim);
        init_uniform(seed, &format!("{name}.weight"), in_dim, w.as_slice_mut().unwrap());
        init_uniform(seed, &format!("{name}.bias"), in_dim, b.as_slice_mut().unwrap());
        Self {
            name: name.to_string(),
            gw: Array2::zeros(w.raw_dim()),
            gb: Array1::zeros(b.raw_dim()),
            w,
            b,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        y
    }

    /// Accumulates `gw`/`gb` and returns the input gradient.
    pub fn backward(&mut self, x: &Array2<T>, gy: &Array2<T>) -> Array2<T> {
        self.gw += &gy.t().dot(x);
        self.gb += &gy.sum_axis(Axis(0));
        gy.dot(&self.w)
    }
}

impl<T: Real> ParamVisitor<T> for Linear<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        f(ParamRef {
            name: &format!("{}.weight", self.name),
            value: self.w.as_slice_mut().unwrap(),
            grad: self.gw.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: &format!("{}.bias", self.name),
            value: self.b.as_slice_mut().unwrap(),
            grad: self.gb.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// ReLU (stateless helpers)
// ---------------------------------------------------------------------------

pub fn relu_inplace<T: Real, D: ndarray::Dimension>(x: &mut ndarray::Array<T, D>) {
    x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Input gradient of ReLU given the post-activation output.
pub fn relu_backward<T: Real, D: ndarray::Dimension>(
    gy: &ndarray::Array<T, D>,
    post: &ndarray::Array<T, D>,
) -> ndarray::Array<T, D> {
    let mut gx = gy.clone();
    gx.zip_mut_with(post, |g, &p| {
        if p <= T::zero() {
            *g = T::zero();
        }
    });
    gx
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

/// 1D convolution in `(batch, position, channel)` layout.
///
/// Weights are stored as `(c_out, k * c_in)` with column index
/// `k_idx * c_in + c`, matching the im2col patch layout.
#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub gw: Array2<T>,
    pub gb: Array1<T>,
}

impl<T: Real> Conv1d<T> {
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        seed: u64,
    ) -> Self {
        let fan_in = c_in * kernel;
        let mut w = Array2::zeros((c_out, fan_in));
        let mut b = Array1::zeros(c_out);
        init_uniform(seed, &format!("{name}.weight"), fan_in, w.as_slice_mut().unwrap());
        init_uniform(seed, &format!("{name}.bias"), fan_in, b.as_slice_mut().unwrap());
        Self {
            name: name.to_string(),
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            gw: Array2::zeros(w.raw_dim()),
            gb: Array1::zeros(b.raw_dim()),
            w,
            b,
        }
    }

    pub fn out_len(&self, l_in: usize) -> Result<usize> {
        let padded = l_in + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::Validation(format!(
                "input length {l_in} too short for kernel {} with padding {}",
                self.kernel, self.padding
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// Gather sliding windows into `(b * l_out, k * c_in)`.
    fn im2col(&self, x: &Array3<T>, l_out: usize) -> Array2<T> {
        let (b, l_in, c_in) = x.dim();
        let cols = self.kernel * c_in;
        let mut patches = Array2::zeros((b * l_out, cols));
        let xs = x.as_slice().expect("contiguous input");
        let ps = patches.as_slice_mut().unwrap();
        for bi in 0..b {
            let x_base = bi * l_in * c_in;
            for o in 0..l_out {
                let row = (bi * l_out + o) * cols;
                let start = (o * self.stride) as isize - self.padding as isize;
                for k in 0..self.kernel {
                    let pos = start + k as isize;
                    if pos >= 0 && (pos as usize) < l_in {
                        let src = x_base + pos as usize * c_in;
                        let dst = row + k * c_in;
                        ps[dst..dst + c_in].copy_from_slice(&xs[src..src + c_in]);
                    }
                }
            }
        }
        patches
    }

    /// Scatter-add of patch gradients back onto the input, inverse of
    /// [`Self::im2col`].
    fn col2im(&self, gpatches: &Array2<T>, b: usize, l_in: usize) -> Array3<T> {
        let c_in = self.c_in;
        let cols = self.kernel * c_in;
        let l_out = gpatches.nrows() / b;
        let mut gx = Array3::zeros((b, l_in, c_in));
        let gp = gpatches.as_slice().expect("contiguous patches");
        let gxs = gx.as_slice_mut().unwrap();
        for bi in 0..b {
            let x_base = bi * l_in * c_in;
            for o in 0..l_out {
                let row = (bi * l_out + o) * cols;
                let start = (o * self.stride) as isize - self.padding as isize;
                for k in 0..self.kernel {
                    let pos = start + k as isize;
                    if pos >= 0 && (pos as usize) < l_in {
                        let dst = x_base + pos as usize * c_in;
                        let src = row + k * c_in;
                        for c in 0..c_in {
                            gxs[dst + c] += gp[src + c];
                        }
                    }
                }
            }
        }
        gx
    }

    pub fn forward(&self, x: &Array3<T>) -> Result<Array3<T>> {
        let (b, l_in, c_in) = x.dim();
        debug_assert_eq!(c_in, self.c_in);
        let l_out = self.out_len(l_in)?;
        let patches = self.im2col(x, l_out);
        let mut y2 = patches.dot(&self.w.t());
        y2 += &self.b;
        Ok(y2.into_shape_with_order((b, l_out, self.c_out)).unwrap())
    }

    pub fn backward(&mut self, x: &Array3<T>, gy: &Array3<T>) -> Array3<T> {
        let (b, l_in, _) = x.dim();
        let (_, l_out, _) = gy.dim();
        let gy2 = gy
            .view()
            .into_shape_with_order((b * l_out, self.c_out))
            .expect("contiguous gradient");
        let patches = self.im2col(x, l_out);
        self.gw += &gy2.t().dot(&patches);
        self.gb += &gy2.sum_axis(Axis(0));
        let gpatches = gy2.dot(&self.w);
        self.col2im(&gpatches, b, l_in)
    }
}

impl<T: Real> ParamVisitor<T> for Conv1d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        f(ParamRef {
            name: &format!("{}.weight", self.name),
            value: self.w.as_slice_mut().unwrap(),
            grad: self.gw.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: &format!("{}.bias", self.name),
            value: self.b.as_slice_mut().unwrap(),
            grad: self.gb.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// BatchNorm1d
// ---------------------------------------------------------------------------

/// Per-channel batch normalization over `(batch, position)`.
///
/// Training mode normalizes with biased batch statistics and folds an
/// exponential update (momentum 0.1, unbiased variance) into the running
/// statistics; evaluation mode normalizes with the running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T> {
    pub name: String,
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub ggamma: Array1<T>,
    pub gbeta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
    pub momentum: f64,
    pub eps: f64,
}

pub struct BnCache<T> {
    /// Normalized activations before scale/shift.
    xhat: Array3<T>,
    inv_std: Array1<T>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            name: name.to_string(),
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            ggamma: Array1::zeros(channels),
            gbeta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn forward_train(&mut self, x: &Array3<T>) -> (Array3<T>, BnCache<T>) {
        let (b, l, c) = x.dim();
        let n = (b * l) as f64;
        let xs = x.as_slice().expect("contiguous input");
        let mut mean = vec![T::zero(); c];
        for row in xs.chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv_n = T::c(1.0 / n);
        for m in &mut mean {
            *m *= inv_n;
        }
        let mut var = vec![T::zero(); c];
        for row in xs.chunks_exact(c) {
            for ((v, &m), &xv) in var.iter_mut().zip(&mean).zip(row) {
                let d = xv - m;
                *v += d * d;
            }
        }
        for v in &mut var {
            *v *= inv_n;
        }

        let inv_std: Vec<T> =
            var.iter().map(|&v| T::one() / (v + T::c(self.eps)).sqrt()).collect();
        let mut xhat = Array3::zeros((b, l, c));
        let mut y = Array3::zeros((b, l, c));
        {
            let xh = xhat.as_slice_mut().unwrap();
            let ys = y.as_slice_mut().unwrap();
            let gamma = self.gamma.as_slice().unwrap();
            let beta = self.beta.as_slice().unwrap();
            for (row_i, row) in xs.chunks_exact(c).enumerate() {
                let base = row_i * c;
                for ci in 0..c {
                    let h = (row[ci] - mean[ci]) * inv_std[ci];
                    xh[base + ci] = h;
                    ys[base + ci] = h * gamma[ci] + beta[ci];
                }
            }
        }

        // Running statistics use the unbiased variance estimate.
        let m = T::c(self.momentum);
        let unbias = T::c(if n > 1.0 { n / (n - 1.0) } else { 1.0 });
        for ci in 0..c {
            self.running_mean[ci] = self.running_mean[ci] * (T::one() - m) + mean[ci] * m;
            self.running_var[ci] = self.running_var[ci] * (T::one() - m) + var[ci] * unbias * m;
        }

        (y, BnCache { xhat, inv_std: Array1::from_vec(inv_std) })
    }

    pub fn forward_eval(&self, x: &Array3<T>) -> Array3<T> {
        let (b, l, c) = x.dim();
        let scale: Vec<T> = (0..c)
            .map(|ci| {
                self.gamma[ci] / (self.running_var[ci] + T::c(self.eps)).sqrt()
            })
            .collect();
        let shift: Vec<T> =
            (0..c).map(|ci| self.beta[ci] - self.running_mean[ci] * scale[ci]).collect();
        let mut y = Array3::zeros((b, l, c));
        let xs = x.as_slice().expect("contiguous input");
        let ys = y.as_slice_mut().unwrap();
        for (row_i, row) in xs.chunks_exact(c).enumerate() {
            let base = row_i * c;
            for ci in 0..c {
                ys[base + ci] = row[ci] * scale[ci] + shift[ci];
            }
        }
        y
    }

    pub fn backward(&mut self, cache: &BnCache<T>, gy: &Array3<T>) -> Array3<T> {
        let (b, l, c) = gy.dim();
        let n = T::c((b * l) as f64);
        let gys = gy.as_slice().expect("contiguous gradient");
        let xh = cache.xhat.as_slice().unwrap();
        let mut sum_gy = vec![T::zero(); c];
        let mut sum_gy_xhat = vec![T::zero(); c];
        for (row_i, row) in gys.chunks_exact(c).enumerate() {
            let base = row_i * c;
            for ci in 0..c {
                sum_gy[ci] += row[ci];
                sum_gy_xhat[ci] += row[ci] * xh[base + ci];
            }
        }
        for ci in 0..c {
            self.gbeta[ci] += sum_gy[ci];
            self.ggamma[ci] += sum_gy_xhat[ci];
        }

        let coef: Vec<T> =
            (0..c).map(|ci| self.gamma[ci] * cache.inv_std[ci] / n).collect();
        let mut gx = Array3::zeros((b, l, c));
        let gxs = gx.as_slice_mut().unwrap();
        for (row_i, row) in gys.chunks_exact(c).enumerate() {
            let base = row_i * c;
            for ci in 0..c {
                let term = row[ci] * n - sum_gy[ci] - xh[base + ci] * sum_gy_xhat[ci];
                gxs[base + ci] = coef[ci] * term;
            }
        }
        gx
    }
}

impl<T: Real> ParamVisitor<T> for BatchNorm1d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        f(ParamRef {
            name: &format!("{}.gamma", self.name),
            value: self.gamma.as_slice_mut().unwrap(),
            grad: self.ggamma.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: &format!("{}.beta", self.name),
            value: self.beta.as_slice_mut().unwrap(),
            grad: self.gbeta.as_slice_mut().unwrap(),
        });
    }

    fn visit_state(&mut self, f: &mut dyn FnMut(StateRef<'_, T>)) {
        f(StateRef {
            name: &format!("{}.running_mean", self.name),
            value: self.running_mean.as_slice_mut().unwrap(),
        });
        f(StateRef {
            name: &format!("{}.running_var", self.name),
            value: self.running_var.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// Adaptive average pooling
// ---------------------------------------------------------------------------

/// Equal-partition adaptive average pooling over the position axis: output
/// bin `i` averages positions `[floor(i*L/P), ceil((i+1)*L/P))`.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveAvgPool {
    pub target: usize,
}

impl AdaptiveAvgPool {
    fn bin(&self, i: usize, l_in: usize) -> (usize, usize) {
        let start = i * l_in / self.target;
        let end = ((i + 1) * l_in).div_ceil(self.target);
        (start, end)
    }

    pub fn forward<T: Real>(&self, x: &Array3<T>) -> Array3<T> {
        let (b, l_in, c) = x.dim();
        let mut y = Array3::zeros((b, self.target, c));
        for i in 0..self.target {
            let (start, end) = self.bin(i, l_in);
            let scale = T::c(1.0 / (end - start) as f64);
            let slab = x.slice(s![.., start..end, ..]).sum_axis(Axis(1));
            y.slice_mut(s![.., i, ..]).assign(&(&slab * scale));
        }
        y
    }

    pub fn backward<T: Real>(&self, gy: &Array3<T>, l_in: usize) -> Array3<T> {
        let (b, _, c) = gy.dim();
        let mut gx = Array3::zeros((b, l_in, c));
        for i in 0..self.target {
            let (start, end) = self.bin(i, l_in);
            let scale = T::c(1.0 / (end - start) as f64);
            let contrib = gy.slice(s![.., i, ..]).to_owned() * scale;
            for pos in start..end {
                let mut dst = gx.slice_mut(s![.., pos, ..]);
                dst += &contrib;
            }
        }
        gx
    }
}

// ---------------------------------------------------------------------------
// MLP head
// ---------------------------------------------------------------------------

/// Stack of fully connected layers with ReLU between them and no
/// activation after the last.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

pub struct MlpCache<T> {
    input: Array2<T>,
    /// Post-ReLU outputs of all layers but the last.
    hidden: Vec<Array2<T>>,
}

impl<T: Real> Mlp<T> {
    /// `widths` runs input-to-output, e.g. `[512, 32, 3]`.
    pub fn new(name: &str, widths: &[usize], seed: u64) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&format!("{name}.fc{}", i + 1), w[0], w[1], seed))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().unwrap().in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn forward_eval(&self, x: &Array2<T>) -> Array2<T> {
        let mut h = self.layers[0].forward(x);
        for layer in self.layers.iter().skip(1) {
            relu_inplace(&mut h);
            h = layer.forward(&h);
        }
        h
    }

    pub fn forward_train(&self, x: &Array2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut hidden = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut h = self.layers[0].forward(x);
        for layer in self.layers.iter().skip(1) {
            relu_inplace(&mut h);
            hidden.push(h.clone());
            h = layer.forward(&h);
        }
        (h, MlpCache { input: x.clone(), hidden })
    }

    pub fn backward(&mut self, cache: &MlpCache<T>, gy: &Array2<T>) -> Array2<T> {
        let mut g = gy.clone();
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { &cache.input } else { &cache.hidden[i - 1] };
            g = self.layers[i].backward(input, &g);
            if i > 0 {
                g = relu_backward(&g, &cache.hidden[i - 1]);
            }
        }
        g
    }
}

impl<T: Real> ParamVisitor<T> for Mlp<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamRef<'_, T>)) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }
}
