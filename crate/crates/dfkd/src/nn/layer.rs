use dfkd_core::norm_stats::LayerStats;
use serde::{Deserialize, Serialize};

use super::network::Mode;
use super::tensor::Real;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

/// Per-sample shape `channels × height × width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn flat(features: usize) -> Self {
        Self { c: features, h: 1, w: 1 }
    }

    pub fn size(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn spatial(&self) -> usize {
        self.h * self.w
    }
}

/// Declarative layer description. Convolutions have stride 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { out_channels: usize, kernel: usize, padding: usize },
    Linear { out_features: usize },
    BatchNorm { affine: bool },
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    MaxPool2,
    Upsample2,
    Flatten,
    Reshape { c: usize, h: usize, w: usize },
}

impl LayerSpec {
    pub fn output_dims(&self, input: Dims) -> Result<Dims, String> {
        Ok(match *self {
            LayerSpec::Conv2d { out_channels, kernel, padding } => {
                let h = (input.h + 2 * padding).checked_sub(kernel).map(|v| v + 1);
                let w = (input.w + 2 * padding).checked_sub(kernel).map(|v| v + 1);
                match (h, w) {
                    (Some(h), Some(w)) if h > 0 && w > 0 && out_channels > 0 => Dims::new(out_channels, h, w),
                    _ => return Err(format!("conv kernel {kernel} does not fit input {input:?}")),
                }
            }
            LayerSpec::Linear { out_features } => {
                if out_features == 0 {
                    return Err("linear layer needs at least one output".into());
                }
                Dims::flat(out_features)
            }
            LayerSpec::MaxPool2 => {
                if input.h < 2 || input.w < 2 {
                    return Err(format!("cannot 2x2-pool input {input:?}"));
                }
                Dims::new(input.c, input.h / 2, input.w / 2)
            }
            LayerSpec::Upsample2 => Dims::new(input.c, input.h * 2, input.w * 2),
            LayerSpec::Flatten => Dims::flat(input.size()),
            LayerSpec::Reshape { c, h, w } => {
                let d = Dims::new(c, h, w);
                if d.size() != input.size() {
                    return Err(format!("cannot reshape {input:?} to {d:?}"));
                }
                d
            }
            LayerSpec::BatchNorm { .. } | LayerSpec::Relu | LayerSpec::LeakyRelu { .. } | LayerSpec::Tanh => input,
        })
    }

    pub fn param_count(&self, input: Dims) -> usize {
        match *self {
            LayerSpec::Conv2d { out_channels, kernel, .. } => out_channels * input.c * kernel * kernel + out_channels,
            LayerSpec::Linear { out_features } => out_features * input.size() + out_features,
            LayerSpec::BatchNorm { affine: true } => 2 * input.c,
            _ => 0,
        }
    }

    pub fn buffer_count(&self, input: Dims) -> usize {
        match self {
            LayerSpec::BatchNorm { .. } => 2 * input.c,
            _ => 0,
        }
    }

    pub fn is_batch_norm(&self) -> bool {
        matches!(self, LayerSpec::BatchNorm { .. })
    }
}

#[derive(Debug, Clone, Default)]
struct Cache<T> {
    batch: usize,
    input: Vec<T>,
    cols: Vec<T>,
    scratch: Vec<T>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    used_batch_stats: bool,
    indices: Vec<u32>,
    output: Vec<T>,
    stats: Option<LayerStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub(crate) struct Layer<T: Real> {
    pub spec: LayerSpec,
    pub input: Dims,
    pub output: Dims,
    pub param_offset: usize,
    pub param_len: usize,
    pub buffer_offset: usize,
    pub buffer_len: usize,
    #[serde(skip)]
    cache: Cache<T>,
}

pub(crate) struct ForwardCtx<'a, T> {
    pub params: &'a [T],
    pub buffers: &'a mut [T],
    pub mode: Mode,
    pub capture: bool,
    pub keep_cache: bool,
}

impl<T: Real> Layer<T> {
    pub fn new(spec: LayerSpec, input: Dims, param_offset: usize, buffer_offset: usize) -> Result<Self, String> {
        let output = spec.output_dims(input)?;
        Ok(Self {
            param_len: spec.param_count(input),
            buffer_len: spec.buffer_count(input),
            spec,
            input,
            output,
            param_offset,
            buffer_offset,
            cache: Cache::default(),
        })
    }

    /// PyTorch-style default init: U(±1/sqrt(fan_in)) for conv/linear, γ=1, β=0.
    pub fn init(&self, params: &mut [T], buffers: &mut [T], rng: &mut impl rand::Rng) {
        let p = &mut params[self.param_offset..self.param_offset + self.param_len];
        match self.spec {
            LayerSpec::Conv2d { kernel, .. } => {
                let bound = 1.0 / ((self.input.c * kernel * kernel) as f64).sqrt();
                p.iter_mut().for_each(|v| *v = T::of(rng.random_range(-bound..bound)));
            }
            LayerSpec::Linear { .. } => {
                let bound = 1.0 / (self.input.size() as f64).sqrt();
                p.iter_mut().for_each(|v| *v = T::of(rng.random_range(-bound..bound)));
            }
            LayerSpec::BatchNorm { affine } => {
                let c = self.input.c;
                if affine {
                    p[..c].iter_mut().for_each(|v| *v = T::one());
                    p[c..].iter_mut().for_each(|v| *v = T::zero());
                }
                let b = &mut buffers[self.buffer_offset..self.buffer_offset + self.buffer_len];
                b[..c].iter_mut().for_each(|v| *v = T::zero());
                b[c..].iter_mut().for_each(|v| *v = T::one());
            }
            _ => {}
        }
    }

    pub fn captured_stats(&self) -> Option<&LayerStats> {
        self.cache.stats.as_ref()
    }

    /// Drops backward caches but keeps the reusable conv work buffers.
    pub fn clear_cache(&mut self) {
        let cols = std::mem::take(&mut self.cache.cols);
        let scratch = std::mem::take(&mut self.cache.scratch);
        self.cache = Cache { cols, scratch, ..Cache::default() };
    }

    pub fn forward(&mut self, x: Vec<T>, batch: usize, ctx: &mut ForwardCtx<'_, T>) -> Vec<T> {
        debug_assert_eq!(x.len(), batch * self.input.size());
        self.cache.batch = batch;
        let params = &ctx.params[self.param_offset..self.param_offset + self.param_len];
        match self.spec.clone() {
            LayerSpec::Conv2d { out_channels, kernel, padding } => {
                self.conv_forward(x, batch, params, out_channels, kernel, padding)
            }
            LayerSpec::Linear { out_features } => self.linear_forward(x, batch, params, out_features, ctx.keep_cache),
            LayerSpec::BatchNorm { affine } => self.bn_forward(x, batch, params, affine, ctx),
            LayerSpec::Relu => {
                let out: Vec<T> = x.into_iter().map(|v| if v > T::zero() { v } else { T::zero() }).collect();
                if ctx.keep_cache {
                    self.cache.output = out.clone();
                }
                out
            }
            LayerSpec::LeakyRelu { slope } => {
                let s = T::of(slope);
                let out = x.iter().map(|&v| if v > T::zero() { v } else { v * s }).collect();
                if ctx.keep_cache {
                    self.cache.input = x;
                }
                out
            }
            LayerSpec::Tanh => {
                let out: Vec<T> = x.into_iter().map(|v| v.tanh()).collect();
                if ctx.keep_cache {
                    self.cache.output = out.clone();
                }
                out
            }
            LayerSpec::MaxPool2 => self.pool_forward(x, batch, ctx.keep_cache),
            LayerSpec::Upsample2 => self.upsample_forward(x, batch),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => x,
        }
    }

    /// Returns the gradient w.r.t. the layer input. Parameter gradients are
    /// accumulated into `grads` when given.
    pub fn backward(
        &mut self,
        grad: Vec<T>,
        params: &[T],
        grads: Option<&mut [T]>,
        stat_grad: Option<&LayerStats>,
    ) -> Vec<T> {
        let batch = self.cache.batch;
        let range = self.param_offset..self.param_offset + self.param_len;
        let params = &params[range.clone()];
        let grads = grads.map(|g| &mut g[range]);
        match self.spec.clone() {
            LayerSpec::Conv2d { out_channels, kernel, padding } => {
                self.conv_backward(grad, batch, params, grads, out_channels, kernel, padding)
            }
            LayerSpec::Linear { out_features } => self.linear_backward(grad, batch, params, grads, out_features),
            LayerSpec::BatchNorm { affine } => self.bn_backward(grad, batch, params, grads, affine, stat_grad),
            LayerSpec::Relu => grad
                .into_iter()
                .zip(&self.cache.output)
                .map(|(g, &y)| if y > T::zero() { g } else { T::zero() })
                .collect(),
            LayerSpec::LeakyRelu { slope } => {
                let s = T::of(slope);
                grad.into_iter().zip(&self.cache.input).map(|(g, &x)| if x > T::zero() { g } else { g * s }).collect()
            }
            LayerSpec::Tanh => {
                grad.into_iter().zip(&self.cache.output).map(|(g, &y)| g * (T::one() - y * y)).collect()
            }
            LayerSpec::MaxPool2 => self.pool_backward(grad, batch),
            LayerSpec::Upsample2 => self.upsample_backward(grad, batch),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => grad,
        }
    }

    // Convolutions lower the whole batch to one `CKK × (N·HW)` column matrix
    // so each pass is a single large gemm.
    #[allow(clippy::too_many_arguments)]
    fn conv_forward(
        &mut self,
        x: Vec<T>,
        batch: usize,
        params: &[T],
        f: usize,
        k: usize,
        p: usize,
    ) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let (ho, wo) = (self.output.h, self.output.w);
        let ckk = c * k * k;
        let hw = ho * wo;
        let ld = batch * hw;
        let (weight, bias) = params.split_at(f * ckk);
        let mut cols = std::mem::take(&mut self.cache.cols);
        cols.resize(ckk * ld, T::zero());
        for n in 0..batch {
            im2col(&x[n * c * h * w..(n + 1) * c * h * w], c, h, w, k, p, ho, wo, &mut cols[n * hw..], ld);
        }
        let mut wide = vec![T::zero(); f * ld];
        T::gemm(f, ckk, ld, weight, false, &cols, false, &mut wide, T::zero());
        let mut out = vec![T::zero(); batch * f * hw];
        for n in 0..batch {
            for (fi, &b) in bias.iter().enumerate() {
                let src = &wide[fi * ld + n * hw..fi * ld + (n + 1) * hw];
                let dst = &mut out[(n * f + fi) * hw..(n * f + fi + 1) * hw];
                dst.iter_mut().zip(src).for_each(|(d, &s)| *d = s + b);
            }
        }
        // Kept even for inference so the next call reuses the allocation.
        self.cache.cols = cols;
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_backward(
        &mut self,
        grad: Vec<T>,
        batch: usize,
        params: &[T],
        grads: Option<&mut [T]>,
        f: usize,
        k: usize,
        p: usize,
    ) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let (ho, wo) = (self.output.h, self.output.w);
        let ckk = c * k * k;
        let hw = ho * wo;
        let ld = batch * hw;
        let weight = &params[..f * ckk];
        let mut wide = vec![T::zero(); f * ld];
        for n in 0..batch {
            for fi in 0..f {
                wide[fi * ld + n * hw..fi * ld + (n + 1) * hw]
                    .copy_from_slice(&grad[(n * f + fi) * hw..(n * f + fi + 1) * hw]);
            }
        }
        if let Some(gr) = grads {
            let (gw, gb) = gr.split_at_mut(f * ckk);
            T::gemm(f, ld, ckk, &wide, false, &self.cache.cols, true, gw, T::one());
            for fi in 0..f {
                gb[fi] = gb[fi] + wide[fi * ld..(fi + 1) * ld].iter().copied().sum::<T>();
            }
        }
        let mut dcols = std::mem::take(&mut self.cache.scratch);
        dcols.resize(ckk * ld, T::zero());
        T::gemm(ckk, f, ld, weight, true, &wide, false, &mut dcols, T::zero());
        let mut dx = vec![T::zero(); batch * c * h * w];
        for n in 0..batch {
            col2im(&dcols[n * hw..], c, h, w, k, p, ho, wo, &mut dx[n * c * h * w..(n + 1) * c * h * w], ld);
        }
        self.cache.scratch = dcols;
        dx
    }

    fn linear_forward(&mut self, x: Vec<T>, batch: usize, params: &[T], o: usize, keep: bool) -> Vec<T> {
        let i = self.input.size();
        let (weight, bias) = params.split_at(o * i);
        let mut out = vec![T::zero(); batch * o];
        T::gemm(batch, i, o, &x, false, weight, true, &mut out, T::zero());
        for row in out.chunks_exact_mut(o) {
            row.iter_mut().zip(bias).for_each(|(v, &b)| *v = *v + b);
        }
        if keep {
            self.cache.input = x;
        }
        out
    }

    fn linear_backward(&mut self, grad: Vec<T>, batch: usize, params: &[T], grads: Option<&mut [T]>, o: usize) -> Vec<T> {
        let i = self.input.size();
        let weight = &params[..o * i];
        if let Some(gr) = grads {
            let (gw, gb) = gr.split_at_mut(o * i);
            T::gemm(o, batch, i, &grad, true, &self.cache.input, false, gw, T::one());
            for row in grad.chunks_exact(o) {
                gb.iter_mut().zip(row).for_each(|(b, &g)| *b = *b + g);
            }
        }
        let mut dx = vec![T::zero(); batch * i];
        T::gemm(batch, o, i, &grad, false, weight, false, &mut dx, T::zero());
        dx
    }

    fn bn_forward(&mut self, x: Vec<T>, batch: usize, params: &[T], affine: bool, ctx: &mut ForwardCtx<'_, T>) -> Vec<T> {
        let c = self.input.c;
        let s = self.input.spatial();
        let m = batch * s;
        let buffers = &mut ctx.buffers[self.buffer_offset..self.buffer_offset + self.buffer_len];
        let use_batch = matches!(ctx.mode, Mode::Train | Mode::BatchStats);
        let need_batch = use_batch || ctx.capture;

        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        if need_batch {
            for n in 0..batch {
                for ch in 0..c {
                    let seg = &x[(n * c + ch) * s..(n * c + ch + 1) * s];
                    mean[ch] += seg.iter().map(|v| v.f64()).sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|v| *v /= m as f64);
            for n in 0..batch {
                for ch in 0..c {
                    let seg = &x[(n * c + ch) * s..(n * c + ch + 1) * s];
                    var[ch] += seg.iter().map(|v| (v.f64() - mean[ch]).powi(2)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= m as f64);
        }

        let (use_mean, use_var): (Vec<f64>, Vec<f64>) = if use_batch {
            (mean.clone(), var.clone())
        } else {
            (buffers[..c].iter().map(|v| v.f64()).collect(), buffers[c..].iter().map(|v| v.f64()).collect())
        };

        if matches!(ctx.mode, Mode::Train) {
            let unbias = if m > 1 { m as f64 / (m as f64 - 1.0) } else { 1.0 };
            for ch in 0..c {
                buffers[ch] = T::of((1.0 - BN_MOMENTUM) * buffers[ch].f64() + BN_MOMENTUM * mean[ch]);
                buffers[c + ch] = T::of((1.0 - BN_MOMENTUM) * buffers[c + ch].f64() + BN_MOMENTUM * var[ch] * unbias);
            }
        }

        let inv_std: Vec<T> = use_var.iter().map(|v| T::of(1.0 / (v + BN_EPS).sqrt())).collect();
        let mu: Vec<T> = use_mean.iter().map(|&v| T::of(v)).collect();
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        for n in 0..batch {
            for ch in 0..c {
                let (gamma, beta) = if affine { (params[ch], params[c + ch]) } else { (T::one(), T::zero()) };
                let off = (n * c + ch) * s;
                for j in off..off + s {
                    let xh = (x[j] - mu[ch]) * inv_std[ch];
                    xhat[j] = xh;
                    out[j] = gamma * xh + beta;
                }
            }
        }

        self.cache.stats = if ctx.capture { Some(LayerStats { mean, var }) } else { None };
        if ctx.keep_cache {
            self.cache.xhat = xhat;
            self.cache.inv_std = inv_std;
            self.cache.used_batch_stats = use_batch;
            if ctx.capture {
                self.cache.input = x;
            }
        }
        out
    }

    fn bn_backward(
        &mut self,
        grad: Vec<T>,
        batch: usize,
        params: &[T],
        grads: Option<&mut [T]>,
        affine: bool,
        stat_grad: Option<&LayerStats>,
    ) -> Vec<T> {
        let c = self.input.c;
        let s = self.input.spatial();
        let m = batch * s;
        let mt = T::of(m as f64);
        let xhat = &self.cache.xhat;
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for n in 0..batch {
            for ch in 0..c {
                let off = (n * c + ch) * s;
                for j in off..off + s {
                    sum_dy[ch] = sum_dy[ch] + grad[j];
                    sum_dy_xhat[ch] = sum_dy_xhat[ch] + grad[j] * xhat[j];
                }
            }
        }
        if let (Some(g), true) = (grads, affine) {
            for ch in 0..c {
                g[ch] = g[ch] + sum_dy_xhat[ch];
                g[c + ch] = g[c + ch] + sum_dy[ch];
            }
        }
        let mut dx = vec![T::zero(); grad.len()];
        for n in 0..batch {
            for ch in 0..c {
                let gamma = if affine { params[ch] } else { T::one() };
                let inv = self.cache.inv_std[ch];
                let off = (n * c + ch) * s;
                if self.cache.used_batch_stats {
                    let k = gamma * inv / mt;
                    for j in off..off + s {
                        dx[j] = k * (mt * grad[j] - sum_dy[ch] - xhat[j] * sum_dy_xhat[ch]);
                    }
                } else {
                    let k = gamma * inv;
                    for j in off..off + s {
                        dx[j] = k * grad[j];
                    }
                }
            }
        }
        if let (Some(sg), Some(stats)) = (stat_grad, self.cache.stats.as_ref()) {
            let x = &self.cache.input;
            for n in 0..batch {
                for ch in 0..c {
                    let dm = sg.mean[ch] / m as f64;
                    let dv = sg.var[ch] * 2.0 / m as f64;
                    let off = (n * c + ch) * s;
                    for j in off..off + s {
                        dx[j] = dx[j] + T::of(dm + dv * (x[j].f64() - stats.mean[ch]));
                    }
                }
            }
        }
        dx
    }

    fn pool_forward(&mut self, x: Vec<T>, batch: usize, keep: bool) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let (ho, wo) = (self.output.h, self.output.w);
        let mut out = vec![T::zero(); batch * c * ho * wo];
        let mut idx = vec![0u32; out.len()];
        for nc in 0..batch * c {
            let src = &x[nc * h * w..(nc + 1) * h * w];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = (2 * oy) * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let cand = (2 * oy + dy) * w + 2 * ox + dx;
                        if src[cand] > src[best] {
                            best = cand;
                        }
                    }
                    let o = nc * ho * wo + oy * wo + ox;
                    out[o] = src[best];
                    idx[o] = best as u32;
                }
            }
        }
        if keep {
            self.cache.indices = idx;
        }
        out
    }

    fn pool_backward(&mut self, grad: Vec<T>, batch: usize) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let howo = self.output.h * self.output.w;
        let mut dx = vec![T::zero(); batch * c * h * w];
        for nc in 0..batch * c {
            for j in 0..howo {
                let o = nc * howo + j;
                let t = nc * h * w + self.cache.indices[o] as usize;
                dx[t] = dx[t] + grad[o];
            }
        }
        dx
    }

    fn upsample_forward(&mut self, x: Vec<T>, batch: usize) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let (ho, wo) = (2 * h, 2 * w);
        let mut out = vec![T::zero(); batch * c * ho * wo];
        for nc in 0..batch * c {
            for oy in 0..ho {
                for ox in 0..wo {
                    out[nc * ho * wo + oy * wo + ox] = x[nc * h * w + (oy / 2) * w + ox / 2];
                }
            }
        }
        out
    }

    fn upsample_backward(&mut self, grad: Vec<T>, batch: usize) -> Vec<T> {
        let (c, h, w) = (self.input.c, self.input.h, self.input.w);
        let (ho, wo) = (2 * h, 2 * w);
        let mut dx = vec![T::zero(); batch * c * h * w];
        for nc in 0..batch * c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let t = nc * h * w + (oy / 2) * w + ox / 2;
                    dx[t] = dx[t] + grad[nc * ho * wo + oy * wo + ox];
                }
            }
        }
        dx
    }
}

/// Valid output range `[lo, hi)` along one axis for kernel offset `kk`, and
/// the input index of `lo`.
fn valid_span(out_len: usize, in_len: usize, kk: usize, p: usize) -> (usize, usize, usize) {
    let lo = p.saturating_sub(kk).min(out_len);
    let hi = (in_len + p).saturating_sub(kk).min(out_len).max(lo);
    (lo, hi, (lo + kk).saturating_sub(p))
}

/// Writes every entry of the `CKK × HW` block at `col` (row stride `ld`).
#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, k: usize, p: usize, ho: usize, wo: usize, col: &mut [T], ld: usize) {
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            let (ylo, yhi, iy0) = valid_span(ho, h, ky, p);
            for kx in 0..k {
                let (xlo, xhi, ix0) = valid_span(wo, w, kx, p);
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * ld..row * ld + ho * wo];
                for oy in 0..ho {
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if oy < ylo || oy >= yhi {
                        line.fill(T::zero());
                        continue;
                    }
                    let iy = iy0 + (oy - ylo);
                    line[..xlo].fill(T::zero());
                    line[xlo..xhi].copy_from_slice(&plane[iy * w + ix0..iy * w + ix0 + (xhi - xlo)]);
                    line[xhi..].fill(T::zero());
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize, k: usize, p: usize, ho: usize, wo: usize, dx: &mut [T], ld: usize) {
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            let (ylo, yhi, iy0) = valid_span(ho, h, ky, p);
            for kx in 0..k {
                let (xlo, xhi, ix0) = valid_span(wo, w, kx, p);
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * ld..row * ld + ho * wo];
                for oy in ylo..yhi {
                    let iy = iy0 + (oy - ylo);
                    let d = &mut plane[iy * w + ix0..iy * w + ix0 + (xhi - xlo)];
                    d.iter_mut().zip(&src[oy * wo + xlo..oy * wo + xhi]).for_each(|(a, &b)| *a = *a + b);
                }
            }
        }
    }
}
