use dfkd_core::norm_stats::LayerStats;
use serde::{Deserialize, Serialize};

use super::layer::{Dims, ForwardCtx, Layer, LayerSpec};
use super::tensor::{Real, Tensor};

/// How batch-norm layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with batch statistics and update running statistics.
    Train,
    /// Normalize with batch statistics, leave running statistics untouched.
    BatchStats,
    /// Normalize with running statistics.
    Eval,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BackwardOpts<'a> {
    /// Accumulate parameter gradients.
    pub param_grads: bool,
    /// Gradients w.r.t. the batch statistics captured at each BN layer, in
    /// forward order. Requires the forward pass to have run with capture on.
    pub bn_stat_grads: Option<&'a [LayerStats]>,
}

/// Sequential network with parameters, gradients and BN buffers stored flat.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Network<T: Real> {
    input: Dims,
    layers: Vec<Layer<T>>,
    params: Vec<T>,
    buffers: Vec<T>,
    #[serde(skip)]
    grads: Vec<T>,
    #[serde(skip)]
    capture: bool,
}

impl<T: Real> Network<T> {
    pub fn new(specs: &[LayerSpec], input: Dims, rng: &mut impl rand::Rng) -> Result<Self, String> {
        let mut layers = Vec::with_capacity(specs.len());
        let (mut dims, mut p, mut b) = (input, 0, 0);
        for spec in specs {
            let layer = Layer::new(spec.clone(), dims, p, b)?;
            dims = layer.output;
            p += layer.param_len;
            b += layer.buffer_len;
            layers.push(layer);
        }
        let mut params = vec![T::zero(); p];
        let mut buffers = vec![T::zero(); b];
        for layer in &layers {
            layer.init(&mut params, &mut buffers, rng);
        }
        Ok(Self { input, layers, params, buffers, grads: vec![T::zero(); p], capture: false })
    }

    pub fn input_dims(&self) -> Dims {
        self.input
    }

    pub fn output_dims(&self) -> Dims {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn buffers(&self) -> &[T] {
        &self.buffers
    }

    pub fn grads(&self) -> &[T] {
        &self.grads
    }

    /// Parameters and gradients together, for optimizer steps.
    pub fn params_and_grads(&mut self) -> (&mut [T], &[T]) {
        self.ensure_grads();
        (&mut self.params, &self.grads)
    }

    pub fn zero_grads(&mut self) {
        self.ensure_grads();
        self.grads.iter_mut().for_each(|g| *g = T::zero());
    }

    fn ensure_grads(&mut self) {
        if self.grads.len() != self.params.len() {
            self.grads = vec![T::zero(); self.params.len()];
        }
    }

    /// Record per-channel batch statistics at every BN layer on later forwards.
    pub fn set_capture(&mut self, on: bool) {
        self.capture = on;
    }

    pub fn bn_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.spec.is_batch_norm()).count()
    }

    /// Running mean and variance of every BN layer, in forward order.
    pub fn bn_running_stats(&self) -> Vec<LayerStats> {
        self.layers
            .iter()
            .filter(|l| l.spec.is_batch_norm())
            .map(|l| {
                let c = l.input.c;
                let buf = &self.buffers[l.buffer_offset..l.buffer_offset + l.buffer_len];
                LayerStats {
                    mean: buf[..c].iter().map(|v| v.f64()).collect(),
                    var: buf[c..].iter().map(|v| v.f64()).collect(),
                }
            })
            .collect()
    }

    /// Batch statistics captured on the last forward pass, if capture was on.
    pub fn bn_captured_stats(&self) -> Option<Vec<LayerStats>> {
        self.layers.iter().filter(|l| l.spec.is_batch_norm()).map(|l| l.captured_stats().cloned()).collect()
    }

    /// Forward pass that keeps the caches needed by [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        self.run(x, mode, true)
    }

    /// Forward pass without backward caches.
    pub fn infer(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        self.run(x, mode, false)
    }

    fn run(&mut self, x: &Tensor<T>, mode: Mode, keep_cache: bool) -> Tensor<T> {
        assert_eq!(
            (x.c, x.h, x.w),
            (self.input.c, self.input.h, self.input.w),
            "input shape does not match the network"
        );
        let batch = x.n;
        let mut ctx = ForwardCtx { params: &self.params, buffers: &mut self.buffers, mode, capture: self.capture, keep_cache };
        let mut data = x.data.clone();
        for layer in &mut self.layers {
            if !keep_cache {
                layer.clear_cache();
            }
            data = layer.forward(data, batch, &mut ctx);
        }
        let out = self.output_dims();
        Tensor::new(batch, out.c, out.h, out.w, data)
    }

    /// Backpropagates `grad` (w.r.t. the output of the last `forward`) and
    /// returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad: Tensor<T>, opts: BackwardOpts<'_>) -> Tensor<T> {
        if let Some(sg) = opts.bn_stat_grads {
            assert_eq!(sg.len(), self.bn_layer_count(), "one stat gradient per BN layer");
        }
        self.ensure_grads();
        let batch = grad.n;
        let mut bn_index = self.bn_layer_count();
        let mut data = grad.data;
        for layer in self.layers.iter_mut().rev() {
            let stat = if layer.spec.is_batch_norm() {
                bn_index -= 1;
                opts.bn_stat_grads.map(|s| &s[bn_index])
            } else {
                None
            };
            let grads = if opts.param_grads { Some(&mut self.grads[..]) } else { None };
            data = layer.backward(data, &self.params, grads, stat);
        }
        Tensor::new(batch, self.input.c, self.input.h, self.input.w, data)
    }
}
