//! Batch-norm statistics and the alignment loss between a frozen teacher's
//! running statistics and the statistics a synthetic batch induces.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StatSource {
    TeacherRunning,
    BatchObserved,
}

/// Per-channel mean and variance of one BN layer's input.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl LayerStats {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::argument("mean and variance vectors differ in length"));
        }
        if var.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::data("batch-norm variance must be non-negative"));
        }
        Ok(Self { mean, var })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Population statistics of `x` laid out as `[batch][channel][spatial]`.
    pub fn from_activations(x: &[f64], batch: usize, channels: usize, spatial: usize) -> Result<Self> {
        if x.len() != batch * channels * spatial || batch * spatial == 0 {
            return Err(Error::argument("activation buffer does not match its declared shape"));
        }
        let m = (batch * spatial) as f64;
        let mut mean = vec![0.0; channels];
        let mut var = vec![0.0; channels];
        for n in 0..batch {
            for c in 0..channels {
                let s = &x[(n * channels + c) * spatial..(n * channels + c + 1) * spatial];
                mean[c] += s.iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for n in 0..batch {
            for c in 0..channels {
                let s = &x[(n * channels + c) * spatial..(n * channels + c + 1) * spatial];
                var[c] += s.iter().map(|v| (v - mean[c]) * (v - mean[c])).sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        Ok(Self { mean, var })
    }

    /// Chains a gradient w.r.t. this layer's (mean, var) back to the
    /// activations it was computed from, accumulating into `grad_x`.
    pub fn backprop_to_activations(
        &self,
        d_mean: &[f64],
        d_var: &[f64],
        x: &[f64],
        batch: usize,
        spatial: usize,
        grad_x: &mut [f64],
    ) {
        let channels = self.channels();
        let m = (batch * spatial) as f64;
        for n in 0..batch {
            for c in 0..channels {
                let off = (n * channels + c) * spatial;
                for j in 0..spatial {
                    grad_x[off + j] += d_mean[c] / m + d_var[c] * 2.0 * (x[off + j] - self.mean[c]) / m;
                }
            }
        }
    }
}

/// Statistics for every BN layer of a network, in forward order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BnStatSet {
    pub source: StatSource,
    pub layers: Vec<LayerStats>,
}

impl BnStatSet {
    pub fn new(source: StatSource, layers: Vec<LayerStats>) -> Self {
        Self { source, layers }
    }
}

fn check_matching(reference: &BnStatSet, observed: &BnStatSet) -> Result<()> {
    if reference.layers.len() != observed.layers.len() {
        return Err(Error::argument(alloc::format!(
            "{} reference BN layers vs {} observed",
            reference.layers.len(),
            observed.layers.len()
        )));
    }
    for (i, (r, o)) in reference.layers.iter().zip(&observed.layers).enumerate() {
        if r.channels() != o.channels() {
            return Err(Error::argument(alloc::format!(
                "BN layer {i}: {} reference channels vs {} observed",
                r.channels(),
                o.channels()
            )));
        }
    }
    Ok(())
}

/// `Σ_l ‖μ_l − μ̂_l‖² + ‖σ²_l − σ̂²_l‖²`.
pub fn bn_alignment_loss(reference: &BnStatSet, observed: &BnStatSet) -> Result<f64> {
    check_matching(reference, observed)?;
    Ok(reference
        .layers
        .iter()
        .zip(&observed.layers)
        .map(|(r, o)| {
            let dm: f64 = r.mean.iter().zip(&o.mean).map(|(a, b)| (b - a) * (b - a)).sum();
            let dv: f64 = r.var.iter().zip(&o.var).map(|(a, b)| (b - a) * (b - a)).sum();
            dm + dv
        })
        .sum())
}

/// Loss value plus its gradient w.r.t. the observed statistics; the gradient
/// reuses [`LayerStats`] with `mean` holding ∂/∂μ and `var` holding ∂/∂σ².
pub fn bn_alignment_grad(reference: &BnStatSet, observed: &BnStatSet) -> Result<(f64, Vec<LayerStats>)> {
    let value = bn_alignment_loss(reference, observed)?;
    let grads = reference
        .layers
        .iter()
        .zip(&observed.layers)
        .map(|(r, o)| LayerStats {
            mean: r.mean.iter().zip(&o.mean).map(|(a, b)| 2.0 * (b - a)).collect(),
            var: r.var.iter().zip(&o.var).map(|(a, b)| 2.0 * (b - a)).collect(),
        })
        .collect();
    Ok((value, grads))
}
