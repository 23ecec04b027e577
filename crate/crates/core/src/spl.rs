//! Closed-form self-paced weights, the pace schedule λ(t), the latent
//! objective `Σᵢ ∫₀^{Lᵢ} v*(λ, l) dl` and its linear majorant.
//!
//! The regularizer `g(λ, v)` is never evaluated. Everything that needs it goes
//! through the latent objective, whose tangent at the current losses is the
//! weighted loss `v*ᵀL` plus a constant.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{exp, softplus};

/// Closed form used to turn per-sample losses into curriculum weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SpStrategy {
    /// `1(L < λ)`
    Hard,
    /// `1(L < λ)(1 − L/λ)`
    Soft,
    /// `(1 + e^{−λ}) / (1 + e^{L−λ})`
    #[cfg_attr(feature = "serde", serde(rename = "log"))]
    Logarithm,
}

impl SpStrategy {
    pub const ALL: [SpStrategy; 3] = [SpStrategy::Hard, SpStrategy::Soft, SpStrategy::Logarithm];

    pub fn as_str(&self) -> &'static str {
        match self {
            SpStrategy::Hard => "hard",
            SpStrategy::Soft => "soft",
            SpStrategy::Logarithm => "log",
        }
    }

    /// Weight of a single sample. Caller guarantees `lambda > 0` and `loss ≥ 0`.
    #[inline]
    pub fn weight(&self, lambda: f64, loss: f64) -> f64 {
        match self {
            SpStrategy::Hard => {
                if loss < lambda {
                    1.0
                } else {
                    0.0
                }
            }
            SpStrategy::Soft => {
                if loss < lambda {
                    1.0 - loss / lambda
                } else {
                    0.0
                }
            }
            SpStrategy::Logarithm => {
                // e^{L-λ} overflows to +inf for huge losses, which still yields 0.
                (1.0 + exp(-lambda)) / (1.0 + exp(loss - lambda))
            }
        }
    }

    /// `∫₀^loss v*(λ, l) dl` for a single sample.
    #[inline]
    pub fn antiderivative(&self, lambda: f64, loss: f64) -> f64 {
        match self {
            SpStrategy::Hard => loss.min(lambda),
            SpStrategy::Soft => {
                if loss < lambda {
                    loss - loss * loss / (2.0 * lambda)
                } else {
                    lambda / 2.0
                }
            }
            SpStrategy::Logarithm => {
                (1.0 + exp(-lambda)) * (loss - softplus(loss - lambda) + softplus(-lambda))
            }
        }
    }
}

impl fmt::Display for SpStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(SpStrategy::Hard),
            "soft" => Ok(SpStrategy::Soft),
            "log" => Ok(SpStrategy::Logarithm),
            other => Err(Error::argument(alloc::format!(
                "unknown self-paced strategy {other:?} (expected hard, soft or log)"
            ))),
        }
    }
}

/// Linear pace schedule `λ(t) = λ₀ + rate·t`, in loss units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaSchedule {
    lambda0: f64,
    rate: f64,
}

impl LambdaSchedule {
    pub fn new(lambda0: f64, rate: f64) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::argument(alloc::format!("lambda0 must be positive and finite, got {lambda0}")));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::argument(alloc::format!("lambda rate must be non-negative and finite, got {rate}")));
        }
        Ok(Self { lambda0, rate })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Pace threshold at epoch `t`.
pub fn lambda_at(schedule: &LambdaSchedule, t: usize) -> f64 {
    schedule.lambda0 + schedule.rate * t as f64
}

/// Per-sample losses of one batch. Entries are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::data(alloc::format!("loss entry {i} is {v}; losses must be finite and >= 0")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-sample curriculum weights in `[0, 1]`, aligned with a [`LossVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Uniform weights of 1, i.e. plain unweighted distillation.
    pub fn ones(len: usize) -> Self {
        Self(alloc::vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    /// `Σ vᵢ lᵢ`.
    pub fn dot(&self, losses: &LossVector) -> f64 {
        self.0.iter().zip(losses.values()).map(|(v, l)| v * l).sum()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::argument(alloc::format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// Applies the strategy's closed form elementwise.
pub fn sp_weights(strategy: SpStrategy, lambda: f64, losses: &LossVector) -> Result<WeightVector> {
    check_lambda(lambda)?;
    Ok(WeightVector(losses.values().iter().map(|&l| strategy.weight(lambda, l)).collect()))
}

/// Sum over samples of the closed-form antiderivative of the weight function.
pub fn latent_objective(strategy: SpStrategy, lambda: f64, losses: &LossVector) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(losses.values().iter().map(|&l| strategy.antiderivative(lambda, l)).sum())
}

/// Linear majorant of the latent objective around `losses_ref`, evaluated at
/// `losses_new`:
///
/// `Q = F_λ(L_ref) + v*(λ, L_ref)ᵀ (L_new − L_ref)`
///
/// The latent objective is concave in each loss and `v*` is its
/// (super)gradient, so `Q ≥ F_λ(L_new)` with equality at the anchor.
pub fn mm_majorant(
    strategy: SpStrategy,
    lambda: f64,
    losses_ref: &LossVector,
    losses_new: &LossVector,
) -> Result<f64> {
    check_lambda(lambda)?;
    if losses_ref.len() != losses_new.len() {
        return Err(Error::argument(alloc::format!(
            "majorant needs equal-length loss vectors, got {} and {}",
            losses_ref.len(),
            losses_new.len()
        )));
    }
    let anchor = latent_objective(strategy, lambda, losses_ref)?;
    let slope: f64 = losses_ref
        .values()
        .iter()
        .zip(losses_new.values())
        .map(|(&r, &n)| strategy.weight(lambda, r) * (n - r))
        .sum();
    Ok(anchor + slope)
}
