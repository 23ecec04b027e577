//! Generator objective bookkeeping:
//! `total = −α_adv·D(f_t, f_s) + α_bn·L_bn + α_oh·L_oh`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenCoefficients {
    pub adv: f64,
    pub bn: f64,
    pub oh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenLossBreakdown {
    /// Teacher-student divergence on the synthetic batch (before the minus sign).
    pub adv: f64,
    pub bn: f64,
    pub oh: f64,
    pub total: f64,
    pub coefficients: GenCoefficients,
}

impl GenLossBreakdown {
    pub fn combine(adv: f64, bn: f64, oh: f64, coefficients: GenCoefficients) -> Result<Self> {
        for (name, v) in [("adversarial", adv), ("bn", bn), ("one-hot", oh)] {
            if !v.is_finite() {
                return Err(Error::data(alloc::format!("{name} generator loss is {v}")));
            }
        }
        // A zero coefficient contributes exactly nothing, whatever the component.
        let term = |c: f64, v: f64| if c == 0.0 { 0.0 } else { c * v };
        let total = -term(coefficients.adv, adv) + term(coefficients.bn, bn) + term(coefficients.oh, oh);
        Ok(Self { adv, bn, oh, total, coefficients })
    }

    /// Component-wise mean of several breakdowns (coefficients taken from the last).
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a GenLossBreakdown>) -> Self {
        let mut acc = GenLossBreakdown::default();
        let mut n = 0usize;
        for b in items {
            acc.adv += b.adv;
            acc.bn += b.bn;
            acc.oh += b.oh;
            acc.total += b.total;
            acc.coefficients = b.coefficients;
            n += 1;
        }
        if n > 0 {
            let k = n as f64;
            acc.adv /= k;
            acc.bn /= k;
            acc.oh /= k;
            acc.total /= k;
        }
        acc
    }
}
