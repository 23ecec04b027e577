//! Divergences between teacher and student output distributions, with
//! gradients with respect to the logits on both sides.
//!
//! All logarithms of probabilities are taken in the log domain (log-softmax,
//! log-add-exp for mixtures), so no probability is ever passed through `ln`
//! directly and no clamping floor is needed.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::logits::{argmax, Logits};
use crate::math::{exp, ln, log_add_exp};
use crate::spl::{LossVector, WeightVector};

/// Which divergence drives the generator's adversarial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DivergenceKind {
    /// KL(teacher ‖ student)
    Kl,
    /// Jensen-Shannon, natural log
    #[default]
    Js,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Kl => "kl",
            DivergenceKind::Js => "js",
        })
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(DivergenceKind::Kl),
            "js" => Ok(DivergenceKind::Js),
            other => Err(Error::argument(alloc::format!("unknown divergence {other:?} (expected kl or js)"))),
        }
    }
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::argument(alloc::format!("temperature must be positive, got {t}")))
    }
}

/// `log softmax(row / t)` written into `out`.
pub fn log_softmax_into(row: &[f64], t: f64, out: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) / t;
    let mut sum = 0.0;
    for &v in row {
        sum += exp(v / t - max);
    }
    let lse = max + ln(sum);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v / t - lse;
    }
}

pub fn softmax(row: &[f64], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    log_softmax_into(row, t, &mut out);
    out.iter_mut().for_each(|v| *v = exp(*v));
    out
}

/// `KL(p ‖ q)` from log-probabilities.
fn kl_from_logs(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .map(|(&lp, &lq)| {
            let p = exp(lp);
            if p == 0.0 {
                0.0
            } else {
                p * (lp - lq)
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Row-wise softened distributions of a logit pair.
struct Softened {
    log_t: Vec<f64>,
    log_s: Vec<f64>,
}

impl Softened {
    fn new(classes: usize) -> Self {
        Self { log_t: vec![0.0; classes], log_s: vec![0.0; classes] }
    }

    fn load(&mut self, teacher: &[f64], student: &[f64], t: f64) {
        log_softmax_into(teacher, t, &mut self.log_t);
        log_softmax_into(student, t, &mut self.log_s);
    }
}

fn check_pair(teacher: &Logits<'_>, student: &Logits<'_>, t: f64) -> Result<()> {
    check_temperature(t)?;
    teacher.ensure_same_shape(student)?;
    teacher.ensure_finite("teacher")?;
    student.ensure_finite("student")
}

/// Per-sample `KL(softmax(z_t/T) ‖ softmax(z_s/T))`. Also the difficulty of each sample.
pub fn per_sample_kd_loss(teacher: &Logits<'_>, student: &Logits<'_>, t: f64) -> Result<LossVector> {
    check_pair(teacher, student, t)?;
    let mut buf = Softened::new(teacher.classes());
    let values = teacher
        .iter_rows()
        .zip(student.iter_rows())
        .map(|(zt, zs)| {
            buf.load(zt, zs, t);
            kl_from_logs(&buf.log_t, &buf.log_s)
        })
        .collect();
    LossVector::new(values)
}

/// Gradient of the batch-averaged weighted loss `(1/B) Σᵢ wᵢ lᵢ` with respect
/// to the student logits, where `lᵢ` is the per-sample KD loss. No `T²` factor.
///
/// Each entry is `wᵢ · ((p_s − p_t) / T / B)`, so with all weights equal to 1
/// the result is bit-identical to [`kd_mean_loss_student_grad`].
pub fn kd_loss_student_grad(
    teacher: &Logits<'_>,
    student: &Logits<'_>,
    t: f64,
    weights: &WeightVector,
) -> Result<Vec<f64>> {
    check_pair(teacher, student, t)?;
    if weights.len() != teacher.rows() {
        return Err(Error::argument(alloc::format!(
            "{} weights for a batch of {}",
            weights.len(),
            teacher.rows()
        )));
    }
    let c = teacher.classes();
    let b = teacher.rows() as f64;
    let mut grad = vec![0.0; teacher.as_slice().len()];
    let mut buf = Softened::new(c);
    for (i, (zt, zs)) in teacher.iter_rows().zip(student.iter_rows()).enumerate() {
        let w = weights.values()[i];
        if w == 0.0 {
            continue;
        }
        buf.load(zt, zs, t);
        let g = &mut grad[i * c..(i + 1) * c];
        for k in 0..c {
            g[k] = w * ((exp(buf.log_s[k]) - exp(buf.log_t[k])) / t / b);
        }
    }
    Ok(grad)
}

/// `(1/B) Σᵢ wᵢ lᵢ`, summed in sample order.
pub fn weighted_mean_loss(losses: &LossVector, weights: &WeightVector) -> f64 {
    if losses.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (l, w) in losses.values().iter().zip(weights.values()) {
        total += w * l;
    }
    total / losses.len() as f64
}

/// Value and gradient of the unweighted mean KD loss `(1/B) Σᵢ lᵢ` with
/// respect to the student logits. This is plain distillation with no
/// curriculum weights anywhere in the computation.
pub fn kd_mean_loss_student_grad(teacher: &Logits<'_>, student: &Logits<'_>, t: f64) -> Result<(f64, Vec<f64>)> {
    check_pair(teacher, student, t)?;
    let c = teacher.classes();
    let b = teacher.rows() as f64;
    let mut grad = vec![0.0; teacher.as_slice().len()];
    let mut buf = Softened::new(c);
    let mut total = 0.0;
    for (i, (zt, zs)) in teacher.iter_rows().zip(student.iter_rows()).enumerate() {
        buf.load(zt, zs, t);
        total += kl_from_logs(&buf.log_t, &buf.log_s);
        let g = &mut grad[i * c..(i + 1) * c];
        for k in 0..c {
            g[k] = (exp(buf.log_s[k]) - exp(buf.log_t[k])) / t / b;
        }
    }
    let mean = if teacher.rows() == 0 { 0.0 } else { total / b };
    Ok((mean, grad))
}

/// Jensen-Shannon divergence in nats between two distributions given as log-probabilities.
pub fn js_from_logs(log_p: &[f64], log_q: &[f64]) -> f64 {
    let ln2 = core::f64::consts::LN_2;
    let mut acc = 0.0;
    for (&lp, &lq) in log_p.iter().zip(log_q) {
        // Equal entries contribute nothing; skipping the mixture keeps JS of
        // identical rows at exactly zero.
        if lp == lq {
            continue;
        }
        let lm = log_add_exp(lp, lq) - ln2;
        let p = exp(lp);
        let q = exp(lq);
        if p > 0.0 {
            acc += 0.5 * p * (lp - lm);
        }
        if q > 0.0 {
            acc += 0.5 * q * (lq - lm);
        }
    }
    acc.clamp(0.0, ln2)
}

/// Batch-mean divergence between temperature-softened teacher and student distributions.
pub fn adversarial_divergence(
    teacher: &Logits<'_>,
    student: &Logits<'_>,
    kind: DivergenceKind,
    t: f64,
) -> Result<f64> {
    check_pair(teacher, student, t)?;
    if teacher.rows() == 0 {
        return Ok(0.0);
    }
    let mut buf = Softened::new(teacher.classes());
    let total: f64 = teacher
        .iter_rows()
        .zip(student.iter_rows())
        .map(|(zt, zs)| {
            buf.load(zt, zs, t);
            match kind {
                DivergenceKind::Kl => kl_from_logs(&buf.log_t, &buf.log_s),
                DivergenceKind::Js => js_from_logs(&buf.log_t, &buf.log_s),
            }
        })
        .sum();
    Ok(total / teacher.rows() as f64)
}

/// Value and gradients of [`adversarial_divergence`] with respect to teacher
/// and student logits.
#[derive(Debug, Clone)]
pub struct DivergenceGrad {
    pub value: f64,
    pub teacher: Vec<f64>,
    pub student: Vec<f64>,
}

/// Pushes a gradient w.r.t. probabilities `g` back through `softmax(z/T)`:
/// `∂/∂z_k = p_k (g_k − Σ_j p_j g_j) / T`.
fn through_softmax(log_p: &[f64], g: &[f64], t: f64, out: &mut [f64], scale: f64) {
    let mean: f64 = log_p.iter().zip(g).map(|(&lp, &gj)| exp(lp) * gj).sum();
    for ((o, &lp), &gk) in out.iter_mut().zip(log_p).zip(g) {
        *o = scale * exp(lp) * (gk - mean) / t;
    }
}

pub fn adversarial_divergence_grad(
    teacher: &Logits<'_>,
    student: &Logits<'_>,
    kind: DivergenceKind,
    t: f64,
) -> Result<DivergenceGrad> {
    check_pair(teacher, student, t)?;
    let c = teacher.classes();
    let n = teacher.rows();
    let mut out = DivergenceGrad { value: 0.0, teacher: vec![0.0; n * c], student: vec![0.0; n * c] };
    if n == 0 {
        return Ok(out);
    }
    let scale = 1.0 / n as f64;
    let ln2 = core::f64::consts::LN_2;
    let mut buf = Softened::new(c);
    let mut gp = vec![0.0; c];
    let mut gq = vec![0.0; c];
    for (i, (zt, zs)) in teacher.iter_rows().zip(student.iter_rows()).enumerate() {
        buf.load(zt, zs, t);
        let range = i * c..(i + 1) * c;
        match kind {
            DivergenceKind::Kl => {
                let kl = kl_from_logs(&buf.log_t, &buf.log_s);
                out.value += kl;
                // ∂KL/∂z_t,k = p_k (ℓ_k − KL) / T, with ℓ = log p − log q
                for k in 0..c {
                    gp[k] = buf.log_t[k] - buf.log_s[k];
                }
                through_softmax(&buf.log_t, &gp, t, &mut out.teacher[range.clone()], scale);
                let gs = &mut out.student[range];
                for k in 0..c {
                    gs[k] = scale * (exp(buf.log_s[k]) - exp(buf.log_t[k])) / t;
                }
            }
            DivergenceKind::Js => {
                out.value += js_from_logs(&buf.log_t, &buf.log_s);
                // ∂JS/∂p_k = ½ ln(p_k / m_k)
                for k in 0..c {
                    let lm = log_add_exp(buf.log_t[k], buf.log_s[k]) - ln2;
                    gp[k] = 0.5 * (buf.log_t[k] - lm);
                    gq[k] = 0.5 * (buf.log_s[k] - lm);
                }
                through_softmax(&buf.log_t, &gp, t, &mut out.teacher[range.clone()], scale);
                through_softmax(&buf.log_s, &gq, t, &mut out.student[range], scale);
            }
        }
    }
    out.value *= scale;
    Ok(out)
}

/// Mean cross-entropy between each row's softmax and its own argmax label.
pub fn one_hot_loss(logits: &Logits<'_>) -> Result<f64> {
    Ok(one_hot_loss_grad(logits)?.0)
}

/// Value and gradient of [`one_hot_loss`]; labels are treated as constants.
pub fn one_hot_loss_grad(logits: &Logits<'_>) -> Result<(f64, Vec<f64>)> {
    if logits.classes() < 2 {
        return Err(Error::argument("one-hot loss needs at least two classes"));
    }
    logits.ensure_finite("teacher")?;
    let c = logits.classes();
    let n = logits.rows();
    let mut grad = vec![0.0; n * c];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / n as f64;
    let mut log_p = vec![0.0; c];
    let mut total = 0.0;
    for (i, row) in logits.iter_rows().enumerate() {
        let label = argmax(row);
        log_softmax_into(row, 1.0, &mut log_p);
        total += -log_p[label];
        let g = &mut grad[i * c..(i + 1) * c];
        for k in 0..c {
            g[k] = scale * (exp(log_p[k]) - if k == label { 1.0 } else { 0.0 });
        }
    }
    Ok(((total * scale).max(0.0), grad))
}
