//! Fidelity and stability metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{js_from_logs, log_softmax_into};
use crate::error::{Error, Result};
use crate::logits::{argmax, Logits};
use crate::math::sqrt;
use crate::spl::LossVector;

/// Teacher and student logits on the same inputs plus ground-truth labels.
#[derive(Debug, Clone, Copy)]
pub struct EvalBatch<'a> {
    teacher: Logits<'a>,
    student: Logits<'a>,
    labels: &'a [usize],
}

impl<'a> EvalBatch<'a> {
    pub fn new(teacher: Logits<'a>, student: Logits<'a>, labels: &'a [usize]) -> Result<Self> {
        teacher.ensure_same_shape(&student)?;
        if labels.len() != teacher.rows() {
            return Err(Error::argument(alloc::format!(
                "{} labels for {} rows",
                labels.len(),
                teacher.rows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= teacher.classes()) {
            return Err(Error::argument(alloc::format!(
                "label {bad} outside [0, {})",
                teacher.classes()
            )));
        }
        Ok(Self { teacher, student, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn teacher(&self) -> Logits<'a> {
        self.teacher
    }

    pub fn student(&self) -> Logits<'a> {
        self.student
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Acc@1: fraction of rows whose student argmax equals the label.
pub fn top1_accuracy(batch: &EvalBatch<'_>) -> f64 {
    let hits = batch.student.iter_rows().zip(batch.labels).filter(|(row, &y)| argmax(row) == y).count();
    fraction(hits, batch.len())
}

/// Agree@1: fraction of rows where student and teacher argmax coincide.
pub fn top1_agreement(batch: &EvalBatch<'_>) -> f64 {
    let hits = batch
        .student
        .iter_rows()
        .zip(batch.teacher.iter_rows())
        .filter(|(s, t)| argmax(s) == argmax(t))
        .count();
    fraction(hits, batch.len())
}

/// Probability loyalty `1 − sqrt(JS₂(P‖Q))` between two logit rows, with the
/// JS divergence in bits so it lies in [0, 1].
pub fn loyalty_row(teacher: &[f64], student: &[f64]) -> f64 {
    let c = teacher.len();
    let mut lp = vec![0.0; c];
    let mut lq = vec![0.0; c];
    log_softmax_into(teacher, 1.0, &mut lp);
    log_softmax_into(student, 1.0, &mut lq);
    let js_bits = (js_from_logs(&lp, &lq) / core::f64::consts::LN_2).clamp(0.0, 1.0);
    (1.0 - sqrt(js_bits)).clamp(0.0, 1.0)
}

/// Per-sample loyalty and its mean.
pub fn probability_loyalty(batch: &EvalBatch<'_>) -> (Vec<f64>, f64) {
    let per: Vec<f64> = batch
        .teacher
        .iter_rows()
        .zip(batch.student.iter_rows())
        .map(|(t, s)| loyalty_row(t, s))
        .collect();
    let mean = if per.is_empty() { 0.0 } else { per.iter().sum::<f64>() / per.len() as f64 };
    (per, mean)
}

/// Equal-width histogram over `[0, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges.windows(2).zip(&self.counts).map(|(e, &c)| (e[0], e[1], c))
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Histogram of sample values on `[0, max]`. Bins are right-closed,
/// `(a, b]`, except that 0 falls in the first bin.
pub fn histogram(values: &[f64], bins: usize, upper: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::argument("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(Error::argument("cannot build a histogram of an empty vector"));
    }
    let mut edges: Vec<f64> = (0..=bins).map(|i| upper * i as f64 / bins as f64).collect();
    edges[bins] = upper;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = if upper > 0.0 {
            let pos = v / upper * bins as f64;
            (libm::ceil(pos) as isize - 1).clamp(0, bins as isize - 1) as usize
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Distribution of per-sample difficulty on `[0, max loss]`.
pub fn difficulty_histogram(losses: &LossVector, bins: usize) -> Result<Histogram> {
    let max = losses.values().iter().fold(0.0f64, |m, &v| m.max(v));
    histogram(losses.values(), bins, max)
}

/// Mean and population variance of accuracy over a trailing window of epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityStats {
    pub mean: f64,
    pub variance: f64,
    pub window_start_epoch: usize,
}

/// `acc_by_epoch[t]` is Acc@1 after epoch `t`.
pub fn stability_stats(acc_by_epoch: &[f64], window_start_epoch: usize) -> Result<StabilityStats> {
    if window_start_epoch >= acc_by_epoch.len() {
        return Err(Error::argument(alloc::format!(
            "window starts at epoch {window_start_epoch} but the log has {} epochs",
            acc_by_epoch.len()
        )));
    }
    let window = &acc_by_epoch[window_start_epoch..];
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let variance = window.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok(StabilityStats { mean, variance, window_start_epoch })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch<'a>(t: &'a [f64], s: &'a [f64], y: &'a [usize], c: usize) -> EvalBatch<'a> {
        EvalBatch::new(Logits::new(t, c).unwrap(), Logits::new(s, c).unwrap(), y).unwrap()
    }

    #[test]
    fn identical_rows_have_loyalty_exactly_one() {
        let rows = [0.3, -1.7, 2.2, 0.0, 14.0, -9.5, 1e-3, 7.25, 3.0, 3.0, 3.0, -40.0];
        for r in rows.chunks(4) {
            assert_eq!(loyalty_row(r, r), 1.0);
        }
    }

    #[test]
    fn perfect_and_hopeless_classifiers() {
        let onehot = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let labels = [0, 1, 2];
        let b = batch(&onehot, &onehot, &labels, 3);
        assert_eq!(top1_accuracy(&b), 1.0);
        assert_eq!(top1_agreement(&b), 1.0);
        assert_eq!(probability_loyalty(&b).1, 1.0);

        let wrong = [2, 2, 0];
        let b = batch(&onehot, &onehot, &wrong, 3);
        assert_eq!(top1_accuracy(&b), 0.0);

        let shifted = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let b = batch(&onehot, &shifted, &labels, 3);
        assert_eq!(top1_agreement(&b), 0.0);
    }

    #[test]
    fn disjoint_point_masses_have_zero_loyalty() {
        let t = [40.0, 0.0];
        let s = [0.0, 40.0];
        assert!(loyalty_row(&t, &s) < 1e-4);
    }

    #[test]
    fn eval_batch_rejects_bad_labels() {
        let z = [0.0, 1.0];
        let l = Logits::new(&z, 2).unwrap();
        assert!(EvalBatch::new(l, l, &[2]).is_err());
        assert!(EvalBatch::new(l, l, &[0, 1]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let constant = LossVector::new(vec![0.7; 9]).unwrap();
        let h = difficulty_histogram(&constant, 4).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total(), 9);

        let grid = LossVector::new((1..=5).map(|i| i as f64 * 0.5).collect()).unwrap();
        let h = difficulty_histogram(&grid, 5).unwrap();
        assert_eq!(h.counts, vec![1; 5]);
        assert_eq!(h.edges.first(), Some(&0.0));
        assert_eq!(h.edges.last(), Some(&2.5));

        let zeros = LossVector::new(vec![0.0; 3]).unwrap();
        assert_eq!(difficulty_histogram(&zeros, 3).unwrap().counts, vec![3, 0, 0]);

        assert!(difficulty_histogram(&LossVector::new(vec![]).unwrap(), 3).is_err());
        assert!(difficulty_histogram(&grid, 0).is_err());
    }

    #[test]
    fn stability_examples() {
        let s = stability_stats(&[0.9; 5], 2).unwrap();
        assert!((s.mean - 0.9).abs() < 1e-15);
        assert!(s.variance.abs() < 1e-15);
        let s = stability_stats(&[0.1, 0.8, 1.0], 1).unwrap();
        assert!((s.mean - 0.9).abs() < 1e-12);
        assert!((s.variance - 0.01).abs() < 1e-12);
        assert!(stability_stats(&[0.5, 0.5], 2).is_err());
    }
}
