mod oracle;

use dfkd_core::metrics::{
    difficulty_histogram, probability_loyalty, stability_stats, top1_accuracy, top1_agreement, EvalBatch,
};
use dfkd_core::spl::LossVector;
use dfkd_core::Logits;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    teacher: Vec<f64>,
    student: Vec<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl Case {
    fn random(rng: &mut ChaCha8Rng, rows: usize, classes: usize) -> Self {
        let mut draw = |n| (0..n).map(|_| rng.random_range(-4.0..4.0)).collect::<Vec<f64>>();
        let teacher = draw(rows * classes);
        let student = draw(rows * classes);
        let labels = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        Self { teacher, student, labels, classes }
    }

    fn batch(&self) -> EvalBatch<'_> {
        EvalBatch::new(
            Logits::new(&self.teacher, self.classes).unwrap(),
            Logits::new(&self.student, self.classes).unwrap(),
            &self.labels,
        )
        .unwrap()
    }
}

#[test]
fn counts_match_brute_force_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let case = Case::random(&mut rng, 1000, 10);
    let c = case.classes;
    let mut acc_hits = 0;
    let mut agree_hits = 0;
    for i in 0..case.labels.len() {
        let s = oracle::argmax_loop(&case.student[i * c..(i + 1) * c]);
        let t = oracle::argmax_loop(&case.teacher[i * c..(i + 1) * c]);
        if s == case.labels[i] {
            acc_hits += 1;
        }
        if s == t {
            agree_hits += 1;
        }
    }
    let b = case.batch();
    assert_eq!(top1_accuracy(&b), acc_hits as f64 / 1000.0);
    assert_eq!(top1_agreement(&b), agree_hits as f64 / 1000.0);
}

#[test]
fn loyalty_matches_independent_js() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let case = Case::random(&mut rng, 500, 10);
    let (per, mean) = probability_loyalty(&case.batch());
    let c = case.classes;
    let mut total = 0.0;
    for i in 0..case.labels.len() {
        let p = oracle::softmax(&case.teacher[i * c..(i + 1) * c], 1.0);
        let q = oracle::softmax(&case.student[i * c..(i + 1) * c], 1.0);
        let want = 1.0 - oracle::js(&p, &q, 2.0).sqrt();
        assert!((per[i] - want).abs() < 1e-8, "row {i}: {} vs {want}", per[i]);
        total += want;
    }
    assert!((mean - total / 500.0).abs() < 1e-8);
}

#[test]
fn teacher_against_its_own_argmax_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut case = Case::random(&mut rng, 200, 10);
    case.student = case.teacher.clone();
    case.labels = case.teacher.chunks(10).map(oracle::argmax_loop).collect();
    let b = case.batch();
    assert_eq!(top1_accuracy(&b), 1.0);
    assert_eq!(top1_agreement(&b), 1.0);
    assert_eq!(probability_loyalty(&b).1, 1.0);
}

proptest! {
    #[test]
    fn metrics_invariant_to_row_shift(seed in 0u64..1000, shift in prop::collection::vec(-50.0f64..50.0, 16)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = Case::random(&mut rng, 16, 5);
        let mut shifted = Case { teacher: case.teacher.clone(), student: case.student.clone(), labels: case.labels.clone(), classes: 5 };
        for (i, s) in shift.iter().enumerate() {
            shifted.teacher[i * 5..(i + 1) * 5].iter_mut().for_each(|v| *v += s);
            shifted.student[i * 5..(i + 1) * 5].iter_mut().for_each(|v| *v -= 0.5 * s);
        }
        let (a, b) = (case.batch(), shifted.batch());
        prop_assert_eq!(top1_accuracy(&a), top1_accuracy(&b));
        prop_assert_eq!(top1_agreement(&a), top1_agreement(&b));
        prop_assert!((probability_loyalty(&a).1 - probability_loyalty(&b).1).abs() < 1e-9);
    }

    #[test]
    fn argmax_metrics_invariant_to_positive_scaling(seed in 0u64..1000, scale in prop::collection::vec(0.01f64..100.0, 16)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = Case::random(&mut rng, 16, 5);
        let mut scaled = Case { teacher: case.teacher.clone(), student: case.student.clone(), labels: case.labels.clone(), classes: 5 };
        for (i, s) in scale.iter().enumerate() {
            scaled.teacher[i * 5..(i + 1) * 5].iter_mut().for_each(|v| *v *= s);
            scaled.student[i * 5..(i + 1) * 5].iter_mut().for_each(|v| *v *= s);
        }
        prop_assert_eq!(top1_accuracy(&case.batch()), top1_accuracy(&scaled.batch()));
        prop_assert_eq!(top1_agreement(&case.batch()), top1_agreement(&scaled.batch()));
    }

    #[test]
    fn loyalty_is_symmetric_and_bounded(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = Case::random(&mut rng, 8, 6);
        let swapped = Case { teacher: case.student.clone(), student: case.teacher.clone(), labels: case.labels.clone(), classes: 6 };
        let (a, _) = probability_loyalty(&case.batch());
        let (b, _) = probability_loyalty(&swapped.batch());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_conserves_mass(values in prop::collection::vec(0.0f64..100.0, 1..300), bins in 1usize..40) {
        let h = difficulty_histogram(&LossVector::new(values.clone()).unwrap(), bins).unwrap();
        prop_assert_eq!(h.total(), values.len());
        prop_assert_eq!(h.edges.len(), bins + 1);
        prop_assert_eq!(h.edges[0], 0.0);
        let max = values.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(*h.edges.last().unwrap(), max);
    }
}

#[test]
fn full_window_is_global_mean_and_variance() {
    let acc = [0.2, 0.5, 0.9, 0.7];
    let s = stability_stats(&acc, 0).unwrap();
    let mean = acc.iter().sum::<f64>() / 4.0;
    let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0;
    assert!((s.mean - mean).abs() < 1e-15);
    assert!((s.variance - var).abs() < 1e-15);
}
