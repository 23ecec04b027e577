//! The generator objective differentiated end to end through generator,
//! teacher (with BN-statistic gradients) and student, checked against
//! central finite differences in f64.

use dfkd::models::{generator_layers, Architecture};
use dfkd::nn::{BackwardOpts, Dims, Mode, Network, Tensor};
use dfkd_core::divergence::{adversarial_divergence, adversarial_divergence_grad, one_hot_loss, one_hot_loss_grad, DivergenceKind};
use dfkd_core::norm_stats::{bn_alignment_grad, bn_alignment_loss, BnStatSet, LayerStats, StatSource};
use dfkd_core::Logits;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIMS: Dims = Dims { c: 1, h: 8, w: 8 };
const CLASSES: usize = 4;
const LATENT: usize = 4;
const BATCH: usize = 4;
const ALPHA_ADV: f64 = 0.7;
const ALPHA_BN: f64 = 0.3;
const ALPHA_OH: f64 = 0.5;

struct Chain {
    generator: Network<f64>,
    teacher: Network<f64>,
    student: Network<f64>,
    running: BnStatSet,
    z: Tensor<f64>,
}

fn chain() -> Chain {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let generator = Network::new(&generator_layers(LATENT, DIMS, 8).unwrap(), Dims::flat(LATENT), &mut rng).unwrap();
    let mut teacher = Network::new(&Architecture::StudentCnn.layers(DIMS, CLASSES), DIMS, &mut rng).unwrap();
    let student = Network::new(&Architecture::ToyMlp.layers(DIMS, CLASSES), DIMS, &mut rng).unwrap();
    for _ in 0..3 {
        let x = Tensor::new(8, 1, 8, 8, (0..8 * 64).map(|_| rng.random_range(-2.0..2.0)).collect());
        teacher.infer(&x, Mode::Train);
    }
    let running = BnStatSet::new(StatSource::TeacherRunning, teacher.bn_running_stats());
    let z = Tensor::matrix(BATCH, LATENT, (0..BATCH * LATENT).map(|_| rng.random_range(-1.5..1.5)).collect());
    Chain { generator, teacher, student, running, z }
}

fn objective(c: &mut Chain, params: &[f64]) -> f64 {
    c.generator.params_mut().copy_from_slice(params);
    let x = c.generator.infer(&c.z, Mode::BatchStats);
    c.teacher.set_capture(true);
    let zt = c.teacher.infer(&x, Mode::Eval).data;
    c.teacher.set_capture(false);
    let observed = BnStatSet::new(StatSource::BatchObserved, c.teacher.bn_captured_stats().unwrap());
    let zs = c.student.infer(&x, Mode::Eval).data;
    let (t, s) = (Logits::new(&zt, CLASSES).unwrap(), Logits::new(&zs, CLASSES).unwrap());
    -ALPHA_ADV * adversarial_divergence(&t, &s, DivergenceKind::Js, 1.0).unwrap()
        + ALPHA_BN * bn_alignment_loss(&c.running, &observed).unwrap()
        + ALPHA_OH * one_hot_loss(&t).unwrap()
}

fn analytic(c: &mut Chain) -> Vec<f64> {
    let x = c.generator.forward(&c.z, Mode::BatchStats);
    c.teacher.set_capture(true);
    let zt = c.teacher.forward(&x, Mode::Eval).data;
    c.teacher.set_capture(false);
    let observed = BnStatSet::new(StatSource::BatchObserved, c.teacher.bn_captured_stats().unwrap());
    let zs = c.student.forward(&x, Mode::Eval).data;
    let (t, s) = (Logits::new(&zt, CLASSES).unwrap(), Logits::new(&zs, CLASSES).unwrap());

    let adv = adversarial_divergence_grad(&t, &s, DivergenceKind::Js, 1.0).unwrap();
    let (_, oh) = one_hot_loss_grad(&t).unwrap();
    let (_, bn) = bn_alignment_grad(&c.running, &observed).unwrap();
    let dt: Vec<f64> = oh.iter().zip(&adv.teacher).map(|(o, a)| ALPHA_OH * o - ALPHA_ADV * a).collect();
    let ds: Vec<f64> = adv.student.iter().map(|a| -ALPHA_ADV * a).collect();
    let stat_grads: Vec<LayerStats> = bn
        .iter()
        .map(|l| LayerStats { mean: l.mean.iter().map(|v| v * ALPHA_BN).collect(), var: l.var.iter().map(|v| v * ALPHA_BN).collect() })
        .collect();

    let mut dx = c.teacher.backward(
        Tensor::matrix(BATCH, CLASSES, dt),
        BackwardOpts { param_grads: false, bn_stat_grads: Some(&stat_grads) },
    );
    let dxs = c.student.backward(Tensor::matrix(BATCH, CLASSES, ds), BackwardOpts::default());
    dx.data.iter_mut().zip(&dxs.data).for_each(|(a, b)| *a += b);
    c.generator.zero_grads();
    c.generator.backward(dx, BackwardOpts { param_grads: true, bn_stat_grads: None });
    c.generator.grads().to_vec()
}

#[test]
fn generator_objective_gradient_matches_finite_differences() {
    let mut c = chain();
    let params = c.generator.params().to_vec();
    let grad = analytic(&mut c);
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    assert!(scale > 1e-6, "degenerate objective");

    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut probe = params.clone();
    for _ in 0..60 {
        let i = rng.random_range(0..params.len());
        probe[i] = params[i] + h;
        let up = objective(&mut c, &probe);
        probe[i] = params[i] - h;
        let down = objective(&mut c, &probe);
        probe[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        let err = (fd - grad[i]).abs() / fd.abs().max(1e-3 * scale);
        assert!(err < 1e-4, "param {i}: analytic {} vs numeric {fd}", grad[i]);
    }
}
