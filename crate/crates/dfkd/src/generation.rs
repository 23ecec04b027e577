//! Pseudo-sample synthesis and the generator update.

use dfkd_core::divergence::{adversarial_divergence, adversarial_divergence_grad, one_hot_loss_grad, DivergenceKind};
use dfkd_core::gen_loss::{GenCoefficients, GenLossBreakdown};
use dfkd_core::norm_stats::{bn_alignment_grad, BnStatSet, LayerStats, StatSource};
use dfkd_core::Logits;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DfkdError, Result};
use crate::models::generator_layers;
use crate::rng::{stream_rng, GENERATOR_INIT_STREAM};
use crate::nn::{Adam, AdamConfig, BackwardOpts, Dims, Mode, Network, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub output: Dims,
    /// Channels after the linear stem; halved by each upsampling block.
    pub width: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Freshly initialized generator; identical for identical specs.
    pub fn build(&self) -> Result<Network<f32>> {
        let mut rng = stream_rng(self.seed, GENERATOR_INIT_STREAM);
        Network::new(&generator_layers(self.latent_dim, self.output, self.width)?, Dims::flat(self.latent_dim), &mut rng)
            .map_err(DfkdError::Config)
    }
}

/// Generator network with its optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    pub spec: GeneratorSpec,
    pub net: Network<f32>,
    pub opt: Adam,
}

impl Generator {
    pub fn new(spec: GeneratorSpec, adam: AdamConfig) -> Result<Self> {
        let net = spec.build()?;
        let opt = Adam::new(adam, net.num_params());
        Ok(Self { spec, net, opt })
    }
}

/// I.i.d. standard-normal latent batch.
pub fn sample_latent(rng: &mut impl Rng, batch: usize, latent_dim: usize) -> Tensor<f32> {
    let data = (0..batch * latent_dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::matrix(batch, latent_dim, data)
}

/// Maps a latent batch to pseudo-samples. `Mode::BatchStats` is the mode used
/// to feed the student; it leaves the generator's running statistics alone.
pub fn synthesize(generator: &mut Network<f32>, z: &Tensor<f32>, mode: Mode) -> Result<Tensor<f32>> {
    let latent = generator.input_dims();
    if (z.c, z.h, z.w) != (latent.c, latent.h, latent.w) {
        return Err(DfkdError::Core(dfkd_core::Error::Argument(format!(
            "latent batch has {} features per row, generator expects {}",
            z.features(),
            latent.size()
        ))));
    }
    Ok(generator.infer(z, mode))
}

/// Fixed settings of the generator objective apart from the scheduled `α_adv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorObjective {
    pub alpha_bn: f64,
    pub alpha_oh: f64,
    pub divergence: DivergenceKind,
    /// Softening temperature inside the adversarial divergence.
    pub temperature: f64,
}

/// A frozen teacher plus its running BN statistics, the alignment target.
pub struct FrozenTeacher<'a> {
    pub net: &'a mut Network<f32>,
    pub running: &'a BnStatSet,
}

pub fn teacher_running_stats(teacher: &Network<f32>) -> BnStatSet {
    BnStatSet::new(StatSource::TeacherRunning, teacher.bn_running_stats())
}

fn logits_f64(t: &Tensor<f32>) -> Vec<f64> {
    t.to_f64()
}

fn scaled(stats: &[LayerStats], k: f64) -> Vec<LayerStats> {
    stats
        .iter()
        .map(|s| LayerStats { mean: s.mean.iter().map(|v| v * k).collect(), var: s.var.iter().map(|v| v * k).collect() })
        .collect()
}

/// One gradient step on `−α_adv·D(f_t(x), f_s(x)) + α_bn·L_bn + α_oh·L_oh`
/// with teacher and student frozen. Returns the loss breakdown at the
/// pre-update parameters.
pub fn generator_step(
    generator: &mut Generator,
    teacher: FrozenTeacher<'_>,
    student: &mut Network<f32>,
    z: &Tensor<f32>,
    alpha_adv: f64,
    objective: &GeneratorObjective,
) -> Result<GenLossBreakdown> {
    let coefficients = GenCoefficients { adv: alpha_adv, bn: objective.alpha_bn, oh: objective.alpha_oh };
    let x = generator.net.forward(z, Mode::Train);

    teacher.net.set_capture(true);
    let zt_out = teacher.net.forward(&x, Mode::Eval);
    teacher.net.set_capture(false);
    let observed = BnStatSet::new(
        StatSource::BatchObserved,
        teacher.net.bn_captured_stats().expect("capture was on for this forward pass"),
    );
    let classes = zt_out.features();
    let zt = logits_f64(&zt_out);
    let zt_logits = Logits::new(&zt, classes)?;

    let (bn, bn_grads) = bn_alignment_grad(teacher.running, &observed)?;
    let (oh, oh_grad) = one_hot_loss_grad(&zt_logits)?;

    let adversarial = alpha_adv != 0.0;
    let zs_out = if adversarial { student.forward(&x, Mode::Eval) } else { student.infer(&x, Mode::Eval) };
    let zs = logits_f64(&zs_out);
    let zs_logits = Logits::new(&zs, classes)?;

    let breakdown;
    let mut d_teacher: Vec<f64> = oh_grad.iter().map(|g| objective.alpha_oh * g).collect();
    let mut d_student = None;
    if adversarial {
        let dg = adversarial_divergence_grad(&zt_logits, &zs_logits, objective.divergence, objective.temperature)?;
        breakdown = GenLossBreakdown::combine(dg.value, bn, oh, coefficients)?;
        d_teacher.iter_mut().zip(&dg.teacher).for_each(|(d, g)| *d -= alpha_adv * g);
        d_student = Some(dg.student.iter().map(|g| -alpha_adv * g).collect::<Vec<f64>>());
    } else {
        let adv = adversarial_divergence(&zt_logits, &zs_logits, objective.divergence, objective.temperature)?;
        breakdown = GenLossBreakdown::combine(adv, bn, oh, coefficients)?;
    }

    let n = x.n;
    let stat_grads = scaled(&bn_grads, objective.alpha_bn);
    let mut dx = teacher.net.backward(
        Tensor::from_f64(n, classes, 1, 1, &d_teacher),
        BackwardOpts { param_grads: false, bn_stat_grads: Some(&stat_grads) },
    );
    if let Some(ds) = d_student {
        let dxs = student.backward(Tensor::from_f64(n, classes, 1, 1, &ds), BackwardOpts::default());
        dx.data.iter_mut().zip(&dxs.data).for_each(|(a, &b)| *a += b);
    }

    generator.net.zero_grads();
    generator.net.backward(dx, BackwardOpts { param_grads: true, bn_stat_grads: None });
    let (params, grads) = generator.net.params_and_grads();
    generator.opt.step(params, grads);
    Ok(breakdown)
}
