//! Student updates, the alternating generator/student epoch, evaluation and
//! the majorization-minimization diagnostic.

use dfkd_core::divergence::{
    kd_loss_student_grad, kd_mean_loss_student_grad, per_sample_kd_loss, weighted_mean_loss,
};
use dfkd_core::gen_loss::GenLossBreakdown;
use dfkd_core::metrics::{probability_loyalty, top1_accuracy, top1_agreement, EvalBatch};
use dfkd_core::norm_stats::BnStatSet;
use dfkd_core::schedule::{alpha_adv_at, AdvSchedule};
use dfkd_core::spl::{lambda_at, latent_objective, sp_weights, LambdaSchedule, LossVector, SpStrategy, WeightVector};
use dfkd_core::Logits;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DfkdError, Result};
use crate::generation::{
    generator_step, sample_latent, synthesize, teacher_running_stats, FrozenTeacher, Generator, GeneratorObjective,
    GeneratorSpec,
};
use crate::rng::epoch_rng;
use crate::nn::{Adam, AdamConfig, BackwardOpts, Mode, Network, Real, Tensor};

/// How the student turns per-sample losses into an update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StudentUpdate {
    /// Reweight each sample by `v*(λ(t), lᵢ)`.
    SelfPaced { strategy: SpStrategy, lambda: LambdaSchedule },
    /// Plain mean KD loss with no reweighting anywhere.
    Plain,
}

/// Coefficient on the adversarial term of the generator loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdvCoefficient {
    Scheduled(AdvSchedule),
    Constant(f64),
}

impl AdvCoefficient {
    pub fn at(&self, epoch: usize) -> Result<f64> {
        match self {
            AdvCoefficient::Scheduled(s) => Ok(alpha_adv_at(s, epoch as u64)?),
            AdvCoefficient::Constant(a) => Ok(*a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub temperature: f64,
    pub epochs: usize,
    pub gen_steps: usize,
    pub student_steps: usize,
    pub batch_size: usize,
    pub update: StudentUpdate,
    pub adv: AdvCoefficient,
    pub objective: GeneratorObjective,
    pub student_adam: AdamConfig,
    pub generator_adam: AdamConfig,
    pub seed: u64,
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DfkdError::Config(m.to_string()));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("kd.T must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.gen_steps == 0 || self.student_steps == 0 {
            return bad("kd.epochs, kd.batch_size, kd.gen_steps and kd.student_steps must be positive");
        }
        if !(self.objective.temperature > 0.0) {
            return bad("adv.temperature must be positive");
        }
        if let AdvCoefficient::Scheduled(s) = self.adv {
            if s.total_epochs() != self.epochs as u64 {
                return bad("the adversarial schedule horizon must equal kd.epochs");
            }
        }
        Ok(())
    }

    pub fn lambda_at(&self, epoch: usize) -> f64 {
        match self.update {
            StudentUpdate::SelfPaced { lambda, .. } => lambda_at(&lambda, epoch),
            StudentUpdate::Plain => f64::INFINITY,
        }
    }
}

/// Per-epoch record of the run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub acc1: f64,
    pub agree1: f64,
    pub loyalty_mean: f64,
    pub lambda: f64,
    pub alpha_adv: f64,
    pub mean_weight: f64,
    pub mean_difficulty: f64,
    pub gen: GenLossBreakdown,
    pub kd_weighted: f64,
}

/// Frozen teacher with everything derived from it once per run.
pub struct Teacher {
    pub net: Network<f32>,
    pub running: BnStatSet,
    pub accuracy: f64,
}

impl Teacher {
    pub fn new(net: Network<f32>, accuracy: f64) -> Self {
        let running = teacher_running_stats(&net);
        Self { net, running, accuracy }
    }
}

/// Held-out split with the teacher's logits precomputed.
pub struct Evaluator {
    pub data: Dataset,
    pub teacher_logits: Vec<f64>,
    pub classes: usize,
}

/// Validation metrics of one student.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub acc1: f64,
    pub agree1: f64,
    pub loyalty_mean: f64,
    pub loyalty: Vec<f64>,
}

pub const EVAL_CHUNK: usize = 1000;

/// Eval-mode logits over a whole dataset, in order.
pub fn dataset_logits(net: &mut Network<f32>, data: &Dataset) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len() * net.output_dims().size());
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let (x, _) = data.range(start, end);
        out.extend(net.infer(&x, Mode::Eval).to_f64());
    }
    out
}

impl Evaluator {
    pub fn new(teacher: &mut Network<f32>, data: Dataset) -> Self {
        let classes = teacher.output_dims().size();
        let teacher_logits = dataset_logits(teacher, &data);
        Self { data, teacher_logits, classes }
    }

    /// Fraction of the split on which the teacher itself is right.
    pub fn teacher_accuracy(&self) -> Result<f64> {
        let l = Logits::new(&self.teacher_logits, self.classes)?;
        Ok(top1_accuracy(&EvalBatch::new(l, l, &self.data.labels)?))
    }

    pub fn evaluate(&self, student: &mut Network<f32>) -> Result<Evaluation> {
        let zs = dataset_logits(student, &self.data);
        let batch = EvalBatch::new(
            Logits::new(&self.teacher_logits, self.classes)?,
            Logits::new(&zs, self.classes)?,
            &self.data.labels,
        )?;
        let (loyalty, loyalty_mean) = probability_loyalty(&batch);
        Ok(Evaluation { acc1: top1_accuracy(&batch), agree1: top1_agreement(&batch), loyalty_mean, loyalty })
    }
}

/// Outcome of one student update.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentStepStats {
    pub weighted_loss: f64,
    pub mean_weight: f64,
    pub losses: LossVector,
}

fn apply_logit_grad<T: Real>(student: &mut Network<T>, grad: &[f64], shape: &Tensor<T>) {
    let g = Tensor::from_f64(shape.n, shape.c, shape.h, shape.w, grad);
    student.zero_grads();
    student.backward(g, BackwardOpts { param_grads: true, bn_stat_grads: None });
}

/// One optimizer step on `(1/B) Σᵢ vᵢ·lᵢ` given the student's logits from a
/// training-mode forward pass on the same batch. `g(λ, v)` does not depend on
/// the student and is left out of the gradient.
pub fn student_step(
    student: &mut Network<f32>,
    opt: &mut Adam,
    teacher_logits: &[f64],
    student_logits: &Tensor<f32>,
    weights: &WeightVector,
    temperature: f64,
) -> Result<f64> {
    let classes = student_logits.features();
    let zs = student_logits.to_f64();
    let zt = Logits::new(teacher_logits, classes)?;
    let zsl = Logits::new(&zs, classes)?;
    let losses = per_sample_kd_loss(&zt, &zsl, temperature)?;
    let grad = kd_loss_student_grad(&zt, &zsl, temperature, weights)?;
    let weighted = weighted_mean_loss(&losses, weights);
    apply_logit_grad(student, &grad, student_logits);
    let (p, g) = student.params_and_grads();
    opt.step(p, g);
    Ok(weighted)
}

/// The same step with no curriculum machinery: mean KD loss, no weights.
pub fn plain_kd_step(
    student: &mut Network<f32>,
    opt: &mut Adam,
    teacher_logits: &[f64],
    student_logits: &Tensor<f32>,
    temperature: f64,
) -> Result<f64> {
    let classes = student_logits.features();
    let zs = student_logits.to_f64();
    let (loss, grad) =
        kd_mean_loss_student_grad(&Logits::new(teacher_logits, classes)?, &Logits::new(&zs, classes)?, temperature)?;
    apply_logit_grad(student, &grad, student_logits);
    let (p, g) = student.params_and_grads();
    opt.step(p, g);
    Ok(loss)
}

/// Mutable state of a distillation run. The RNG is derived from the seed and
/// epoch index, so the state at an epoch boundary is all a resume needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub config: DistillConfig,
    pub generator: Generator,
    pub student: Network<f32>,
    pub student_opt: Adam,
    pub next_epoch: usize,
    pub log: Vec<EpochReport>,
}

/// What an epoch leaves behind besides its report.
#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub report: EpochReport,
    /// Per-sample difficulty on the epoch's last student batch.
    pub last_losses: LossVector,
    pub evaluation: Evaluation,
}

fn diverged(epoch: usize, phase: &'static str, step: usize) -> impl FnOnce(DfkdError) -> DfkdError {
    move |e| match e {
        DfkdError::Core(dfkd_core::Error::Data(detail)) => DfkdError::Diverged { epoch, phase, step, detail },
        other => other,
    }
}

impl RunState {
    pub fn new(config: DistillConfig, generator: GeneratorSpec, student: Network<f32>) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(generator, config.generator_adam)?;
        let student_opt = Adam::new(config.student_adam, student.num_params());
        Ok(Self { config, generator, student, student_opt, next_epoch: 0, log: Vec::new() })
    }

    pub fn finished(&self) -> bool {
        self.next_epoch >= self.config.epochs
    }

    /// `gen_steps` generator updates at `α_adv(t)`, then `student_steps`
    /// student updates on fresh pseudo-batches, then validation.
    pub fn train_epoch(&mut self, teacher: &mut Teacher, eval: &Evaluator) -> Result<EpochOutcome> {
        let t = self.next_epoch;
        if self.finished() {
            return Err(DfkdError::Config(format!("run already finished all {} epochs", self.config.epochs)));
        }
        let cfg = self.config;
        let mut rng = epoch_rng(cfg.seed, t);
        let alpha_adv = cfg.adv.at(t)?;
        let lambda = cfg.lambda_at(t);
        let latent = self.generator.spec.latent_dim;

        let mut gen_losses = Vec::with_capacity(cfg.gen_steps);
        for step in 0..cfg.gen_steps {
            let z = sample_latent(&mut rng, cfg.batch_size, latent);
            let frozen = FrozenTeacher { net: &mut teacher.net, running: &teacher.running };
            let b = generator_step(&mut self.generator, frozen, &mut self.student, &z, alpha_adv, &cfg.objective)
                .map_err(diverged(t, "generator", step))?;
            gen_losses.push(b);
        }

        let (mut weighted_sum, mut weight_sum, mut difficulty_sum) = (0.0, 0.0, 0.0);
        let mut last_losses = LossVector::new(Vec::new())?;
        for step in 0..cfg.student_steps {
            let z = sample_latent(&mut rng, cfg.batch_size, latent);
            let x = synthesize(&mut self.generator.net, &z, Mode::BatchStats)?;
            let zt = teacher.net.infer(&x, Mode::Eval).to_f64();
            let zs = self.student.forward(&x, Mode::Train);
            let stats = self.student_update(&zt, &zs, lambda).map_err(diverged(t, "student", step))?;
            weighted_sum += stats.weighted_loss;
            weight_sum += stats.mean_weight;
            difficulty_sum += stats.losses.mean();
            last_losses = stats.losses;
        }

        let evaluation = eval.evaluate(&mut self.student)?;
        let k = cfg.student_steps as f64;
        let report = EpochReport {
            epoch: t,
            acc1: evaluation.acc1,
            agree1: evaluation.agree1,
            loyalty_mean: evaluation.loyalty_mean,
            lambda,
            alpha_adv,
            mean_weight: weight_sum / k,
            mean_difficulty: difficulty_sum / k,
            gen: GenLossBreakdown::mean(&gen_losses),
            kd_weighted: weighted_sum / k,
        };
        self.log.push(report);
        self.next_epoch += 1;
        Ok(EpochOutcome { report, last_losses, evaluation })
    }

    fn student_update(&mut self, zt: &[f64], zs: &Tensor<f32>, lambda: f64) -> Result<StudentStepStats> {
        let classes = zs.features();
        let zs64 = zs.to_f64();
        let losses = per_sample_kd_loss(&Logits::new(zt, classes)?, &Logits::new(&zs64, classes)?, self.config.temperature)?;
        match self.config.update {
            StudentUpdate::SelfPaced { strategy, .. } => {
                let weights = sp_weights(strategy, lambda, &losses)?;
                let weighted_loss =
                    student_step(&mut self.student, &mut self.student_opt, zt, zs, &weights, self.config.temperature)?;
                Ok(StudentStepStats { weighted_loss, mean_weight: weights.mean(), losses })
            }
            StudentUpdate::Plain => {
                let loss = plain_kd_step(&mut self.student, &mut self.student_opt, zt, zs, self.config.temperature)?;
                Ok(StudentStepStats { weighted_loss: loss, mean_weight: 1.0, losses })
            }
        }
    }
}

/// Alternates `v ← v*(λ, L(w))` and a student descent step on the majorant
/// `Σ vᵢ Lᵢ(w)` over one frozen batch, recording the latent objective
/// `F_λ(L(w))` after each of the `steps` rounds.
///
/// The descent step is gradient descent with step halving until the
/// majorant does not increase, which is what an MM step requires.
#[allow(clippy::too_many_arguments)]
pub fn mm_diagnostic<T: Real>(
    student: &mut Network<T>,
    inputs: &Tensor<T>,
    teacher_logits: &[f64],
    strategy: SpStrategy,
    lambda: f64,
    steps: usize,
    temperature: f64,
    lr: f64,
) -> Result<Vec<f64>> {
    let classes = student.output_dims().size();
    let zt = Logits::new(teacher_logits, classes)?;
    let losses_at = |net: &mut Network<T>| -> Result<(Tensor<T>, LossVector)> {
        let zs = net.forward(inputs, Mode::BatchStats);
        let zs64 = zs.to_f64();
        let l = per_sample_kd_loss(&zt, &Logits::new(&zs64, classes)?, temperature)?;
        Ok((zs, l))
    };
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (zs, losses) = losses_at(student)?;
        let weights = sp_weights(strategy, lambda, &losses)?;
        let majorant_ref = weights.dot(&losses);
        let zs64 = zs.to_f64();
        let grad = kd_loss_student_grad(&zt, &Logits::new(&zs64, classes)?, temperature, &weights)?;
        apply_logit_grad(student, &grad, &zs);
        let start: Vec<T> = student.params().to_vec();
        let g: Vec<T> = student.grads().to_vec();
        let mut step = lr;
        let mut accepted = false;
        for _ in 0..40 {
            for ((p, &p0), &gi) in student.params_mut().iter_mut().zip(&start).zip(&g) {
                *p = p0 - T::of(step) * gi;
            }
            let (_, trial) = losses_at(student)?;
            if weights.dot(&trial) <= majorant_ref {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            student.params_mut().copy_from_slice(&start);
        }
        let (_, now) = losses_at(student)?;
        out.push(latent_objective(strategy, lambda, &now)?);
    }
    Ok(out)
}
