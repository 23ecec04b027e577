#![allow(dead_code)]

use std::path::Path;

use dfkd::data::{Dataset, DatasetId};
use dfkd::distill::{AdvCoefficient, DistillConfig, Evaluator, RunState, StudentUpdate, Teacher};
use dfkd::generation::{GeneratorObjective, GeneratorSpec};
use dfkd::models::Architecture;
use dfkd::nn::{AdamConfig, Dims, Network};
use dfkd_core::divergence::DivergenceKind;
use dfkd_core::schedule::{AdvSchedule, Fraction};
use dfkd_core::spl::{LambdaSchedule, SpStrategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIMS: Dims = Dims { c: 1, h: 8, w: 8 };
pub const CLASSES: usize = 4;
pub const LATENT: usize = 8;

/// Small random teacher with BN layers, plus an evaluator over random images.
pub fn tiny_teacher() -> (Teacher, Evaluator) {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut net = Network::new(&Architecture::StudentCnn.layers(DIMS, CLASSES), DIMS, &mut rng).unwrap();
    let n = 24;
    let images = (0..n * DIMS.size()).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let labels = (0..n).map(|i| i % CLASSES).collect();
    let data = Dataset { id: DatasetId::Mnist, dims: DIMS, images, labels };
    let eval = Evaluator::new(&mut net, data);
    (Teacher::new(net, 0.0), eval)
}

pub fn tiny_student(seed: u64) -> Network<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Network::new(&Architecture::ToyMlp.layers(DIMS, CLASSES), DIMS, &mut rng).unwrap()
}

pub fn generator_spec() -> GeneratorSpec {
    GeneratorSpec { latent_dim: LATENT, output: DIMS, width: 8, seed: 5 }
}

pub fn curriculum_config(epochs: usize) -> DistillConfig {
    let adv = AdvSchedule::new(0.1, Fraction::new(1, 5).unwrap(), Fraction::new(3, 4).unwrap(), epochs as u64, 1.0).unwrap();
    DistillConfig {
        temperature: 4.0,
        epochs,
        gen_steps: 2,
        student_steps: 3,
        batch_size: 12,
        update: StudentUpdate::SelfPaced { strategy: SpStrategy::Soft, lambda: LambdaSchedule::new(0.5, 0.1).unwrap() },
        adv: AdvCoefficient::Scheduled(adv),
        objective: GeneratorObjective { alpha_bn: 1.0, alpha_oh: 1.0, divergence: DivergenceKind::Js, temperature: 1.0 },
        student_adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
        generator_adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
        seed: 9,
    }
}

pub fn run_state(cfg: DistillConfig) -> RunState {
    RunState::new(cfg, generator_spec(), tiny_student(1)).unwrap()
}

fn write_idx(path: &Path, dims: &[u32], data: &[u8]) {
    let mut bytes = vec![0u8, 0, 0x08, dims.len() as u8];
    for d in dims {
        bytes.extend_from_slice(&d.to_be_bytes());
    }
    bytes.extend_from_slice(data);
    std::fs::write(path, bytes).unwrap();
}

/// MNIST-shaped IDX files whose classes are bright horizontal bands, so a
/// teacher can learn them in a few steps.
pub fn write_fake_mnist(root: &Path, train: usize, test: usize) {
    let dir = root.join("mnist");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (prefix, n) in [("train", train), ("t10k", test)] {
        let mut images = Vec::with_capacity(n * 784);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 10) as u8;
            labels.push(y);
            for r in 0..28 {
                for _ in 0..28 {
                    let band = r / 3 == y as usize;
                    let base: u8 = if band { 200 } else { 10 };
                    images.push(base.saturating_add(rng.random_range(0..40)));
                }
            }
        }
        write_idx(&dir.join(format!("{prefix}-images-idx3-ubyte")), &[n as u32, 28, 28], &images);
        write_idx(&dir.join(format!("{prefix}-labels-idx1-ubyte")), &[n as u32], &labels);
    }
}
