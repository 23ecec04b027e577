//! Named network architectures for teachers, students and the generator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DfkdError;
use crate::nn::{Dims, LayerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Three conv-BN-ReLU-pool blocks and a BN hidden layer.
    TeacherCnn,
    /// Two conv-BN-ReLU-pool blocks and a narrow BN hidden layer.
    StudentCnn,
    /// Flatten, one BN hidden layer, linear head.
    ToyMlp,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::TeacherCnn, Architecture::StudentCnn, Architecture::ToyMlp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::TeacherCnn => "teacher_cnn",
            Architecture::StudentCnn => "student_cnn",
            Architecture::ToyMlp => "toy_mlp",
        }
    }

    /// Layer list for an input of shape `input` and `classes` outputs.
    pub fn layers(&self, input: Dims, classes: usize) -> Vec<LayerSpec> {
        use LayerSpec::*;
        let block = |out_channels| {
            [Conv2d { out_channels, kernel: 3, padding: 1 }, BatchNorm { affine: true }, Relu, MaxPool2]
        };
        match self {
            Architecture::TeacherCnn => {
                let mut l: Vec<LayerSpec> = [block(16), block(32), block(64)].concat();
                l.extend([Flatten, Linear { out_features: 128 }, BatchNorm { affine: true }, Relu]);
                l.push(Linear { out_features: classes });
                l
            }
            Architecture::StudentCnn => {
                let mut l: Vec<LayerSpec> = [block(8), block(16)].concat();
                l.extend([Flatten, Linear { out_features: 32 }, BatchNorm { affine: true }, Relu]);
                l.push(Linear { out_features: classes });
                l
            }
            Architecture::ToyMlp => {
                let _ = input;
                vec![Flatten, Linear { out_features: 16 }, BatchNorm { affine: true }, Relu, Linear { out_features: classes }]
            }
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = DfkdError;

    fn from_str(s: &str) -> Result<Self, DfkdError> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            DfkdError::Config(format!("unknown architecture {s:?}; expected teacher_cnn, student_cnn or toy_mlp"))
        })
    }
}

/// Upsampling generator: a linear stem to `width × h/4 × w/4`, two
/// nearest-neighbour ×2 blocks, a projection to the image channels, tanh, and
/// a final affine-free batch norm.
pub fn generator_layers(latent_dim: usize, output: Dims, width: usize) -> Result<Vec<LayerSpec>, DfkdError> {
    use LayerSpec::*;
    if !output.h.is_multiple_of(4) || !output.w.is_multiple_of(4) {
        return Err(DfkdError::Config(format!("generator output {output:?} must have height and width divisible by 4")));
    }
    if latent_dim == 0 || width < 4 {
        return Err(DfkdError::Config("generator needs latent_dim ≥ 1 and width ≥ 4".into()));
    }
    let (h0, w0) = (output.h / 4, output.w / 4);
    Ok(vec![
        Linear { out_features: width * h0 * w0 },
        Reshape { c: width, h: h0, w: w0 },
        BatchNorm { affine: true },
        Upsample2,
        Conv2d { out_channels: width / 2, kernel: 3, padding: 1 },
        BatchNorm { affine: true },
        LeakyRelu { slope: 0.2 },
        Upsample2,
        Conv2d { out_channels: width / 4, kernel: 3, padding: 1 },
        BatchNorm { affine: true },
        LeakyRelu { slope: 0.2 },
        Conv2d { out_channels: output.c, kernel: 3, padding: 1 },
        Tanh,
        BatchNorm { affine: false },
    ])
}
