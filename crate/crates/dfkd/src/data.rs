//! Image-classification datasets in their original binary formats: IDX for
//! MNIST and Fashion-MNIST, the CIFAR-10 binary batches for the CIFAR subset.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DfkdError, Result};
use crate::nn::{Dims, Tensor};

/// Images kept in the CIFAR-10 training subset.
pub const CIFAR_SUBSET_TRAIN: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    Mnist,
    FashionMnist,
    Cifar10Subset,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [DatasetId::Mnist, DatasetId::FashionMnist, DatasetId::Cifar10Subset];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::FashionMnist => "fashion_mnist",
            DatasetId::Cifar10Subset => "cifar10_subset",
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            DatasetId::Mnist | DatasetId::FashionMnist => Dims::new(1, 28, 28),
            DatasetId::Cifar10Subset => Dims::new(3, 32, 32),
        }
    }

    pub fn classes(&self) -> usize {
        10
    }

    /// Per-channel normalization (mean, std) applied after scaling to [0, 1].
    fn normalization(&self) -> (&'static [f32], &'static [f32]) {
        match self {
            DatasetId::Mnist => (&[0.1307], &[0.3081]),
            DatasetId::FashionMnist => (&[0.2860], &[0.3530]),
            DatasetId::Cifar10Subset => (&[0.4914, 0.4822, 0.4465], &[0.2470, 0.2435, 0.2616]),
        }
    }

    fn subdir(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::FashionMnist => "fashion_mnist",
            DatasetId::Cifar10Subset => "cifar10",
        }
    }

    fn download_hint(&self, dir: &Path) -> String {
        match self {
            DatasetId::Mnist | DatasetId::FashionMnist => format!(
                "place the four uncompressed IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte, \
                 t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte) in {}; scripts/fetch_mnist.sh does this for MNIST",
                dir.display()
            ),
            DatasetId::Cifar10Subset => format!(
                "download cifar-10-binary.tar.gz from https://www.cs.toronto.edu/~kriz/ and extract \
                 data_batch_1.bin and test_batch.bin into {}",
                dir.display()
            ),
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = DfkdError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| DfkdError::Config(format!("unknown dataset {s:?}; expected mnist, fashion_mnist or cifar10_subset")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Normalized images with integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: DatasetId,
    pub dims: Dims,
    pub images: Vec<f32>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Samples at `indices` as one batch.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let f = self.dims.size();
        let mut data = Vec::with_capacity(indices.len() * f);
        for &i in indices {
            data.extend_from_slice(&self.images[i * f..(i + 1) * f]);
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (Tensor::new(indices.len(), self.dims.c, self.dims.h, self.dims.w, data), labels)
    }

    /// Contiguous batch `start..end`.
    pub fn range(&self, start: usize, end: usize) -> (Tensor<f32>, &[usize]) {
        let f = self.dims.size();
        let d = self.dims;
        (Tensor::new(end - start, d.c, d.h, d.w, self.images[start * f..end * f].to_vec()), &self.labels[start..end])
    }
}

/// Loads one split from `<root>/<dataset dir>/`.
pub fn load(id: DatasetId, root: &Path, split: Split) -> Result<Dataset> {
    let dir = root.join(id.subdir());
    let (raw, labels) = match id {
        DatasetId::Mnist | DatasetId::FashionMnist => {
            let prefix = if split == Split::Train { "train" } else { "t10k" };
            let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
            let label_file = dir.join(format!("{prefix}-labels-idx1-ubyte"));
            let (raw, shape) = read_idx(&require(id, &dir, images)?, 3)?;
            if shape[1..] != [28, 28] {
                return Err(DfkdError::format(&dir, format!("expected 28x28 images, got {shape:?}")));
            }
            let (labels, lshape) = read_idx(&require(id, &dir, label_file)?, 1)?;
            if lshape[0] != shape[0] {
                return Err(DfkdError::format(&dir, "image and label counts differ"));
            }
            (raw, labels)
        }
        DatasetId::Cifar10Subset => {
            let file = if split == Split::Train { "data_batch_1.bin" } else { "test_batch.bin" };
            let (raw, labels) = read_cifar(&require(id, &dir, dir.join(file))?)?;
            if split == Split::Train {
                let keep = CIFAR_SUBSET_TRAIN.min(labels.len());
                (raw[..keep * 3072].to_vec(), labels[..keep].to_vec())
            } else {
                (raw, labels)
            }
        }
    };
    let dims = id.dims();
    let (mean, std) = id.normalization();
    let spatial = dims.spatial();
    let images = raw
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let ch = (i / spatial) % dims.c;
            (b as f32 / 255.0 - mean[ch]) / std[ch]
        })
        .collect();
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    if let Some(bad) = labels.iter().find(|&&y| y >= id.classes()) {
        return Err(DfkdError::format(&dir, format!("label {bad} out of range")));
    }
    Ok(Dataset { id, dims, images, labels })
}

fn require(id: DatasetId, dir: &Path, file: PathBuf) -> Result<PathBuf> {
    if file.is_file() {
        Ok(file)
    } else {
        Err(DfkdError::Setup(format!("{} not found; {}", file.display(), id.download_hint(dir))))
    }
}

/// Parses an uncompressed IDX file of unsigned bytes with `rank` dimensions.
fn read_idx(path: &Path, rank: usize) -> Result<(Vec<u8>, Vec<usize>)> {
    let bytes = std::fs::read(path).map_err(|e| DfkdError::io(path, e))?;
    let header = 4 + 4 * rank;
    if bytes.len() < header || bytes[0] != 0 || bytes[1] != 0 {
        return Err(DfkdError::format(path, "not an IDX file (gzip-compressed files must be unpacked first)"));
    }
    if bytes[2] != 0x08 || bytes[3] as usize != rank {
        return Err(DfkdError::format(path, format!("expected unsigned-byte IDX of rank {rank}")));
    }
    let shape: Vec<usize> = (0..rank)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let count: usize = shape.iter().product();
    if bytes.len() != header + count {
        return Err(DfkdError::format(path, format!("size {} does not match shape {shape:?}", bytes.len())));
    }
    Ok((bytes[header..].to_vec(), shape))
}

fn read_cifar(path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| DfkdError::io(path, e))?;
    const RECORD: usize = 1 + 3072;
    if bytes.is_empty() || bytes.len() % RECORD != 0 {
        return Err(DfkdError::format(path, "not a CIFAR-10 binary batch"));
    }
    let mut images = Vec::with_capacity(bytes.len() / RECORD * 3072);
    let mut labels = Vec::with_capacity(bytes.len() / RECORD);
    for rec in bytes.chunks_exact(RECORD) {
        labels.push(rec[0]);
        images.extend_from_slice(&rec[1..]);
    }
    Ok((images, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_idx(path: &Path, rank: u8, shape: &[u32], body: &[u8]) {
        let mut bytes = vec![0, 0, 8, rank];
        for s in shape {
            bytes.extend_from_slice(&s.to_be_bytes());
        }
        bytes.extend_from_slice(body);
        std::fs::write(path, bytes).unwrap();
    }

    #[test]
    fn reads_idx_and_normalizes() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("mnist");
        std::fs::create_dir_all(&dir).unwrap();
        let mut img = vec![0u8; 2 * 784];
        img[784] = 255;
        write_idx(&dir.join("t10k-images-idx3-ubyte"), 3, &[2, 28, 28], &img);
        write_idx(&dir.join("t10k-labels-idx1-ubyte"), 1, &[2], &[3, 7]);
        let ds = load(DatasetId::Mnist, root.path(), Split::Test).unwrap();
        assert_eq!(ds.labels, vec![3, 7]);
        assert!((ds.images[0] - (-0.1307 / 0.3081)).abs() < 1e-6);
        assert!((ds.images[784] - ((1.0 - 0.1307) / 0.3081)).abs() < 1e-6);
        let (batch, labels) = ds.gather(&[1]);
        assert_eq!(batch.n, 1);
        assert_eq!(labels, vec![7]);
    }

    #[test]
    fn missing_files_explain_how_to_get_them() {
        let root = tempfile::tempdir().unwrap();
        let err = load(DatasetId::Mnist, root.path(), Split::Train).unwrap_err();
        assert!(matches!(err, DfkdError::Setup(ref m) if m.contains("fetch_mnist")), "{err}");
        let err = load(DatasetId::Cifar10Subset, root.path(), Split::Train).unwrap_err();
        assert!(err.to_string().contains("data_batch_1.bin"));
    }

    #[test]
    fn rejects_truncated_idx() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("fashion_mnist");
        std::fs::create_dir_all(&dir).unwrap();
        write_idx(&dir.join("train-images-idx3-ubyte"), 3, &[2, 28, 28], &[0; 100]);
        write_idx(&dir.join("train-labels-idx1-ubyte"), 1, &[2], &[0, 1]);
        assert!(matches!(load(DatasetId::FashionMnist, root.path(), Split::Train), Err(DfkdError::Format { .. })));
    }
}
