use crate::error::{Error, Result};

/// Row-major `batch × classes` view over a logit matrix.
#[derive(Debug, Clone, Copy)]
pub struct Logits<'a> {
    data: &'a [f64],
    classes: usize,
}

impl<'a> Logits<'a> {
    pub fn new(data: &'a [f64], classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::argument("logit matrix needs at least one class"));
        }
        if !data.len().is_multiple_of(classes) {
            return Err(Error::argument(alloc::format!(
                "logit buffer of length {} is not a multiple of {classes} classes",
                data.len()
            )));
        }
        Ok(Self { data, classes })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.data.chunks_exact(self.classes)
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::data(alloc::format!("{what} logits contain a non-finite entry")))
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &Logits<'_>) -> Result<()> {
        if self.classes != other.classes || self.data.len() != other.data.len() {
            return Err(Error::argument(alloc::format!(
                "logit shapes differ: {}x{} vs {}x{}",
                self.rows(),
                self.classes,
                other.rows(),
                other.classes
            )));
        }
        Ok(())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
