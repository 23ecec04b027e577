use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point element type the engine runs on.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// `C = α·op(A)·op(B) + β·C` on row-major buffers, where `op(A)` is `m×k`
    /// and `op(B)` is `k×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_t: bool, b: &[Self], b_t: bool, c: &mut [Self], beta: Self);

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    // Logical rows×cols; stored transposed means storage is cols×rows.
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_real {
    ($t:ty, $f:path) => {
        impl Real for $t {
            fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_t: bool, b: &[Self], b_t: bool, c: &mut [Self], beta: Self) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(m, k, a_t);
                let (rsb, csb) = strides(k, n, b_t);
                // SAFETY: the asserts above bound every index the strides reach.
                unsafe {
                    $f(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Dense `n × c × h × w` tensor, row-major. Vectors use `h = w = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data does not match shape {n}x{c}x{h}x{w}");
        Self { n, c, h, w, data }
    }

    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self::new(n, c, h, w, vec![T::zero(); n * c * h * w])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Self {
        Self::new(rows, cols, 1, 1, data)
    }

    /// Elements per sample.
    pub fn features(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let f = self.features();
        &self.data[i * f..(i + 1) * f]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.f64()).collect()
    }

    pub fn from_f64(n: usize, c: usize, h: usize, w: usize, data: &[f64]) -> Self {
        Self::new(n, c, h, w, data.iter().map(|&v| T::of(v)).collect())
    }

    /// Rows `start..end` along the batch axis.
    pub fn slice_batch(&self, start: usize, end: usize) -> Self {
        let f = self.features();
        Self::new(end - start, self.c, self.h, self.w, self.data[start * f..end * f].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_handles_transposes() {
        // A = [[1,2,3],[4,5,6]] (2x3), B = [[1,0],[0,1],[1,1]] (3x2)
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 3, 2, &a, false, &b, false, &mut c, 0.0);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // Aᵀ stored: A' = 3x2 = [[1,4],[2,5],[3,6]], op(A') = A
        let at = [1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0f64, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [1.0f64; 4];
        f64::gemm(2, 3, 2, &at, true, &bt, true, &mut c2, 1.0);
        assert_eq!(c2, [5.0, 6.0, 11.0, 12.0]);
    }
}
