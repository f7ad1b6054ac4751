//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point element type of embeddings and distance moments.
///
/// Implemented for `f32` and `f64`. Decompositions (SVD, symmetric eigen)
/// always run in `f64` internally and convert back.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// numpy dtype descriptor for little-endian storage of this type.
    const NPY_DESCR: &'static str;

    /// `c = a · bᵀ` where `a` is `m×k`, `b` is `n×k` and `c` is `m×n`, all row-major.
    fn gemm_abt(m: usize, n: usize, k: usize, a: &[Self], b: &[Self], c: &mut [Self]);

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn check_gemm<T>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &[T]) {
    assert!(a.len() >= m * k, "lhs too short for gemm");
    assert!(b.len() >= n * k, "rhs too short for gemm");
    assert!(c.len() >= m * n, "output too short for gemm");
}

impl Real for f64 {
    const NPY_DESCR: &'static str = "<f8";

    fn gemm_abt(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        check_gemm(m, n, k, a, b, c);
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: bounds checked above; strides describe a (m×k row-major),
        // bᵀ (k×n view over n×k row-major) and c (m×n row-major).
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                1,
                k as isize,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Real for f32 {
    const NPY_DESCR: &'static str = "<f4";

    fn gemm_abt(m: usize, n: usize, k: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
        check_gemm(m, n, k, a, b, c);
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: see the f64 implementation.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                1,
                k as isize,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, -1.0, 2.0, 1.0, 0.5]; // 2x3
        let mut c = [0.0f64; 4];
        f64::gemm_abt(2, 2, 3, &a, &b, &mut c);
        assert_eq!(c, [-2.0, 5.5, -2.0, 16.0]);

        let a32: Vec<f32> = a.iter().map(|&x| x as f32).collect();
        let b32: Vec<f32> = b.iter().map(|&x| x as f32).collect();
        let mut c32 = [0.0f32; 4];
        f32::gemm_abt(2, 2, 3, &a32, &b32, &mut c32);
        assert_eq!(c32, [-2.0, 5.5, -2.0, 16.0]);
    }
}
