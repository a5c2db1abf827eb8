use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type of every vector, matrix and model.
///
/// `f64` is the working precision. `f32` is supported for inference experiments,
/// and [`Dd`](super::Dd) (double-double, ~106-bit mantissa) serves as an
/// extended-precision reference when checking derivatives numerically.
pub trait Scalar:
    Float + FromPrimitive + Debug + Send + Sync + 'static + AddAssign + SubAssign + MulAssign + DivAssign
{
    /// Converts an `f64` literal. Every implementor represents all `f64`
    /// values closely enough that this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// `C = alpha * A * B + beta * C` with arbitrary row/column strides.
    /// `A` is `m x k`, `B` is `k x n`, `C` is `m x n`. When `beta` is zero
    /// the previous contents of `C` are ignored.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        beta: Self,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    ) {
        naive_gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

#[allow(clippy::too_many_arguments)]
fn naive_gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    rsa: usize,
    csa: usize,
    b: &[T],
    rsb: usize,
    csb: usize,
    beta: T,
    c: &mut [T],
    rsc: usize,
    csc: usize,
) {
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for p in 0..k {
                acc += a[i * rsa + p * csa] * b[p * rsb + j * csb];
            }
            let dst = &mut c[i * rsc + j * csc];
            *dst = if beta == T::zero() {
                alpha * acc
            } else {
                alpha * acc + beta * *dst
            };
        }
    }
}

/// Checks that every strided access of a gemm operand stays inside `len`.
fn span_ok(rows: usize, cols: usize, rs: usize, cs: usize, len: usize) -> bool {
    rows == 0 || cols == 0 || (rows - 1) * rs + (cols - 1) * cs < len
}

macro_rules! blas_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: usize,
                csa: usize,
                b: &[Self],
                rsb: usize,
                csb: usize,
                beta: Self,
                c: &mut [Self],
                rsc: usize,
                csc: usize,
            ) {
                assert!(span_ok(m, k, rsa, csa, a.len()), "gemm: A out of bounds");
                assert!(span_ok(k, n, rsb, csb, b.len()), "gemm: B out of bounds");
                assert!(span_ok(m, n, rsc, csc, c.len()), "gemm: C out of bounds");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: all strided accesses were bounds-checked above and
                // `c` is uniquely borrowed for the duration of the call.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        beta,
                        c.as_mut_ptr(),
                        rsc as isize,
                        csc as isize,
                    );
                }
            }
        }
    };
}

blas_scalar!(f64, matrixmultiply::dgemm);
blas_scalar!(f32, matrixmultiply::sgemm);

impl Scalar for super::Dd {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Dd;

    #[test]
    fn literals_are_exact_in_every_precision() {
        for x in [0.37, -1e-12, 1.0 / 3.0, 12345.678] {
            assert_eq!(f64::lit(x), x);
            assert_eq!(Dd::lit(x).as_f64(), x);
            assert_eq!(f32::lit(x), x as f32);
        }
    }

    fn check_against_naive<T: Scalar>() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<T> = (0..m * k).map(|i| T::lit((i as f64 * 0.37).sin())).collect();
        let b: Vec<T> = (0..k * n).map(|i| T::lit((i as f64 * 0.11).cos())).collect();
        let mut c = vec![T::lit(1.5); m * n];
        let mut expect = c.clone();
        // B used transposed through its strides.
        T::gemm(m, k, n, T::lit(2.0), &a, k, 1, &b, 1, k, T::one(), &mut c, n, 1);
        naive_gemm(m, k, n, T::lit(2.0), &a, k, 1, &b, 1, k, T::one(), &mut expect, n, 1);
        for (x, y) in c.iter().zip(&expect) {
            assert!((*x - *y).abs().as_f64() < 1e-5);
        }
    }

    #[test]
    fn blas_kernels_match_naive_loops() {
        check_against_naive::<f64>();
        check_against_naive::<f32>();
    }

    #[test]
    fn zero_beta_ignores_stale_output() {
        let a = [1.0f64, 2.0];
        let b = [3.0f64, 4.0];
        let mut c = [f64::NAN];
        f64::gemm(1, 2, 1, 1.0, &a, 2, 1, &b, 1, 1, 0.0, &mut c, 1, 1);
        assert_eq!(c[0], 11.0);
        let mut c2 = [Dd::from(f64::NAN)];
        let a2 = a.map(Dd::from);
        let b2 = b.map(Dd::from);
        Dd::gemm(
            1,
            2,
            1,
            Dd::from(1.0),
            &a2,
            2,
            1,
            &b2,
            1,
            1,
            Dd::from(0.0),
            &mut c2,
            1,
            1,
        );
        assert_eq!(c2[0].hi(), 11.0);
    }
}
