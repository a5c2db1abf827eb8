use super::{DenseVector, Scalar};
use crate::error::{Error, Result};

/// Logistic function, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn tanh<T: Scalar>(x: T) -> T {
    x.tanh()
}

/// Max-subtracted softmax over a slice; the caller guarantees it is non-empty.
pub(crate) fn softmax_into<T: Scalar>(v: &[T], out: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax<T: Scalar>(v: &DenseVector<T>) -> Result<DenseVector<T>> {
    if v.dim() == 0 {
        return Err(Error::Empty("empty softmax input"));
    }
    let mut out = vec![T::zero(); v.dim()];
    softmax_into(v.as_slice(), &mut out);
    Ok(DenseVector::from_vec(out))
}
