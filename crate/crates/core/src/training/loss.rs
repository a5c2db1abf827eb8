use crate::error::{Error, Result};
use crate::matcher::Prediction;
use crate::numerics::{DenseVector, Rng, Scalar};

/// Probabilities are clamped to `[PROB_CLIP, 1 - PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-12;

/// Mean binary cross-entropy over the `n` codes.
pub fn bce_loss<T: Scalar>(p: &Prediction<T>, t: &[bool]) -> Result<T> {
    Ok(bce_terms(p.p.as_slice(), t)?.0)
}

/// Loss and its gradient with respect to each logit: `(p_i - t_i) / n`,
/// or zero where clipping made the loss flat.
pub(crate) fn bce_terms<T: Scalar>(p: &[T], t: &[bool]) -> Result<(T, Vec<T>)> {
    if p.len() != t.len() {
        return Err(Error::dim("bce labels", p.len(), t.len()));
    }
    if p.is_empty() {
        return Err(Error::Empty("empty prediction"));
    }
    let lo = T::lit(PROB_CLIP);
    let hi = T::one() - lo;
    let n = T::lit(p.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &ti) in p.iter().zip(t) {
        // Probability assigned to the true outcome.
        let raw = if ti { pi } else { T::one() - pi };
        let q = raw.max(lo).min(hi);
        loss -= q.ln();
        let target = if ti { T::one() } else { T::zero() };
        grad.push(if q != raw { T::zero() } else { (pi - target) / n });
    }
    Ok((loss / n, grad))
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParam(format!("dropout must be in [0, 1), got {p}")));
    }
    Ok(())
}

/// Inverted-dropout multipliers: 0 with probability `p`, else `1/(1-p)`.
pub(crate) fn dropout_mask(len: usize, p: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_p(p)?;
    let keep = 1.0 / (1.0 - p);
    Ok((0..len).map(|_| if rng.chance(p) { 0.0 } else { keep }).collect())
}

pub fn apply_dropout<T: Scalar>(
    h: &DenseVector<T>,
    p: f64,
    mode: DropoutMode,
    rng: &mut Rng,
) -> Result<DenseVector<T>> {
    check_p(p)?;
    if mode == DropoutMode::Eval || p == 0.0 {
        return Ok(h.clone());
    }
    let mask = dropout_mask(h.dim(), p, rng)?;
    Ok(DenseVector::from_vec(
        h.as_slice().iter().zip(mask).map(|(&x, m)| x * T::lit(m)).collect(),
    ))
}
