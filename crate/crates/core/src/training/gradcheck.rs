use crate::corpus::AdmissionRecord;
use crate::error::{Error, Result};
use crate::model::{AttentionModel, Dropout};
use crate::numerics::{Dd, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Entries redone in double-double because the f64 estimate was inconclusive.
    pub extended: usize,
    pub max_rel_error: f64,
    /// `tensor[index]` of the worst entry.
    pub worst: String,
}

/// f64 differences are trusted only for gradients at least this large and
/// agreeing this closely. Their roundoff is around 1e-11 absolute, so an
/// accepted entry is within ~2e-5 relative of the extended result.
const F64_MIN_GRAD: f64 = 1e-6;
const F64_MAX_REL: f64 = 1e-5;

/// `(8[f(x+h) - f(x-h)] - [f(x+2h) - f(x-2h)]) / 12h` for parameter `k` of
/// tensor `ti`. The parameter is restored afterwards.
fn stencil<T: Scalar>(
    model: &mut AttentionModel<T>,
    (ti, k): (usize, usize),
    h: f64,
    records: &[&AdmissionRecord],
    dropout: Option<Dropout>,
) -> Result<f64> {
    let h = T::lit(h);
    let x = model.params.tensors()[ti].1[k];
    let mut at = |dx: T| -> Result<T> {
        model.params.tensors_mut()[ti].1[k] = x + dx;
        model.batch_loss(records, dropout)
    };
    let d1 = at(h)? - at(-h)?;
    let d2 = at(h + h)? - at(-(h + h))?;
    model.params.tensors_mut()[ti].1[k] = x;
    Ok(((T::lit(8.0) * d1 - d2) / (T::lit(12.0) * h)).as_f64())
}

/// Compares the analytic gradient of the mean batch loss with central
/// differences of step `h` for every parameter. The fourth-order stencil keeps
/// truncation error below the tolerance even for near-zero gradients. Each
/// entry is differenced in f64 first; small or disagreeing entries are redone
/// in double-double arithmetic so f64 roundoff cannot decide the outcome.
/// Relative error is `|a - fd| / max(|fd|, 1e-8)`.
pub fn gradient_check(
    model: &AttentionModel<f64>,
    records: &[AdmissionRecord],
    dropout: Option<Dropout>,
    h: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidParam(format!("step must be positive, got {h}")));
    }
    let refs: Vec<&AdmissionRecord> = records.iter().collect();
    let (_, grads) = model.loss_and_grad(&refs, dropout)?;
    let mut narrow = model.clone();
    let mut wide: Option<AttentionModel<Dd>> = None;
    let rel = |a: f64, fd: f64| (a - fd).abs() / fd.abs().max(1e-8);
    let mut report = GradCheckReport {
        checked: 0,
        extended: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    let grads = grads.tensors();
    for (ti, (name, g)) in grads.iter().enumerate() {
        for (k, &a) in g.iter().enumerate() {
            let mut fd = stencil(&mut narrow, (ti, k), h, &refs, dropout)?;
            if fd.abs() < F64_MIN_GRAD || !(rel(a, fd) < F64_MAX_REL) {
                let wide = wide.get_or_insert_with(|| model.cast::<Dd>());
                fd = stencil(wide, (ti, k), h, &refs, dropout)?;
                report.extended += 1;
            }
            let r = rel(a, fd);
            report.checked += 1;
            if r > report.max_rel_error || r.is_nan() {
                report.max_rel_error = r;
                report.worst = format!("{name}[{k}] analytic {a:e} numeric {fd:e}");
            }
        }
    }
    Ok(report)
}
