//! Code/description scoring and the assignment heads.
//!
//! Shapes: `n` codes, `m` descriptions, vectors of width `d`. `U` is `n x d`
//! and `H` is `m x d`, both row-major.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, softmax_into, DenseMatrix, DenseVector, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// `p_i = sigmoid(max_j a_ij)`.
    Hard,
    /// Softmax-weighted description average, then a per-code projection.
    Soft,
    /// No attention: `[u_i ; mean_j h_j]` through a per-code linear layer.
    Linear,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Hard => "hard",
            Head::Soft => "soft",
            Head::Linear => "linear",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Head::Hard),
            "soft" => Ok(Head::Soft),
            "linear" => Ok(Head::Linear),
            _ => Err(Error::InvalidParam(format!("unknown head {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Plain inner product.
    #[default]
    Dot,
    /// Inner product of unit-normalised vectors.
    Cosine,
}

impl FromStr for ScoreKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ScoreKind::Dot),
            "cosine" => Ok(ScoreKind::Cosine),
            _ => Err(Error::InvalidParam(format!("unknown score {s:?}"))),
        }
    }
}

/// Floor on vector norms in cosine scoring.
const NORM_EPS: f64 = 1e-12;

/// Raw scores plus, for the soft head, the row-normalised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix<T> {
    pub scores: DenseMatrix<T>,
    pub weights: Option<DenseMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub p: DenseVector<T>,
}

/// Per-code output layer: `w` is `n x d` (projection) or `n x 2d` (linear
/// baseline); `b` is present only when biases are enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    pub w: DenseMatrix<T>,
    pub b: Option<DenseVector<T>>,
}

pub type ProjectionParams<T> = HeadParams<T>;
pub type LinearBaselineParams<T> = HeadParams<T>;

impl<T: Scalar> HeadParams<T> {
    pub fn zeros(n: usize, width: usize, bias: bool) -> Self {
        Self {
            w: DenseMatrix::zeros(n, width),
            b: bias.then(|| DenseVector::zeros(n)),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> HeadParams<U> {
        HeadParams {
            w: self.w.map(f),
            b: self.b.as_ref().map(|b| b.map(f)),
        }
    }

    fn bias(&self, i: usize) -> T {
        self.b.as_ref().map_or(T::zero(), |b| b[i])
    }
}

fn check_width<T: Scalar>(ctx: &'static str, m: &DenseMatrix<T>, d: usize) -> Result<()> {
    if m.cols() != d {
        return Err(Error::dim(ctx, d, m.cols()));
    }
    Ok(())
}

/// `a_ij = u_i . h_j`.
pub fn attention_scores<T: Scalar>(u: &DenseMatrix<T>, h: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    check_width("attention scores", h, u.cols())?;
    let mut s = DenseMatrix::zeros(u.rows(), h.rows());
    for i in 0..u.rows() {
        for j in 0..h.rows() {
            s.set(i, j, dot(u.row(i), h.row(j)));
        }
    }
    Ok(s)
}

/// `a_ij = u_i . h_j / (|u_i| |h_j|)`, norms floored at 1e-12.
pub fn cosine_scores<T: Scalar>(u: &DenseMatrix<T>, h: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    check_width("cosine scores", h, u.cols())?;
    let eps = T::lit(NORM_EPS);
    let mut s = DenseMatrix::zeros(u.rows(), h.rows());
    for i in 0..u.rows() {
        let nu = dot(u.row(i), u.row(i)).sqrt().max(eps);
        for j in 0..h.rows() {
            let nh = dot(h.row(j), h.row(j)).sqrt().max(eps);
            s.set(i, j, dot(u.row(i), h.row(j)) / (nu * nh));
        }
    }
    Ok(s)
}

/// Index of the largest entry; the lowest index wins ties.
fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// `sigmoid(max_j a_j)`.
pub fn hard_select<T: Scalar>(score_row: &DenseVector<T>) -> Result<T> {
    if score_row.dim() == 0 {
        return Err(Error::Empty("empty score row"));
    }
    Ok(sigmoid(score_row[argmax(score_row.as_slice())]))
}

/// `sum_j softmax(a)_j h_j`.
pub fn soft_attend<T: Scalar>(score_row: &DenseVector<T>, h: &DenseMatrix<T>) -> Result<DenseVector<T>> {
    if score_row.dim() == 0 || h.rows() == 0 {
        return Err(Error::Empty("empty attention input"));
    }
    if score_row.dim() != h.rows() {
        return Err(Error::dim("soft attention", h.rows(), score_row.dim()));
    }
    let mut w = vec![T::zero(); h.rows()];
    softmax_into(score_row.as_slice(), &mut w);
    let mut out = vec![T::zero(); h.cols()];
    for (j, &a) in w.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(h.row(j)) {
            *o += a * x;
        }
    }
    Ok(DenseVector::from_vec(out))
}

/// `sigmoid(w_i . u~ + b_i)` for code `i`.
pub fn project<T: Scalar>(params: &ProjectionParams<T>, attended: &DenseVector<T>, i: usize) -> Result<T> {
    if i >= params.w.rows() {
        return Err(Error::OutOfRange {
            context: "projection code",
            index: i,
            len: params.w.rows(),
        });
    }
    if attended.dim() != params.w.cols() {
        return Err(Error::dim("projection", params.w.cols(), attended.dim()));
    }
    Ok(sigmoid(dot(params.w.row(i), attended.as_slice()) + params.bias(i)))
}

/// The no-attention baseline over code vectors `u` and description vectors `h`.
pub fn linear_baseline_predict<T: Scalar>(
    params: &LinearBaselineParams<T>,
    u: &DenseMatrix<T>,
    h: &DenseMatrix<T>,
) -> Result<Prediction<T>> {
    if h.rows() == 0 {
        return Err(Error::Empty("record has no descriptions"));
    }
    check_width("linear baseline descriptions", h, u.cols())?;
    if params.w.rows() != u.rows() || params.w.cols() != 2 * u.cols() {
        return Err(Error::dim("linear baseline weights", 2 * u.cols(), params.w.cols()));
    }
    let fwd = head_forward(
        Head::Linear,
        ScoreKind::Dot,
        params,
        u.as_slice(),
        h.as_slice(),
        u.cols(),
    );
    Ok(Prediction {
        p: DenseVector::from_vec(fwd.probs),
    })
}

/// Everything one record's head computed, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadForward<T> {
    pub n: usize,
    pub m: usize,
    /// `n x m` raw scores.
    pub scores: Vec<T>,
    /// Soft head: `n x m` softmax weights.
    pub weights: Option<Vec<T>>,
    /// Soft head: `n x d` attended vectors.
    pub attended: Option<Vec<T>>,
    /// Hard head: argmax description per code.
    pub argmax: Vec<usize>,
    /// Linear head: mean description vector.
    pub mean_h: Option<Vec<T>>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> HeadForward<T> {
    pub fn attention(&self) -> AttentionMatrix<T> {
        AttentionMatrix {
            scores: DenseMatrix::from_vec(self.n, self.m, self.scores.clone()).expect("score shape"),
            weights: self
                .weights
                .as_ref()
                .map(|w| DenseMatrix::from_vec(self.n, self.m, w.clone()).expect("weight shape")),
        }
    }
}

fn norms<T: Scalar>(x: &[T], d: usize) -> Vec<T> {
    let eps = T::lit(NORM_EPS);
    x.chunks(d).map(|r| dot(r, r).sqrt().max(eps)).collect()
}

/// Forward pass of one record. Shapes are the caller's responsibility
/// (`u` is `n x d`, `h` is `m x d` with `m >= 1`).
pub fn head_forward<T: Scalar>(
    head: Head,
    score: ScoreKind,
    params: &HeadParams<T>,
    u: &[T],
    h: &[T],
    d: usize,
) -> HeadForward<T> {
    let n = u.len() / d;
    let m = h.len() / d;
    let mut scores = vec![T::zero(); n * m];
    for i in 0..n {
        for j in 0..m {
            scores[i * m + j] = dot(&u[i * d..(i + 1) * d], &h[j * d..(j + 1) * d]);
        }
    }
    if score == ScoreKind::Cosine {
        let (nu, nh) = (norms(u, d), norms(h, d));
        for i in 0..n {
            for j in 0..m {
                scores[i * m + j] /= nu[i] * nh[j];
            }
        }
    }

    let mut out = HeadForward {
        n,
        m,
        scores,
        weights: None,
        attended: None,
        argmax: Vec::new(),
        mean_h: None,
        logits: vec![T::zero(); n],
        probs: vec![T::zero(); n],
    };
    match head {
        Head::Hard => {
            for i in 0..n {
                let row = &out.scores[i * m..(i + 1) * m];
                let j = argmax(row);
                out.argmax.push(j);
                out.logits[i] = row[j];
            }
        }
        Head::Soft => {
            let mut weights = vec![T::zero(); n * m];
            let mut attended = vec![T::zero(); n * d];
            for i in 0..n {
                softmax_into(&out.scores[i * m..(i + 1) * m], &mut weights[i * m..(i + 1) * m]);
                let ui = &mut attended[i * d..(i + 1) * d];
                for j in 0..m {
                    let a = weights[i * m + j];
                    for (o, &x) in ui.iter_mut().zip(&h[j * d..(j + 1) * d]) {
                        *o += a * x;
                    }
                }
                out.logits[i] = dot(params.w.row(i), ui) + params.bias(i);
            }
            out.weights = Some(weights);
            out.attended = Some(attended);
        }
        Head::Linear => {
            let mut mean = vec![T::zero(); d];
            for j in 0..m {
                for (o, &x) in mean.iter_mut().zip(&h[j * d..(j + 1) * d]) {
                    *o += x;
                }
            }
            let inv = T::one() / T::lit(m as f64);
            mean.iter_mut().for_each(|x| *x *= inv);
            for i in 0..n {
                let w = params.w.row(i);
                out.logits[i] = dot(&w[..d], &u[i * d..(i + 1) * d]) + dot(&w[d..], &mean) + params.bias(i);
            }
            out.mean_h = Some(mean);
        }
    }
    for i in 0..n {
        out.probs[i] = sigmoid(out.logits[i]);
    }
    out
}

/// Backward pass of one record given `d_logits`. Gradients are added into
/// `grads`, `du` (`n x d`) and `dh` (`m x d`).
#[allow(clippy::too_many_arguments)]
pub fn head_backward<T: Scalar>(
    head: Head,
    score: ScoreKind,
    params: &HeadParams<T>,
    u: &[T],
    h: &[T],
    d: usize,
    fwd: &HeadForward<T>,
    d_logits: &[T],
    grads: &mut HeadParams<T>,
    du: &mut [T],
    dh: &mut [T],
) {
    let (n, m) = (fwd.n, fwd.m);
    let mut ds = vec![T::zero(); n * m];
    match head {
        Head::Hard => {
            for i in 0..n {
                ds[i * m + fwd.argmax[i]] = d_logits[i];
            }
        }
        Head::Soft => {
            let weights = fwd.weights.as_ref().expect("soft forward");
            let attended = fwd.attended.as_ref().expect("soft forward");
            for i in 0..n {
                let g = d_logits[i];
                let w = params.w.row(i);
                for (gw, &x) in grads.w.row_mut(i).iter_mut().zip(&attended[i * d..(i + 1) * d]) {
                    *gw += g * x;
                }
                if let Some(b) = grads.b.as_mut() {
                    b[i] += g;
                }
                // d u~_i = g w_i ; d a~_ij = d u~_i . h_j
                let row_w = &weights[i * m..(i + 1) * m];
                let mut da = vec![T::zero(); m];
                for j in 0..m {
                    let hj = &h[j * d..(j + 1) * d];
                    da[j] = g * dot(w, hj);
                    let a = row_w[j];
                    for (o, &x) in dh[j * d..(j + 1) * d].iter_mut().zip(w) {
                        *o += a * g * x;
                    }
                }
                let mean: T = row_w.iter().zip(&da).fold(T::zero(), |acc, (&a, &x)| acc + a * x);
                for j in 0..m {
                    ds[i * m + j] = row_w[j] * (da[j] - mean);
                }
            }
        }
        Head::Linear => {
            let mean = fwd.mean_h.as_ref().expect("linear forward");
            let mut d_mean = vec![T::zero(); d];
            for i in 0..n {
                let g = d_logits[i];
                let w = params.w.row(i);
                let ui = &u[i * d..(i + 1) * d];
                let gw = grads.w.row_mut(i);
                for k in 0..d {
                    gw[k] += g * ui[k];
                    gw[d + k] += g * mean[k];
                    du[i * d + k] += g * w[k];
                    d_mean[k] += g * w[d + k];
                }
                if let Some(b) = grads.b.as_mut() {
                    b[i] += g;
                }
            }
            let inv = T::one() / T::lit(m as f64);
            for j in 0..m {
                for (o, &x) in dh[j * d..(j + 1) * d].iter_mut().zip(&d_mean) {
                    *o += x * inv;
                }
            }
            return;
        }
    }

    match score {
        ScoreKind::Dot => {
            for i in 0..n {
                for j in 0..m {
                    let g = ds[i * m + j];
                    if g == T::zero() {
                        continue;
                    }
                    for k in 0..d {
                        du[i * d + k] += g * h[j * d + k];
                        dh[j * d + k] += g * u[i * d + k];
                    }
                }
            }
        }
        ScoreKind::Cosine => {
            let (nu, nh) = (norms(u, d), norms(h, d));
            let eps = T::lit(NORM_EPS);
            for i in 0..n {
                for j in 0..m {
                    let g = ds[i * m + j];
                    if g == T::zero() {
                        continue;
                    }
                    let a = fwd.scores[i * m + j];
                    let inv = T::one() / (nu[i] * nh[j]);
                    // A floored norm is a constant, so its term drops out.
                    let cu = if nu[i] > eps { a / (nu[i] * nu[i]) } else { T::zero() };
                    let ch = if nh[j] > eps { a / (nh[j] * nh[j]) } else { T::zero() };
                    for k in 0..d {
                        let (uk, hk) = (u[i * d + k], h[j * d + k]);
                        du[i * d + k] += g * (hk * inv - cu * uk);
                        dh[j * d + k] += g * (uk * inv - ch * hk);
                    }
                }
            }
        }
    }
}
