//! The full matcher: both encoder sides plus an assignment head, with a
//! batched forward/backward engine.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, AdmissionRecord, CodeDefinition};
use crate::encoders::{EncoderStack, EncoderVariant, PretrainedVectors, SideTrace, StackDims, Vocabs};
use crate::error::{Error, Result};
use crate::matcher::{
    head_backward, head_forward, AttentionMatrix, Head, HeadForward, HeadParams, Prediction, ScoreKind,
};
use crate::numerics::{DenseMatrix, DenseVector, Rng, Scalar};
use crate::training::{bce_terms, dropout_mask};

/// Architecture switches; everything needed to rebuild parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub head: Head,
    pub encoder: EncoderVariant,
    pub score: ScoreKind,
    pub hidden_dim: usize,
    pub char_embed_dim: usize,
    pub word_embed_dim: usize,
    pub proj_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            head: Head::Soft,
            encoder: EncoderVariant::CharLstm,
            score: ScoreKind::Dot,
            hidden_dim: 200,
            char_embed_dim: 50,
            word_embed_dim: 200,
            proj_bias: false,
        }
    }
}

/// Every trainable tensor. Also used as the gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub desc: EncoderStack<T>,
    pub code: EncoderStack<T>,
    pub head: HeadParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Named tensors in a fixed order (the checkpoint and optimizer order).
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        out.extend(self.desc.tensors().into_iter().map(|(n, t)| (format!("desc.{n}"), t)));
        out.extend(self.code.tensors().into_iter().map(|(n, t)| (format!("code.{n}"), t)));
        out.push(("head.w".into(), self.head.w.as_slice()));
        if let Some(b) = &self.head.b {
            out.push(("head.b".into(), b.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        out.extend(
            self.desc
                .tensors_mut()
                .into_iter()
                .map(|(n, t)| (format!("desc.{n}"), t)),
        );
        out.extend(
            self.code
                .tensors_mut()
                .into_iter()
                .map(|(n, t)| (format!("code.{n}"), t)),
        );
        out.push(("head.w".into(), self.head.w.as_mut_slice()));
        if let Some(b) = &mut self.head.b {
            out.push(("head.b".into(), b.as_mut_slice()));
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> ModelParams<U> {
        ModelParams {
            desc: self.desc.map(f),
            code: self.code.map(f),
            head: self.head.map(f),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn squared_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
    }

    pub fn scale(&mut self, c: T) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Inverted-dropout setting for one forward pass; the mask is a pure
/// function of `seed`, so backward can replay it exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel<T> {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    codes: Vec<CodeDefinition>,
    code_tokens: Vec<Vec<String>>,
    pub params: ModelParams<T>,
}

/// Cached forward pass of one minibatch.
#[derive(Debug, Clone)]
pub struct BatchTrace<T> {
    desc: SideTrace<T>,
    code: SideTrace<T>,
    mask: Option<Vec<T>>,
    /// Description vectors after dropout, all records stacked.
    h: Vec<T>,
    spans: Vec<(usize, usize)>,
    heads: Vec<HeadForward<T>>,
}

impl<T: Scalar> BatchTrace<T> {
    pub fn probabilities(&self, r: usize) -> &[T] {
        &self.heads[r].probs
    }

    pub fn head(&self, r: usize) -> &HeadForward<T> {
        &self.heads[r]
    }
}

fn stack_dims(config: &ModelConfig, vocabs: &Vocabs) -> StackDims {
    StackDims {
        chars: vocabs.chars.len(),
        words: vocabs.words.len(),
        char_embed_dim: config.char_embed_dim,
        word_embed_dim: config.word_embed_dim,
        hidden_dim: config.hidden_dim,
    }
}

fn head_width(config: &ModelConfig, d: usize) -> usize {
    if config.head == Head::Linear {
        2 * d
    } else {
        d
    }
}

fn zero_params<T: Scalar>(config: &ModelConfig, vocabs: &Vocabs, n: usize) -> ModelParams<T> {
    let side = EncoderStack::zeros(config.encoder, stack_dims(config, vocabs));
    let d = side.output_dim();
    ModelParams {
        desc: side.clone(),
        code: side,
        head: HeadParams::zeros(n, head_width(config, d), config.proj_bias),
    }
}

impl<T: Scalar> AttentionModel<T> {
    /// Fresh model. Encoder weights are uniform in `±1/sqrt(hidden_dim)`;
    /// the output layer starts at zero so every initial logit of the soft
    /// and linear heads is exactly 0.
    pub fn new(
        config: ModelConfig,
        vocabs: Vocabs,
        codes: Vec<CodeDefinition>,
        pretrained: Option<&PretrainedVectors>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::Empty("empty code table"));
        }
        if config.encoder == EncoderVariant::WordEmbedPretrained && pretrained.is_none() {
            return Err(Error::InvalidParam("the pretrained encoder needs a vector file".into()));
        }
        let dims = stack_dims(&config, &vocabs);
        let pre = pretrained.map(|p| (p, &vocabs.words));
        let desc = EncoderStack::init(config.encoder, dims, pre, rng)?;
        let code = EncoderStack::init(config.encoder, dims, pre, rng)?;
        let d = desc.output_dim();
        let head = HeadParams::zeros(codes.len(), head_width(&config, d), config.proj_bias);
        Self::from_parts(config, vocabs, codes, ModelParams { desc, code, head })
    }

    /// All-zero model of the right shapes.
    pub fn zeros(config: ModelConfig, vocabs: Vocabs, codes: Vec<CodeDefinition>) -> Result<Self> {
        let params = zero_params(&config, &vocabs, codes.len());
        Self::from_parts(config, vocabs, codes, params)
    }

    /// Assembles a model, checking every tensor shape against `config`.
    pub fn from_parts(
        config: ModelConfig,
        vocabs: Vocabs,
        codes: Vec<CodeDefinition>,
        params: ModelParams<T>,
    ) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::Empty("empty code table"));
        }
        let reference = zero_params::<T>(&config, &vocabs, codes.len());
        let want = reference.tensors();
        let got = params.tensors();
        if want.len() != got.len() {
            return Err(Error::dim("model tensor count", want.len(), got.len()));
        }
        for ((wn, wt), (gn, gt)) in want.iter().zip(&got) {
            if wn != gn {
                return Err(Error::InvalidParam(format!("expected tensor {wn}, found {gn}")));
            }
            if wt.len() != gt.len() {
                return Err(Error::dim("model tensor size", wt.len(), gt.len()));
            }
        }
        let code_tokens: Vec<Vec<String>> = codes.iter().map(|c| tokenize(&c.long_title)).collect();
        if code_tokens.iter().any(Vec::is_empty) {
            return Err(Error::Empty("code title without tokens"));
        }
        Ok(Self {
            config,
            vocabs,
            codes,
            code_tokens,
            params,
        })
    }

    pub fn codes(&self) -> &[CodeDefinition] {
        &self.codes
    }

    pub fn num_codes(&self) -> usize {
        self.codes.len()
    }

    /// Width of code and description vectors.
    pub fn dim(&self) -> usize {
        self.params.desc.output_dim()
    }

    pub fn cast<U: Scalar>(&self) -> AttentionModel<U> {
        AttentionModel {
            config: self.config,
            vocabs: self.vocabs.clone(),
            codes: self.codes.clone(),
            code_tokens: self.code_tokens.clone(),
            params: self.params.map(|x| U::lit(x.as_f64())),
        }
    }

    /// `n x d` matrix of code vectors under the current parameters.
    pub fn code_vectors(&self) -> Result<DenseMatrix<T>> {
        let tr = self.params.code.forward(&self.vocabs, &self.code_tokens)?;
        DenseMatrix::from_vec(self.num_codes(), tr.output_dim(), tr.sentences().to_vec())
    }

    /// Forward pass over a minibatch. Code vectors are computed once and
    /// shared by every record.
    pub fn forward(&self, records: &[&AdmissionRecord], dropout: Option<Dropout>) -> Result<BatchTrace<T>> {
        if records.is_empty() {
            return Err(Error::Empty("empty batch"));
        }
        let mut sentences = Vec::new();
        let mut spans = Vec::with_capacity(records.len());
        for r in records {
            if r.descriptions.is_empty() {
                return Err(Error::Empty("record has no descriptions"));
            }
            let start = sentences.len();
            for d in &r.descriptions {
                let toks = tokenize(d);
                if toks.is_empty() {
                    return Err(Error::Empty("description without tokens"));
                }
                sentences.push(toks);
            }
            spans.push((start, sentences.len()));
        }
        let desc = self.params.desc.forward(&self.vocabs, &sentences)?;
        let code = self.params.code.forward(&self.vocabs, &self.code_tokens)?;
        let d = desc.output_dim();

        let mut h = desc.sentences().to_vec();
        let mask = match dropout {
            Some(Dropout { p, seed }) if p > 0.0 => {
                let mask: Vec<T> = dropout_mask(h.len(), p, &mut Rng::new(seed))?
                    .into_iter()
                    .map(T::lit)
                    .collect();
                h.iter_mut().zip(&mask).for_each(|(x, &m)| *x *= m);
                Some(mask)
            }
            _ => None,
        };

        let heads = spans
            .iter()
            .map(|&(a, b)| {
                head_forward(
                    self.config.head,
                    self.config.score,
                    &self.params.head,
                    code.sentences(),
                    &h[a * d..b * d],
                    d,
                )
            })
            .collect();
        Ok(BatchTrace {
            desc,
            code,
            mask,
            h,
            spans,
            heads,
        })
    }

    /// Mean clipped BCE over the batch and its gradient.
    pub fn backward(&self, trace: &BatchTrace<T>, records: &[&AdmissionRecord]) -> Result<(T, ModelParams<T>)> {
        if records.len() != trace.heads.len() {
            return Err(Error::dim("batch records", trace.heads.len(), records.len()));
        }
        let n = self.num_codes();
        let d = trace.desc.output_dim();
        let batch = T::lit(records.len() as f64);
        let mut grads = self.params.zeros_like();
        let mut du = vec![T::zero(); n * d];
        let mut dh = vec![T::zero(); trace.h.len()];
        let mut total = T::zero();
        for (r, rec) in records.iter().enumerate() {
            let fwd = &trace.heads[r];
            let labels = rec.labels(&self.codes);
            let (loss, mut dl) = bce_terms(&fwd.probs, &labels)?;
            total += loss;
            dl.iter_mut().for_each(|g| *g /= batch);
            let (a, b) = trace.spans[r];
            head_backward(
                self.config.head,
                self.config.score,
                &self.params.head,
                trace.code.sentences(),
                &trace.h[a * d..b * d],
                d,
                fwd,
                &dl,
                &mut grads.head,
                &mut du,
                &mut dh[a * d..b * d],
            );
        }
        if let Some(mask) = &trace.mask {
            dh.iter_mut().zip(mask).for_each(|(g, &m)| *g *= m);
        }
        self.params.desc.backward(&trace.desc, &dh, &mut grads.desc);
        self.params.code.backward(&trace.code, &du, &mut grads.code);
        Ok((total / batch, grads))
    }

    /// Mean clipped BCE over the batch, forward only.
    pub fn batch_loss(&self, records: &[&AdmissionRecord], dropout: Option<Dropout>) -> Result<T> {
        let trace = self.forward(records, dropout)?;
        let mut total = T::zero();
        for (r, rec) in records.iter().enumerate() {
            total += bce_terms(&trace.heads[r].probs, &rec.labels(&self.codes))?.0;
        }
        Ok(total / T::lit(records.len() as f64))
    }

    pub fn loss_and_grad(&self, records: &[&AdmissionRecord], dropout: Option<Dropout>) -> Result<(T, ModelParams<T>)> {
        let trace = self.forward(records, dropout)?;
        self.backward(&trace, records)
    }

    /// Per-code probabilities for one record (no dropout).
    pub fn predict(&self, record: &AdmissionRecord) -> Result<Prediction<T>> {
        let trace = self.forward(&[record], None)?;
        Ok(Prediction {
            p: DenseVector::from_vec(trace.heads[0].probs.clone()),
        })
    }

    /// Raw scores (and soft weights) between every code and every description.
    pub fn attention(&self, record: &AdmissionRecord) -> Result<AttentionMatrix<T>> {
        Ok(self.forward(&[record], None)?.heads[0].attention())
    }
}

/// Records per inference chunk.
const PREDICT_CHUNK: usize = 32;

impl<T: Scalar> AttentionModel<T> {
    /// Probabilities for many records as an `n_records x n_codes` grid,
    /// chunked and evaluated in parallel. Each record's output depends
    /// only on that record.
    pub fn predict_all(&self, records: &[AdmissionRecord]) -> Result<Vec<Vec<f64>>> {
        let chunks: Vec<Vec<Vec<f64>>> = records
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| {
                let refs: Vec<&AdmissionRecord> = chunk.iter().collect();
                let trace = self.forward(&refs, None)?;
                Ok((0..chunk.len())
                    .map(|r| trace.probabilities(r).iter().map(|p| p.as_f64()).collect())
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Codes whose probability is at least `threshold`, in code-table order.
pub fn assign_codes<'a>(codes: &'a [CodeDefinition], probs: &[f64], threshold: f64) -> Vec<&'a str> {
    codes
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p >= threshold)
        .map(|(c, _)| c.code.as_str())
        .collect()
}

/// Labels of `records` as an `n_records x n_codes` grid.
pub fn label_matrix(records: &[AdmissionRecord], codes: &[CodeDefinition]) -> Vec<Vec<bool>> {
    records.iter().map(|r| r.labels(codes)).collect()
}
