use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lstm::{run_lstm_batch, LstmParams, LstmTrace};
use super::PretrainedVectors;
use crate::corpus::{tokenize, CharVocab, CodeDefinition, WordVocab};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, Rng, Scalar};

/// How words become vectors and how word vectors become a sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderVariant {
    /// Character LSTM per word, word LSTM per sentence.
    CharLstm,
    /// Randomly initialised word embedding table, word LSTM per sentence.
    WordEmbedRandom,
    /// Word embeddings seeded from pretrained vectors (lowercased lookup).
    WordEmbedPretrained,
    /// Character LSTM per word, mean of word vectors per sentence.
    AvgPool,
}

impl EncoderVariant {
    pub const ALL: [EncoderVariant; 4] = [
        EncoderVariant::CharLstm,
        EncoderVariant::WordEmbedRandom,
        EncoderVariant::WordEmbedPretrained,
        EncoderVariant::AvgPool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderVariant::CharLstm => "char-lstm",
            EncoderVariant::WordEmbedRandom => "word-embed-random",
            EncoderVariant::WordEmbedPretrained => "word-embed-pretrained",
            EncoderVariant::AvgPool => "avg-pool",
        }
    }

    pub fn uses_chars(self) -> bool {
        matches!(self, EncoderVariant::CharLstm | EncoderVariant::AvgPool)
    }

    pub fn uses_word_lstm(self) -> bool {
        self != EncoderVariant::AvgPool
    }

    /// Whether word lookups fold case.
    pub fn lowercase(self) -> bool {
        self == EncoderVariant::WordEmbedPretrained
    }
}

impl fmt::Display for EncoderVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char-lstm" => Ok(EncoderVariant::CharLstm),
            "word-embed" | "word-embed-random" => Ok(EncoderVariant::WordEmbedRandom),
            "word-embed-pretrained" => Ok(EncoderVariant::WordEmbedPretrained),
            "avg" | "avg-pool" => Ok(EncoderVariant::AvgPool),
            _ => Err(Error::InvalidParam(format!("unknown encoder variant {s:?}"))),
        }
    }
}

/// The vocabularies shared by both encoder sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabs {
    pub chars: CharVocab,
    pub words: WordVocab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackDims {
    pub chars: usize,
    pub words: usize,
    pub char_embed_dim: usize,
    pub word_embed_dim: usize,
    pub hidden_dim: usize,
}

/// One side's (description or code title) encoder parameters. Tensors a
/// variant does not use are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStack<T> {
    pub variant: EncoderVariant,
    pub char_embed: Option<DenseMatrix<T>>,
    pub char_lstm: Option<LstmParams<T>>,
    pub word_embed: Option<DenseMatrix<T>>,
    pub word_lstm: Option<LstmParams<T>>,
}

fn uniform_matrix<T: Scalar>(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Result<DenseMatrix<T>> {
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-scale, scale).map(T::lit))
        .collect::<Result<Vec<T>>>()?;
    DenseMatrix::from_vec(rows, cols, data)
}

impl<T: Scalar> EncoderStack<T> {
    pub fn zeros(variant: EncoderVariant, dims: StackDims) -> Self {
        let word_dim = if variant.uses_chars() {
            dims.hidden_dim
        } else {
            dims.word_embed_dim
        };
        Self {
            variant,
            char_embed: variant
                .uses_chars()
                .then(|| DenseMatrix::zeros(dims.chars, dims.char_embed_dim)),
            char_lstm: variant
                .uses_chars()
                .then(|| LstmParams::zeros(dims.char_embed_dim, dims.hidden_dim)),
            word_embed: (!variant.uses_chars()).then(|| DenseMatrix::zeros(dims.words, dims.word_embed_dim)),
            word_lstm: variant
                .uses_word_lstm()
                .then(|| LstmParams::zeros(word_dim, dims.hidden_dim)),
        }
    }

    /// Every weight and embedding entry uniform in `±1/sqrt(hidden_dim)`,
    /// biases zero. With `pretrained`, embedding rows of words found in it
    /// are copied from the file instead (the table stays trainable).
    pub fn init(
        variant: EncoderVariant,
        dims: StackDims,
        pretrained: Option<(&PretrainedVectors, &WordVocab)>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.hidden_dim == 0 || (variant.uses_chars() && dims.char_embed_dim == 0) {
            return Err(Error::InvalidParam("encoder dimensions must be positive".into()));
        }
        if !variant.uses_chars() && dims.word_embed_dim == 0 {
            return Err(Error::InvalidParam("word embedding dimension must be positive".into()));
        }
        let scale = 1.0 / (dims.hidden_dim as f64).sqrt();
        let mut s = Self::zeros(variant, dims);
        if let Some(e) = s.char_embed.as_mut() {
            *e = uniform_matrix(dims.chars, dims.char_embed_dim, scale, rng)?;
        }
        if let Some(p) = s.char_lstm.as_mut() {
            *p = LstmParams::uniform(p.input_dim(), p.hidden_dim(), scale, rng)?;
        }
        if let Some(e) = s.word_embed.as_mut() {
            *e = uniform_matrix(dims.words, dims.word_embed_dim, scale, rng)?;
            if let Some((vectors, vocab)) = pretrained {
                if vectors.dim() != dims.word_embed_dim {
                    return Err(Error::dim("pretrained vectors", dims.word_embed_dim, vectors.dim()));
                }
                let mut hits = 0;
                for (k, word) in vocab.symbols().iter().enumerate() {
                    if let Some(v) = vectors.get(word) {
                        for (dst, &x) in e.row_mut(k + 1).iter_mut().zip(v) {
                            *dst = T::lit(x);
                        }
                        hits += 1;
                    }
                }
                log::info!(
                    "pretrained vectors cover {hits} of {} vocabulary words",
                    vocab.symbols().len()
                );
            }
        }
        if let Some(p) = s.word_lstm.as_mut() {
            *p = LstmParams::uniform(p.input_dim(), p.hidden_dim(), scale, rng)?;
        }
        Ok(s)
    }

    /// Dimension of the word vectors fed to the sentence level.
    pub fn word_dim(&self) -> usize {
        match (&self.char_lstm, &self.word_embed) {
            (Some(p), _) => p.hidden_dim(),
            (None, Some(e)) => e.cols(),
            (None, None) => 0,
        }
    }

    /// Dimension of sentence vectors.
    pub fn output_dim(&self) -> usize {
        match &self.word_lstm {
            Some(p) => p.hidden_dim(),
            None => self.word_dim(),
        }
    }

    /// Named views of every tensor the variant uses, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        if let Some(e) = &self.char_embed {
            out.push(("char_embed".into(), e.as_slice()));
        }
        if let Some(p) = &self.char_lstm {
            out.extend(p.tensors().into_iter().map(|(n, t)| (format!("char_lstm.{n}"), t)));
        }
        if let Some(e) = &self.word_embed {
            out.push(("word_embed".into(), e.as_slice()));
        }
        if let Some(p) = &self.word_lstm {
            out.extend(p.tensors().into_iter().map(|(n, t)| (format!("word_lstm.{n}"), t)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        if let Some(e) = &mut self.char_embed {
            out.push(("char_embed".into(), e.as_mut_slice()));
        }
        if let Some(p) = &mut self.char_lstm {
            out.extend(p.tensors_mut().into_iter().map(|(n, t)| (format!("char_lstm.{n}"), t)));
        }
        if let Some(e) = &mut self.word_embed {
            out.push(("word_embed".into(), e.as_mut_slice()));
        }
        if let Some(p) = &mut self.word_lstm {
            out.extend(p.tensors_mut().into_iter().map(|(n, t)| (format!("word_lstm.{n}"), t)));
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> EncoderStack<U> {
        EncoderStack {
            variant: self.variant,
            char_embed: self.char_embed.as_ref().map(|m| m.map(f)),
            char_lstm: self.char_lstm.as_ref().map(|p| p.map(f)),
            word_embed: self.word_embed.as_ref().map(|m| m.map(f)),
            word_lstm: self.word_lstm.as_ref().map(|p| p.map(f)),
        }
    }

    /// Zeroed copy with the same shapes (a gradient buffer).
    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    fn word_key(&self, vocabs: &Vocabs, word: &str) -> WordKey {
        if self.variant.uses_chars() {
            WordKey::Chars(word.chars().map(|c| vocabs.chars.get(&c)).collect())
        } else if self.variant.lowercase() {
            WordKey::Word(vocabs.words.get(&word.to_lowercase()))
        } else {
            WordKey::Word(vocabs.words.get(&word.to_string()))
        }
    }

    /// Encodes a batch of tokenized sentences, keeping everything the
    /// backward pass needs. Each distinct word is encoded once.
    pub fn forward(&self, vocabs: &Vocabs, sentences: &[Vec<String>]) -> Result<SideTrace<T>> {
        let mut slot_of: HashMap<&str, usize> = HashMap::new();
        let mut keys: Vec<WordKey> = Vec::new();
        let mut slots: Vec<Vec<usize>> = Vec::with_capacity(sentences.len());
        for s in sentences {
            if s.is_empty() {
                return Err(Error::Empty("empty sentence"));
            }
            let mut row = Vec::with_capacity(s.len());
            for w in s {
                if w.is_empty() {
                    return Err(Error::Empty("empty word"));
                }
                let next = keys.len();
                let slot = *slot_of.entry(w.as_str()).or_insert_with(|| {
                    keys.push(self.word_key(vocabs, w));
                    next
                });
                row.push(slot);
            }
            slots.push(row);
        }

        let word_dim = self.word_dim();
        let (char_trace, word_vecs) = match (&self.char_embed, &self.char_lstm, &self.word_embed) {
            (Some(emb), Some(lstm), _) => {
                let seqs: Vec<Vec<&[T]>> = keys
                    .iter()
                    .map(|k| match k {
                        WordKey::Chars(ids) => ids.iter().map(|&c| emb.row(c)).collect(),
                        WordKey::Word(_) => unreachable!(),
                    })
                    .collect();
                let trace = run_lstm_batch(lstm, &seqs)?;
                let mut vecs = Vec::with_capacity(keys.len() * word_dim);
                for w in 0..keys.len() {
                    vecs.extend_from_slice(trace.final_hidden(w));
                }
                (Some(trace), vecs)
            }
            (_, _, Some(emb)) => {
                let mut vecs = Vec::with_capacity(keys.len() * word_dim);
                for k in &keys {
                    match k {
                        WordKey::Word(i) => vecs.extend_from_slice(emb.row(*i)),
                        WordKey::Chars(_) => unreachable!(),
                    }
                }
                (None, vecs)
            }
            _ => return Err(Error::InvalidParam("encoder stack has no word-level parameters".into())),
        };

        let out_dim = self.output_dim();
        let (sent_trace, sent_vecs) = match &self.word_lstm {
            Some(lstm) => {
                let seqs: Vec<Vec<&[T]>> = slots
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&w| &word_vecs[w * word_dim..(w + 1) * word_dim])
                            .collect()
                    })
                    .collect();
                let trace = run_lstm_batch(lstm, &seqs)?;
                let mut vecs = Vec::with_capacity(slots.len() * out_dim);
                for s in 0..slots.len() {
                    vecs.extend_from_slice(trace.final_hidden(s));
                }
                (Some(trace), vecs)
            }
            None => {
                let mut vecs = vec![T::zero(); slots.len() * out_dim];
                for (s, row) in slots.iter().enumerate() {
                    let out = &mut vecs[s * out_dim..(s + 1) * out_dim];
                    for &w in row {
                        for (o, &x) in out.iter_mut().zip(&word_vecs[w * word_dim..(w + 1) * word_dim]) {
                            *o += x;
                        }
                    }
                    let inv = T::one() / T::lit(row.len() as f64);
                    out.iter_mut().for_each(|o| *o *= inv);
                }
                (None, vecs)
            }
        };

        Ok(SideTrace {
            keys,
            char_trace,
            word_dim,
            word_vecs,
            slots,
            sent_trace,
            out_dim,
            sent_vecs,
        })
    }

    /// Backpropagates `d_sent` (`num_sentences x output_dim`) into `grads`.
    pub fn backward(&self, trace: &SideTrace<T>, d_sent: &[T], grads: &mut EncoderStack<T>) {
        let wd = trace.word_dim;
        let od = trace.out_dim;
        assert_eq!(d_sent.len(), trace.slots.len() * od, "sentence gradient shape");
        let mut d_words = vec![T::zero(); trace.keys.len() * wd];
        match (&self.word_lstm, &trace.sent_trace) {
            (Some(lstm), Some(st)) => {
                let g = grads.word_lstm.as_mut().expect("gradient buffer shape");
                let dx = st.backward(lstm, d_sent, g);
                for (row, dxs) in trace.slots.iter().zip(&dx) {
                    for (t, &w) in row.iter().enumerate() {
                        for (d, &x) in d_words[w * wd..(w + 1) * wd].iter_mut().zip(&dxs[t * wd..(t + 1) * wd]) {
                            *d += x;
                        }
                    }
                }
            }
            _ => {
                for (s, row) in trace.slots.iter().enumerate() {
                    let inv = T::one() / T::lit(row.len() as f64);
                    for &w in row {
                        for (d, &x) in d_words[w * wd..(w + 1) * wd]
                            .iter_mut()
                            .zip(&d_sent[s * od..(s + 1) * od])
                        {
                            *d += x * inv;
                        }
                    }
                }
            }
        }

        if let (Some(lstm), Some(ct)) = (&self.char_lstm, &trace.char_trace) {
            let dx = ct.backward(lstm, &d_words, grads.char_lstm.as_mut().expect("gradient buffer shape"));
            let emb = grads.char_embed.as_mut().expect("gradient buffer shape");
            let ce = emb.cols();
            for (key, dxw) in trace.keys.iter().zip(&dx) {
                if let WordKey::Chars(ids) = key {
                    for (t, &c) in ids.iter().enumerate() {
                        for (d, &x) in emb.row_mut(c).iter_mut().zip(&dxw[t * ce..(t + 1) * ce]) {
                            *d += x;
                        }
                    }
                }
            }
        } else {
            let emb = grads.word_embed.as_mut().expect("gradient buffer shape");
            for (w, key) in trace.keys.iter().enumerate() {
                if let WordKey::Word(i) = key {
                    for (d, &x) in emb.row_mut(*i).iter_mut().zip(&d_words[w * wd..(w + 1) * wd]) {
                        *d += x;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum WordKey {
    Chars(Vec<usize>),
    Word(usize),
}

/// Cached forward pass of one encoder side over a batch of sentences.
#[derive(Debug, Clone)]
pub struct SideTrace<T> {
    keys: Vec<WordKey>,
    char_trace: Option<LstmTrace<T>>,
    word_dim: usize,
    word_vecs: Vec<T>,
    /// Per sentence, the word slot of each token.
    slots: Vec<Vec<usize>>,
    sent_trace: Option<LstmTrace<T>>,
    out_dim: usize,
    sent_vecs: Vec<T>,
}

impl<T: Scalar> SideTrace<T> {
    pub fn num_sentences(&self) -> usize {
        self.slots.len()
    }

    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    pub fn sentence(&self, i: usize) -> &[T] {
        &self.sent_vecs[i * self.out_dim..(i + 1) * self.out_dim]
    }

    /// All sentence vectors, row-major.
    pub fn sentences(&self) -> &[T] {
        &self.sent_vecs
    }

    /// Vector of the `t`-th token of sentence `i`.
    pub fn token_vector(&self, i: usize, t: usize) -> &[T] {
        let w = self.slots[i][t];
        &self.word_vecs[w * self.word_dim..(w + 1) * self.word_dim]
    }
}

/// Word vector of `word` (character LSTM or embedding row, by variant).
pub fn encode_word<T: Scalar>(stack: &EncoderStack<T>, vocabs: &Vocabs, word: &str) -> Result<DenseVector<T>> {
    if word.is_empty() {
        return Err(Error::Empty("empty word"));
    }
    let tr = stack.forward(vocabs, &[vec![word.to_string()]])?;
    Ok(DenseVector::from_vec(tr.token_vector(0, 0).to_vec()))
}

/// Sentence vector of `words` under the stack's own sentence encoder.
pub fn encode_sentence<T: Scalar>(
    stack: &EncoderStack<T>,
    vocabs: &Vocabs,
    words: &[String],
) -> Result<DenseVector<T>> {
    if words.is_empty() {
        return Err(Error::Empty("empty sentence"));
    }
    let tr = stack.forward(vocabs, &[words.to_vec()])?;
    Ok(DenseVector::from_vec(tr.sentence(0).to_vec()))
}

/// Mean of the word vectors of `words`, whatever the stack's variant.
pub fn average_encode<T: Scalar>(stack: &EncoderStack<T>, vocabs: &Vocabs, words: &[String]) -> Result<DenseVector<T>> {
    if words.is_empty() {
        return Err(Error::Empty("empty sentence"));
    }
    let tr = stack.forward(vocabs, &[words.to_vec()])?;
    let d = stack.word_dim();
    let mut out = vec![T::zero(); d];
    for t in 0..words.len() {
        for (o, &x) in out.iter_mut().zip(tr.token_vector(0, t)) {
            *o += x;
        }
    }
    let inv = T::one() / T::lit(words.len() as f64);
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(DenseVector::from_vec(out))
}

/// The `n x d` matrix of code vectors, one row per tokenized long title.
pub fn encode_code_titles<T: Scalar>(
    code_stack: &EncoderStack<T>,
    vocabs: &Vocabs,
    codes: &[CodeDefinition],
) -> Result<DenseMatrix<T>> {
    if codes.is_empty() {
        return Err(Error::Empty("empty code table"));
    }
    let sentences: Vec<Vec<String>> = codes.iter().map(|c| tokenize(&c.long_title)).collect();
    let tr = code_stack.forward(vocabs, &sentences)?;
    DenseMatrix::from_vec(codes.len(), tr.output_dim(), tr.sentences().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Dd;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn vocabs() -> Vocabs {
        let text = "acute renal failure chronic kidney disease sepsis";
        Vocabs {
            chars: CharVocab::from_symbols(text.chars().filter(|c| !c.is_whitespace())),
            words: WordVocab::from_symbols(words(text)),
        }
    }

    fn dims(v: &Vocabs) -> StackDims {
        StackDims {
            chars: v.chars.len(),
            words: v.words.len(),
            char_embed_dim: 3,
            word_embed_dim: 4,
            hidden_dim: 4,
        }
    }

    fn stack(variant: EncoderVariant, seed: u64) -> EncoderStack<f64> {
        let v = vocabs();
        EncoderStack::init(variant, dims(&v), None, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn encoding_is_deterministic_and_order_sensitive() {
        let v = vocabs();
        for variant in EncoderVariant::ALL {
            let s = stack(variant, 3);
            let a = encode_sentence(&s, &v, &words("acute renal failure")).unwrap();
            assert_eq!(a, encode_sentence(&s, &v, &words("acute renal failure")).unwrap());
            assert_eq!(a.dim(), s.output_dim());
            let b = encode_sentence(&s, &v, &words("failure renal acute")).unwrap();
            if variant.uses_word_lstm() {
                assert_ne!(a, b, "{variant}");
            } else {
                assert!(a
                    .as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .all(|(x, y)| (x - y).abs() < 1e-15));
            }
            assert!(encode_sentence(&s, &v, &[]).is_err());
        }
    }

    #[test]
    fn average_of_one_word_is_that_word() {
        let v = vocabs();
        let s = stack(EncoderVariant::CharLstm, 5);
        let w = encode_word(&s, &v, "sepsis").unwrap();
        assert_eq!(average_encode(&s, &v, &words("sepsis")).unwrap(), w);
        let avg = stack(EncoderVariant::AvgPool, 5);
        assert_eq!(
            encode_sentence(&avg, &v, &words("sepsis")).unwrap(),
            encode_word(&avg, &v, "sepsis").unwrap()
        );
    }

    #[test]
    fn average_of_opposite_vectors_is_zero() {
        let v = vocabs();
        let mut s = EncoderStack::<f64>::zeros(EncoderVariant::WordEmbedRandom, dims(&v));
        let e = s.word_embed.as_mut().unwrap();
        e.row_mut(v.words.get(&"acute".into()))
            .copy_from_slice(&[1.0, -2.0, 0.5, 3.0]);
        e.row_mut(v.words.get(&"renal".into()))
            .copy_from_slice(&[-1.0, 2.0, -0.5, -3.0]);
        assert_eq!(
            average_encode(&s, &v, &words("acute renal")).unwrap().as_slice(),
            &[0.0; 4]
        );
    }

    #[test]
    fn batch_encoding_matches_single_sentences() {
        let v = vocabs();
        let s = stack(EncoderVariant::CharLstm, 9);
        let batch = vec![
            words("acute renal failure"),
            words("sepsis"),
            words("chronic kidney disease failure"),
        ];
        let tr = s.forward(&v, &batch).unwrap();
        for (i, sent) in batch.iter().enumerate() {
            let one = encode_sentence(&s, &v, sent).unwrap();
            for (a, b) in one.as_slice().iter().zip(tr.sentence(i)) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn unknown_words_map_to_the_unk_row() {
        let v = vocabs();
        let s = stack(EncoderVariant::WordEmbedRandom, 2);
        let a = encode_word(&s, &v, "zzz").unwrap();
        assert_eq!(a.as_slice(), s.word_embed.as_ref().unwrap().row(crate::corpus::UNK));
    }

    #[test]
    fn pretrained_rows_are_copied_case_insensitively() {
        let v = Vocabs {
            words: WordVocab::from_symbols(["sepsis".to_string(), "anemia".into()]),
            ..vocabs()
        };
        let vectors = PretrainedVectors::parse("1 4\nSEPSIS 1 2 3 4\n", "mem").unwrap();
        let s = EncoderStack::<f64>::init(
            EncoderVariant::WordEmbedPretrained,
            dims(&v),
            Some((&vectors, &v.words)),
            &mut Rng::new(1),
        )
        .unwrap();
        assert_eq!(encode_word(&s, &v, "Sepsis").unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let bad = PretrainedVectors::parse("1 2\nsepsis 1 2\n", "mem").unwrap();
        assert!(EncoderStack::<f64>::init(
            EncoderVariant::WordEmbedPretrained,
            dims(&v),
            Some((&bad, &v.words)),
            &mut Rng::new(1)
        )
        .is_err());
    }

    /// Gradients of `sum r . sentence_vectors` against extended-precision
    /// central differences, for every variant.
    #[test]
    fn stack_gradients_match_finite_differences() {
        let v = vocabs();
        let batch = vec![words("acute renal failure"), words("renal sepsis"), words("zzz")];
        for variant in EncoderVariant::ALL {
            let s = stack(variant, 11);
            let tr = s.forward(&v, &batch).unwrap();
            let mut rng = Rng::new(4);
            let r: Vec<f64> = (0..tr.sentences().len())
                .map(|_| rng.uniform(-1.0, 1.0).unwrap())
                .collect();
            let mut g = s.zeros_like();
            s.backward(&tr, &r, &mut g);

            let st = s.map(Dd::from);
            let rt: Vec<Dd> = r.iter().map(|&x| Dd::from(x)).collect();
            let loss = |p: &EncoderStack<Dd>| {
                let t = p.forward(&v, &batch).unwrap();
                t.sentences()
                    .iter()
                    .zip(&rt)
                    .fold(Dd::from(0.0), |a, (&x, &c)| a + x * c)
            };
            let step = Dd::from(1e-5);
            let grads = g.tensors();
            for (ti, (name, ga)) in grads.iter().enumerate() {
                for k in 0..ga.len() {
                    let (mut a, mut b) = (st.clone(), st.clone());
                    a.tensors_mut()[ti].1[k] += step;
                    b.tensors_mut()[ti].1[k] -= step;
                    let fd = f64::from((loss(&a) - loss(&b)) / (step + step));
                    let rel = (ga[k] - fd).abs() / fd.abs().max(1e-8);
                    assert!(rel < 1e-4, "{variant} {name}[{k}]: analytic {} fd {fd}", ga[k]);
                }
            }
        }
    }
}
