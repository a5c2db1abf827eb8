use std::collections::HashMap;
use std::hash::Hash;

use super::{tokenize, AdmissionRecord, CodeDefinition};

/// Index of the reserved unknown-symbol slot in every vocabulary.
pub const UNK: usize = 0;

/// Symbol table with [`UNK`] at index 0 and known symbols at `1..len()`,
/// numbered in order of first appearance.
#[derive(Debug, Clone)]
pub struct Vocab<S> {
    symbols: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: PartialEq> PartialEq for Vocab<S> {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

pub type CharVocab = Vocab<char>;
pub type WordVocab = Vocab<String>;

impl<S: Eq + Hash + Clone> Default for Vocab<S> {
    fn default() -> Self {
        Self {
            symbols: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<S: Eq + Hash + Clone> Vocab<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = S>) -> Self {
        let mut v = Self::new();
        for s in symbols {
            v.insert(s);
        }
        v
    }

    /// Adds `s` if new; returns its index either way.
    pub fn insert(&mut self, s: S) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.symbols.push(s.clone());
        let i = self.symbols.len();
        self.index.insert(s, i);
        i
    }

    /// Index of `s`, or [`UNK`] when absent.
    pub fn get(&self, s: &S) -> usize {
        self.index.get(s).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, s: &S) -> bool {
        self.index.contains_key(s)
    }

    /// Symbol at `i`; `None` for [`UNK`] or out of range.
    pub fn symbol(&self, i: usize) -> Option<&S> {
        i.checked_sub(1).and_then(|k| self.symbols.get(k))
    }

    /// Number of slots including UNK.
    pub fn len(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Known symbols in index order (UNK excluded).
    pub fn symbols(&self) -> &[S] {
        &self.symbols
    }
}

impl<S: Eq + Hash + Clone> std::ops::Index<usize> for Vocab<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        self.symbol(i).expect("vocab index is UNK or out of range")
    }
}

fn texts<'a>(records: &'a [AdmissionRecord], codes: &'a [CodeDefinition]) -> impl Iterator<Item = &'a str> + 'a {
    records
        .iter()
        .flat_map(|r| r.descriptions.iter().map(String::as_str))
        .chain(codes.iter().map(|c| c.long_title.as_str()))
}

/// Characters of the (training) descriptions, then of every code title.
pub fn build_char_vocab(records: &[AdmissionRecord], codes: &[CodeDefinition]) -> CharVocab {
    let mut v = CharVocab::new();
    for text in texts(records, codes) {
        for tok in tokenize(text) {
            for c in tok.chars() {
                v.insert(c);
            }
        }
    }
    v
}

/// Tokens of the (training) descriptions, then of every code title.
/// `lowercase` folds case first (used by the pretrained-embedding path).
pub fn build_word_vocab(records: &[AdmissionRecord], codes: &[CodeDefinition], lowercase: bool) -> WordVocab {
    let mut v = WordVocab::new();
    for text in texts(records, codes) {
        for tok in tokenize(text) {
            v.insert(if lowercase { tok.to_lowercase() } else { tok });
        }
    }
    v
}
