//! Admission records, code tables, text extraction, splits and the
//! synthetic corpus generator.

mod extract;
mod io;
mod select;
mod stats;
mod synth;
mod vocab;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use extract::{extract_descriptions, tokenize};
pub use io::{
    read_code_table, read_input_lines, read_records, read_splits_manifest, write_code_table, write_records,
    write_splits_manifest, InputLine, JsonlRead, SplitsManifest,
};
pub use select::{restrict_to_codes, select_top_codes, split_dataset, DatasetSplit};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{generate_synthetic_corpus, pretrained_vectors_text, typo, NoiseParams, SyntheticCorpus};
pub use vocab::{build_char_vocab, build_word_vocab, CharVocab, Vocab, WordVocab, UNK};

/// A discharge note before extraction. `codes` is optional on input so the
/// same file can carry gold labels through `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNote {
    pub hadm_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codes: Option<BTreeSet<String>>,
}

/// One hospital admission: its diagnosis descriptions and gold codes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub hadm_id: String,
    pub descriptions: Vec<String>,
    #[serde(default)]
    pub codes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDefinition {
    pub code: String,
    pub long_title: String,
}

impl CodeDefinition {
    pub fn new(code: impl Into<String>, long_title: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            long_title: long_title.into(),
        }
    }
}

impl AdmissionRecord {
    /// Label vector over `codes` (1 for each gold code).
    pub fn labels(&self, codes: &[CodeDefinition]) -> Vec<bool> {
        codes.iter().map(|c| self.codes.contains(&c.code)).collect()
    }
}
