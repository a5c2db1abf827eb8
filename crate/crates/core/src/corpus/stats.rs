use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::AdmissionRecord;
use crate::error::{Error, Result};

/// Histograms describing a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub records: usize,
    /// description count -> number of records
    pub descriptions_per_record: BTreeMap<usize, usize>,
    /// code -> number of records carrying it
    pub code_frequency: BTreeMap<String, usize>,
    /// gold-code count -> number of records
    pub codes_per_record: BTreeMap<usize, usize>,
}

pub fn corpus_stats(records: &[AdmissionRecord]) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Error::Empty("no records for corpus statistics"));
    }
    let mut s = CorpusStats {
        records: records.len(),
        descriptions_per_record: BTreeMap::new(),
        code_frequency: BTreeMap::new(),
        codes_per_record: BTreeMap::new(),
    };
    for r in records {
        *s.descriptions_per_record.entry(r.descriptions.len()).or_default() += 1;
        *s.codes_per_record.entry(r.codes.len()).or_default() += 1;
        for c in &r.codes {
            *s.code_frequency.entry(c.clone()).or_default() += 1;
        }
    }
    Ok(s)
}

impl CorpusStats {
    /// Long-form CSV: `histogram,key,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("histogram,key,count\n");
        for (k, v) in &self.descriptions_per_record {
            writeln!(out, "descriptions_per_record,{k},{v}").unwrap();
        }
        let mut freq: Vec<_> = self.code_frequency.iter().collect();
        freq.sort_by(|a, b| b.1.cmp(a.1));
        for (k, v) in freq {
            writeln!(out, "code_frequency,{k},{v}").unwrap();
        }
        for (k, v) in &self.codes_per_record {
            writeln!(out, "codes_per_record,{k},{v}").unwrap();
        }
        out
    }
}
