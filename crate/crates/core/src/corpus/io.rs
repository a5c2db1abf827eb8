use std::collections::HashMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AdmissionRecord, CodeDefinition, DatasetSplit, RawNote};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

/// One line of an input JSONL file: either a raw note or an already
/// extracted record.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InputLine {
    Record(AdmissionRecord),
    Note(RawNote),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonlRead<T> {
    pub items: Vec<T>,
    /// 1-based line numbers and messages of lines that failed to parse.
    pub skipped: Vec<(usize, String)>,
}

fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str, strict: bool) -> Result<JsonlRead<T>> {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => items.push(v),
            Err(e) if strict => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
            Err(e) => {
                log::warn!("{}:{}: skipping malformed line: {e}", path.display(), i + 1);
                skipped.push((i + 1, e.to_string()));
            }
        }
    }
    Ok(JsonlRead { items, skipped })
}

/// Reads notes and/or records. Malformed lines are an error under `strict`
/// and are otherwise skipped with a warning.
pub fn read_input_lines(path: &Path, strict: bool) -> Result<JsonlRead<InputLine>> {
    parse_jsonl(path, &read_to_string(path)?, strict)
}

pub fn read_records(path: &Path) -> Result<Vec<AdmissionRecord>> {
    Ok(parse_jsonl(path, &read_to_string(path)?, true)?.items)
}

pub fn write_records(path: &Path, records: &[AdmissionRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Two tab-separated columns, `code` and `long_title`, no header.
pub fn read_code_table(path: &Path) -> Result<Vec<CodeDefinition>> {
    let text = read_to_string(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((code, title)) = line.split_once('\t') else {
            return Err(err(i + 1, "expected `code<TAB>long_title`".into()));
        };
        let (code, title) = (code.trim(), title.trim());
        if code.is_empty() || title.is_empty() {
            return Err(err(i + 1, "empty code or title".into()));
        }
        if let Some(first) = seen.insert(code.to_string(), i + 1) {
            return Err(err(i + 1, format!("duplicate code {code} (first on line {first})")));
        }
        out.push(CodeDefinition::new(code, title));
    }
    Ok(out)
}

pub fn write_code_table(path: &Path, codes: &[CodeDefinition]) -> Result<()> {
    let out: String = codes
        .iter()
        .map(|c| format!("{}\t{}\n", c.code, c.long_title))
        .collect();
    write_atomic(path, out.as_bytes())
}

/// The hadm_ids of each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitsManifest {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitsManifest {
    pub fn from_split(split: &DatasetSplit) -> Self {
        let ids = |rs: &[AdmissionRecord]| rs.iter().map(|r| r.hadm_id.clone()).collect();
        Self {
            train: ids(&split.train),
            validation: ids(&split.validation),
            test: ids(&split.test),
        }
    }

    /// Looks up every listed id in `records`; unknown ids are an error.
    pub fn apply(&self, records: &[AdmissionRecord]) -> Result<DatasetSplit> {
        let by_id: HashMap<&str, &AdmissionRecord> = records.iter().map(|r| (r.hadm_id.as_str(), r)).collect();
        let pick = |ids: &[String]| -> Result<Vec<AdmissionRecord>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|r| (*r).clone())
                        .ok_or_else(|| Error::InvalidParam(format!("splits manifest lists unknown hadm_id {id}")))
                })
                .collect()
        };
        Ok(DatasetSplit {
            train: pick(&self.train)?,
            validation: pick(&self.validation)?,
            test: pick(&self.test)?,
        })
    }
}

pub fn read_splits_manifest(path: &Path) -> Result<SplitsManifest> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

pub fn write_splits_manifest(path: &Path, manifest: &SplitsManifest) -> Result<()> {
    let mut s = serde_json::to_string_pretty(manifest)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}
