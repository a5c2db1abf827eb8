use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

/// A records x codes probability grid with its row and column keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub codes: Vec<String>,
    pub hadm_ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    /// CSV text: a `hadm_id,<code>,...` header, then one row per record.
    /// Values use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hadm_id");
        for c in &self.codes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (id, row) in self.hadm_ids.iter().zip(&self.scores) {
            out.push_str(id);
            for x in row {
                write!(out, ",{x}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let mut cols = header.split(',');
        if cols.next() != Some("hadm_id") {
            return Err(err(1, "header must start with hadm_id".into()));
        }
        let codes: Vec<String> = cols.map(String::from).collect();
        let mut table = ScoreTable {
            codes,
            hadm_ids: Vec::new(),
            scores: Vec::new(),
        };
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            table.hadm_ids.push(cells.next().unwrap_or_default().to_string());
            let row: Vec<f64> = cells
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| err(i + 1, format!("bad score {c:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != table.codes.len() {
                return Err(err(
                    i + 1,
                    format!("expected {} scores, found {}", table.codes.len(), row.len()),
                ));
            }
            table.scores.push(row);
        }
        Ok(table)
    }
}

pub fn write_scores_csv(path: &Path, table: &ScoreTable) -> Result<()> {
    write_atomic(path, table.to_csv().as_bytes())
}

pub fn read_scores_csv(path: &Path) -> Result<ScoreTable> {
    ScoreTable::parse(&read_to_string(path)?, &path.display().to_string())
}
