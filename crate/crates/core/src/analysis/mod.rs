//! Inspection artifacts built on a trained model: nearest neighbours in the
//! encoder space, per-record attention tables and the architecture ablation.

mod ablation;
mod attention_table;
mod neighbors;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use ablation::{
    ablation_configs, run_ablation_suite, run_ablation_suite_with, AblationRow, AblationTable, ABLATION_LABELS,
};
pub use attention_table::{attention_table, AttentionMode, AttentionTable};
pub use neighbors::{
    misspell, nearest_neighbors, probe_words, render_neighbors, typo_recovery_audit, Granularity, Neighbor, TypoAudit,
};

/// Output layout of every rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    /// Aligned plain text.
    #[default]
    Text,
    Tsv,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(TableFormat::Text),
            "tsv" => Ok(TableFormat::Tsv),
            _ => Err(Error::InvalidParam(format!(
                "unknown format {s:?} (expected text or tsv)"
            ))),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Text => "text",
            TableFormat::Tsv => "tsv",
        })
    }
}

/// Makes a cell safe for one TSV field or one text row.
fn flat(s: &str) -> String {
    s.chars()
        .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
        .collect()
}

/// Left-aligned columns separated by two spaces. Width counts chars.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; cols];
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_parse() {
        assert_eq!("tsv".parse::<TableFormat>().unwrap(), TableFormat::Tsv);
        assert_eq!("text".parse::<TableFormat>().unwrap(), TableFormat::Text);
        assert!("csv".parse::<TableFormat>().is_err());
    }

    #[test]
    fn alignment_pads_columns() {
        let t = align(&[vec!["a".into(), "bb".into()], vec!["ccc".into(), "d".into()]]);
        assert_eq!(t, "a    bb\nccc  d\n");
        assert_eq!(flat("x\ty\nz"), "x y z");
    }
}
