use serde::Serialize;

use super::{align, flat, TableFormat};
use crate::corpus::{AdmissionRecord, CodeDefinition};
use crate::error::{Error, Result};
use crate::matcher::Head;
use crate::model::AttentionModel;
use crate::numerics::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionMode {
    /// Soft-attention weights; rows sum to one.
    Weights,
    /// Raw code-description scores of the hard head, which has no weights.
    RawScores,
}

impl AttentionMode {
    fn marker(self) -> &'static str {
        match self {
            AttentionMode::Weights => "weights",
            AttentionMode::RawScores => "raw-scores",
        }
    }
}

/// Code-by-description attention for one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionTable {
    pub mode: AttentionMode,
    pub codes: Vec<CodeDefinition>,
    pub descriptions: Vec<String>,
    /// `codes.len() x descriptions.len()`, unrounded.
    pub cells: Vec<Vec<f64>>,
}

pub fn attention_table<T: Scalar>(model: &AttentionModel<T>, record: &AdmissionRecord) -> Result<AttentionTable> {
    let mode = match model.config.head {
        Head::Soft => AttentionMode::Weights,
        Head::Hard => AttentionMode::RawScores,
        Head::Linear => return Err(Error::InvalidParam("the linear head has no attention".into())),
    };
    let att = model.attention(record)?;
    let m = match &att.weights {
        Some(w) if mode == AttentionMode::Weights => w,
        _ => &att.scores,
    };
    let cells = (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| x.as_f64()).collect())
        .collect();
    Ok(AttentionTable {
        mode,
        codes: model.codes().to_vec(),
        descriptions: record.descriptions.clone(),
        cells,
    })
}

/// Hundredths that sum to exactly 100 (largest remainder, ties to the
/// lower index).
fn round_row_to_unit(row: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = row.iter().map(|x| x * 100.0).collect();
    let mut units: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
    let target = scaled.iter().sum::<f64>().round() as i64;
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())));
    let short = (target - units.iter().sum::<i64>()).max(0) as usize;
    for &j in order.iter().take(short) {
        units[j] += 1;
    }
    units.into_iter().map(|u| u as f64 / 100.0).collect()
}

impl AttentionTable {
    /// Cells at two decimals. Weight rows use largest-remainder rounding so
    /// each printed row still sums to 1.00.
    pub fn rounded(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|r| match self.mode {
                AttentionMode::Weights => round_row_to_unit(r),
                AttentionMode::RawScores => r.iter().map(|x| (x * 100.0).round() / 100.0).collect(),
            })
            .collect()
    }

    /// Column of each row's maximum (first on ties).
    pub fn row_argmax(&self) -> Vec<usize> {
        self.cells
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0, |best, (j, &x)| if x > r[best] { j } else { best })
            })
            .collect()
    }

    /// Text: one row per code with its maximum wrapped in `**`, a `sum`
    /// column for weights, then a legend of the description columns.
    /// TSV: a `#mode` line, then `code`, `long_title` and one column per
    /// description.
    pub fn render(&self, format: TableFormat) -> String {
        let rounded = self.rounded();
        let argmax = self.row_argmax();
        let weights = self.mode == AttentionMode::Weights;
        match format {
            TableFormat::Text => {
                let mut out = format!("mode: {}\n", self.mode.marker());
                let mut header = vec!["code".to_string(), "long title".to_string()];
                header.extend((1..=self.descriptions.len()).map(|j| format!("D{j}")));
                if weights {
                    header.push("sum".into());
                }
                let mut rows = vec![header];
                for (i, c) in self.codes.iter().enumerate() {
                    let mut row = vec![c.code.clone(), flat(&c.long_title)];
                    for (j, x) in rounded[i].iter().enumerate() {
                        row.push(if j == argmax[i] {
                            format!("**{x:.2}**")
                        } else {
                            format!("{x:.2}")
                        });
                    }
                    if weights {
                        row.push(format!("{:.2}", rounded[i].iter().sum::<f64>()));
                    }
                    rows.push(row);
                }
                out.push_str(&align(&rows));
                out.push('\n');
                for (j, d) in self.descriptions.iter().enumerate() {
                    out.push_str(&format!("D{}: {}\n", j + 1, flat(d)));
                }
                out
            }
            TableFormat::Tsv => {
                let mut out = format!("#mode\t{}\n", self.mode.marker());
                let mut header = vec!["code".to_string(), "long_title".to_string()];
                header.extend(self.descriptions.iter().map(|d| flat(d)));
                out.push_str(&header.join("\t"));
                out.push('\n');
                for (i, c) in self.codes.iter().enumerate() {
                    let mut row = vec![c.code.clone(), flat(&c.long_title)];
                    row.extend(rounded[i].iter().map(|x| format!("{x:.2}")));
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EncoderVariant;
    use crate::model::tests::tiny;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn single_description_rows_are_one() {
        let (model, _) = tiny(Head::Soft, EncoderVariant::CharLstm);
        let rec = AdmissionRecord {
            hadm_id: "x".into(),
            descriptions: vec!["acute kidney failure".into()],
            ..Default::default()
        };
        let t = attention_table(&model, &rec).unwrap();
        assert_eq!(t.mode, AttentionMode::Weights);
        assert!(t.rounded().iter().all(|r| r == &vec![1.0]));
        let text = t.render(TableFormat::Text);
        assert!(
            text.contains("**1.00**") && text.contains("D1: acute kidney failure"),
            "{text}"
        );
    }

    #[test]
    fn hard_head_reports_raw_scores_and_linear_fails() {
        let (model, recs) = tiny(Head::Hard, EncoderVariant::CharLstm);
        let t = attention_table(&model, &recs[2]).unwrap();
        assert_eq!(t.mode, AttentionMode::RawScores);
        assert!(t.render(TableFormat::Tsv).starts_with("#mode\traw-scores\n"));
        assert!(!t.render(TableFormat::Text).contains(" sum"));
        let (model, recs) = tiny(Head::Linear, EncoderVariant::CharLstm);
        assert!(attention_table(&model, &recs[0]).is_err());
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(round_row_to_unit(&[1.0 / 3.0; 3]), vec![0.34, 0.33, 0.33]);
        assert_eq!(round_row_to_unit(&[0.125, 0.125, 0.75]), vec![0.13, 0.12, 0.75]);
        assert_eq!(round_row_to_unit(&[0.2; 5]), vec![0.2; 5]);
    }

    #[test]
    fn layout_matches_codes_and_descriptions() {
        let (mut model, _) = tiny(Head::Soft, EncoderVariant::CharLstm);
        crate::model::tests::randomize(&mut model, 8);
        let rec = AdmissionRecord {
            hadm_id: "y".into(),
            descriptions: [
                "Sepsis",
                "acute renal failure",
                "CKD stage 3",
                "chronic kidney",
                "hypertension",
            ]
            .map(String::from)
            .to_vec(),
            ..Default::default()
        };
        let t = attention_table(&model, &rec).unwrap();
        let tsv = t.render(TableFormat::Tsv);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 2 + model.num_codes());
        assert!(lines[2..].iter().all(|l| l.split('\t').count() == 2 + 5));
        for row in &t.cells {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let text = t.render(TableFormat::Text);
        let sums = text.lines().skip(2).take(model.num_codes());
        assert!(sums.clone().all(|l| l.trim_end().ends_with("1.00")), "{text}");
        assert_eq!(text.matches("**").count(), 2 * model.num_codes());
    }

    proptest! {
        #[test]
        fn rounded_weight_rows_sum_to_one(raw in prop::collection::vec(0.001f64..1.0, 1..12)) {
            let s: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let r = round_row_to_unit(&row);
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in r.iter().zip(&row) {
                prop_assert!((a - b).abs() <= 0.01 + 1e-12);
            }
        }

        #[test]
        fn columns_follow_description_order(seed in any::<u64>()) {
            let (mut model, recs) = tiny(Head::Soft, EncoderVariant::CharLstm);
            crate::model::tests::randomize(&mut model, 8);
            let rec = &recs[2];
            let mut perm: Vec<usize> = (0..rec.descriptions.len()).collect();
            Rng::new(seed).shuffle(&mut perm);
            let shuffled = AdmissionRecord {
                descriptions: perm.iter().map(|&j| rec.descriptions[j].clone()).collect(),
                ..rec.clone()
            };
            let a = attention_table(&model, rec).unwrap();
            let b = attention_table(&model, &shuffled).unwrap();
            for (ra, rb) in a.cells.iter().zip(&b.cells) {
                for (k, &j) in perm.iter().enumerate() {
                    prop_assert!((rb[k] - ra[j]).abs() < 1e-12);
                }
            }
        }
    }
}
