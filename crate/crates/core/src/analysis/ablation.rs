use serde::Serialize;

use super::{align, TableFormat};
use crate::corpus::{CodeDefinition, DatasetSplit};
use crate::encoders::{EncoderVariant, PretrainedVectors};
use crate::error::{Error, Result};
use crate::evaluation::{micro_auc, micro_f1};
use crate::matcher::Head;
use crate::model::label_matrix;
use crate::training::{train, TrainConfig};

/// Row labels in table order: the two heads, then the four ablations of
/// the soft-attention model.
pub const ABLATION_LABELS: [&str; 6] = [
    "Hard-selection Model",
    "Soft-attention Model",
    "Replace character-level LSTM with random initialized and tunable word embedding",
    "Replace character-level LSTM with pre-trained and tunable word embedding",
    "Replace word-level LSTM encoder with average encoder",
    "Replace attention mechanism with naïve linear classifier",
];

const ARCHITECTURES: [(Head, EncoderVariant); 6] = [
    (Head::Hard, EncoderVariant::CharLstm),
    (Head::Soft, EncoderVariant::CharLstm),
    (Head::Soft, EncoderVariant::WordEmbedRandom),
    (Head::Soft, EncoderVariant::WordEmbedPretrained),
    (Head::Soft, EncoderVariant::AvgPool),
    (Head::Linear, EncoderVariant::CharLstm),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub head: Head,
    pub encoder: EncoderVariant,
    /// Test micro-F1 at the validation-tuned threshold.
    pub f1: f64,
    /// Test micro-AUC; NaN when test labels are one class.
    pub auc: f64,
    pub threshold: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// The six configurations: `base` with only the head and encoder changed.
pub fn ablation_configs(base: &TrainConfig) -> Vec<(&'static str, TrainConfig)> {
    ABLATION_LABELS
        .iter()
        .zip(ARCHITECTURES)
        .map(|(&label, (head, encoder))| {
            let mut c = base.clone();
            c.head = head;
            c.encoder = encoder;
            (label, c)
        })
        .collect()
}

pub fn run_ablation_suite(
    base: &TrainConfig,
    splits: &DatasetSplit,
    codes: &[CodeDefinition],
    pretrained: &PretrainedVectors,
) -> Result<AblationTable> {
    run_ablation_suite_with(base, splits, codes, pretrained, |_| {})
}

/// [`run_ablation_suite`], reporting each row as soon as it finishes.
pub fn run_ablation_suite_with(
    base: &TrainConfig,
    splits: &DatasetSplit,
    codes: &[CodeDefinition],
    pretrained: &PretrainedVectors,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<AblationTable> {
    if splits.test.is_empty() {
        return Err(Error::Empty("the ablation needs a test split"));
    }
    let labels = label_matrix(&splits.test, codes);
    let mut rows = Vec::with_capacity(ABLATION_LABELS.len());
    for (label, config) in ablation_configs(base) {
        log::info!("ablation: {label}");
        let vectors = (config.encoder == EncoderVariant::WordEmbedPretrained).then_some(pretrained);
        let outcome = train(&config, splits, codes, vectors)?;
        let ckpt = outcome.checkpoint;
        let scores = ckpt.model.predict_all(&splits.test)?;
        let f1 = micro_f1(&scores, &labels, ckpt.threshold)?.micro_f1;
        let auc = match micro_auc(&scores, &labels) {
            Ok(a) => a,
            Err(Error::DegenerateLabels) => f64::NAN,
            Err(e) => return Err(e),
        };
        let row = AblationRow {
            label: label.to_string(),
            head: config.head,
            encoder: config.encoder,
            f1,
            auc,
            threshold: ckpt.threshold,
            best_epoch: ckpt.epoch,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(AblationTable { rows })
}

impl AblationTable {
    /// Text: label, F1 and AUC_ROC at three decimals, with a blank line
    /// between the two heads and the ablations. TSV adds the encoder, head,
    /// threshold and best epoch.
    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Text => {
                let mut rows = vec![vec!["Model Architecture".to_string(), "F1".into(), "AUC_ROC".into()]];
                for (i, r) in self.rows.iter().enumerate() {
                    if i == 2 {
                        rows.push(Vec::new());
                    }
                    rows.push(vec![r.label.clone(), format!("{:.3}", r.f1), format!("{:.3}", r.auc)]);
                }
                align(&rows)
            }
            TableFormat::Tsv => {
                let mut out = String::from("model\thead\tencoder\tf1\tauc_roc\tthreshold\tbest_epoch\n");
                for r in &self.rows {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{:.3}\t{:.3}\t{}\t{}\n",
                        r.label, r.head, r.encoder, r.f1, r.auc, r.threshold, r.best_epoch
                    ));
                }
                out
            }
        }
    }
}
