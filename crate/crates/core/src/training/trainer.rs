use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::Serialize;

use super::{ModelCheckpoint, TrainConfig};
use crate::corpus::{build_char_vocab, build_word_vocab, AdmissionRecord, CodeDefinition, DatasetSplit};
use crate::encoders::{EncoderVariant, PretrainedVectors, Vocabs};
use crate::error::{Error, Result};
use crate::evaluation::{micro_auc, micro_f1, tune_threshold};
use crate::model::{label_matrix, AttentionModel, Dropout};
use crate::numerics::{AdamState, Rng};

/// One row of the training log. Epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss: eval mode at epoch 0, else the running mean of
    /// the minibatch losses (with dropout).
    pub train_loss: f64,
    /// Validation F1 at `threshold`, the grid threshold tuned on validation.
    /// NaN without a validation split.
    pub val_f1: f64,
    /// NaN when validation labels are all one class.
    pub val_auc: f64,
    pub threshold: f64,
}

pub struct TrainOutcome {
    /// The epoch with the best validation F1 (earliest on ties), or the last
    /// epoch when there is no validation split.
    pub checkpoint: ModelCheckpoint,
    pub log: Vec<EpochLog>,
}

/// Vocabularies from the training records plus every code title.
pub fn build_vocabs(variant: EncoderVariant, train: &[AdmissionRecord], codes: &[CodeDefinition]) -> Vocabs {
    Vocabs {
        chars: build_char_vocab(train, codes),
        words: build_word_vocab(train, codes, variant.lowercase()),
    }
}

/// CSV text of a training log.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_f1,val_auc,threshold\n");
    for r in log {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_f1, r.val_auc, r.threshold
        )
        .expect("write to string");
    }
    out
}

fn validation_metrics(model: &AttentionModel<f64>, val: &[AdmissionRecord]) -> Result<(f64, f64, f64)> {
    if val.is_empty() {
        return Ok((f64::NAN, f64::NAN, 0.5));
    }
    let scores = model.predict_all(val)?;
    let labels = label_matrix(val, model.codes());
    let t = tune_threshold(&scores, &labels)?;
    let f1 = micro_f1(&scores, &labels, t)?.micro_f1;
    let auc = match micro_auc(&scores, &labels) {
        Ok(a) => a,
        Err(Error::DegenerateLabels) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok((f1, auc, t))
}

pub fn train(
    config: &TrainConfig,
    splits: &DatasetSplit,
    codes: &[CodeDefinition],
    pretrained: Option<&PretrainedVectors>,
) -> Result<TrainOutcome> {
    train_with_observer(config, splits, codes, pretrained, |_, _| ControlFlow::Continue(()))
}

/// [`train`], calling `observer` after every epoch (including epoch 0);
/// returning `Break` stops after that epoch.
pub fn train_with_observer(
    config: &TrainConfig,
    splits: &DatasetSplit,
    codes: &[CodeDefinition],
    pretrained: Option<&PretrainedVectors>,
    mut observer: impl FnMut(&EpochLog, &AttentionModel<f64>) -> ControlFlow<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if splits.train.is_empty() {
        return Err(Error::Empty("empty training split"));
    }
    let mut rng = Rng::new(config.seed);
    let mut init_rng = rng.fork();
    let mut order_rng = rng.fork();

    let vocabs = build_vocabs(config.encoder, &splits.train, codes);
    let mut model =
        AttentionModel::<f64>::new(config.model_config(), vocabs, codes.to_vec(), pretrained, &mut init_rng)?;
    let shapes: Vec<usize> = model.params.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut adam = AdamState::new(config.adam_config(), &shapes);

    let all: Vec<&AdmissionRecord> = splits.train.iter().collect();
    let mut initial = 0.0;
    for chunk in all.chunks(32) {
        initial += model.batch_loss(chunk, None)? * chunk.len() as f64;
    }
    let (f1, auc, t) = validation_metrics(&model, &splits.validation)?;
    let mut log = vec![EpochLog {
        epoch: 0,
        train_loss: initial / all.len() as f64,
        val_f1: f1,
        val_auc: auc,
        threshold: t,
    }];
    log::info!("epoch 0: loss {:.5} val f1 {f1:.4} auc {auc:.4}", log[0].train_loss);
    let mut best = ModelCheckpoint {
        config: config.clone(),
        model: model.clone(),
        adam: adam.clone(),
        epoch: 0,
        threshold: t,
    };
    let mut best_f1 = f1;
    if observer(&log[0], &model).is_break() {
        return Ok(TrainOutcome { checkpoint: best, log });
    }

    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    for epoch in 1..=config.epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&AdmissionRecord> = idx.iter().map(|&i| &splits.train[i]).collect();
            let dropout = Dropout {
                p: config.dropout,
                seed: order_rng.next_u64(),
            };
            let (loss, mut grads) = model.loss_and_grad(&batch, Some(dropout))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::InvalidParam(format!("training diverged at epoch {epoch}")));
            }
            if let Some(max) = config.max_grad_norm {
                let norm = grads.squared_norm().sqrt();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            total += loss * batch.len() as f64;
            let g = grads.tensors();
            let g: Vec<&[f64]> = g.iter().map(|(_, t)| *t).collect();
            let mut p = model.params.tensors_mut();
            let mut p: Vec<&mut [f64]> = p.iter_mut().map(|(_, t)| &mut **t).collect();
            adam.step(&mut p, &g)?;
        }
        let (f1, auc, t) = validation_metrics(&model, &splits.validation)?;
        let row = EpochLog {
            epoch,
            train_loss: total / splits.train.len() as f64,
            val_f1: f1,
            val_auc: auc,
            threshold: t,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} val f1 {f1:.4} auc {auc:.4} t {t}",
            row.train_loss
        );
        let improved = if splits.validation.is_empty() {
            true
        } else {
            f1 > best_f1 || best_f1.is_nan()
        };
        if improved {
            best_f1 = f1;
            best = ModelCheckpoint {
                config: config.clone(),
                model: model.clone(),
                adam: adam.clone(),
                epoch,
                threshold: t,
            };
        }
        let flow = observer(&row, &model);
        log.push(row);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainOutcome { checkpoint: best, log })
}
