//! Loss, dropout, the minibatch Adam loop, checkpoints and gradient checks.

mod checkpoint;
mod gradcheck;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::encoders::EncoderVariant;
use crate::error::{Error, Result};
use crate::matcher::{Head, ScoreKind};
use crate::model::ModelConfig;
use crate::numerics::AdamConfig;

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{apply_dropout, bce_loss, DropoutMode, PROB_CLIP};
pub(crate) use loss::{bce_terms, dropout_mask};
pub use trainer::{build_vocabs, log_csv, train, train_with_observer, EpochLog, TrainOutcome};

pub const DEFAULT_EPOCHS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub char_embed_dim: usize,
    pub word_embed_dim: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub head: Head,
    pub encoder: EncoderVariant,
    pub score: ScoreKind,
    pub proj_bias: bool,
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 10,
            hidden_dim: 200,
            char_embed_dim: 50,
            word_embed_dim: 200,
            dropout: 0.5,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            head: Head::Soft,
            encoder: EncoderVariant::CharLstm,
            score: ScoreKind::Dot,
            proj_bias: false,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.hidden_dim == 0 || self.char_embed_dim == 0 || self.word_embed_dim == 0 {
            return bad("batch size and dimensions must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0) {
                return bad(format!("max gradient norm must be positive, got {g}"));
            }
        }
        Ok(())
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            head: self.head,
            encoder: self.encoder,
            score: self.score,
            hidden_dim: self.hidden_dim,
            char_embed_dim: self.char_embed_dim,
            word_embed_dim: self.word_embed_dim,
            proj_bias: self.proj_bias,
        }
    }
}
