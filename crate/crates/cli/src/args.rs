use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icd_attn::analysis::{Granularity, TableFormat};
use icd_attn::encoders::EncoderVariant;
use icd_attn::matcher::{Head, ScoreKind};
use icd_attn::training::{TrainConfig, DEFAULT_EPOCHS};

#[derive(Debug, Parser)]
#[command(
    name = "icd-attn",
    version,
    about = "Match diagnosis descriptions from discharge summaries to ICD codes",
    after_help = "Exit status: 0 success, 1 usage error, 2 data error, 3 internal error.\n\
                  ICD_ATTN_THREADS caps the number of worker threads."
)]
pub struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract diagnosis descriptions from discharge notes (JSONL in, JSONL out).
    Extract(ExtractArgs),
    /// Generate a synthetic corpus directory.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus a CSV log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a data split and print the report as JSON.
    Eval(EvalArgs),
    /// Print per-code probabilities and assigned codes for each record.
    Predict(PredictArgs),
    /// Nearest words or phrases in the description encoder's space.
    Neighbors(NeighborsArgs),
    /// Code-by-description attention table for one record.
    AttnTable(AttnTableArgs),
    /// Train and test the six architecture variants under one seed.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Notes as JSONL: {"hadm_id", "text"} or pre-extracted {"hadm_id", "descriptions", "codes"}.
    #[arg(long)]
    pub notes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Code table (TSV `code<TAB>long_title`) for --top-codes.
    #[arg(long, requires = "top_codes")]
    pub code_table: Option<PathBuf>,
    /// Keep only the K most frequent codes in every gold set.
    #[arg(long, value_name = "K", requires = "code_table")]
    pub top_codes: Option<usize>,
    /// With --top-codes, also drop records left without any gold code.
    #[arg(long, requires = "top_codes")]
    pub drop_unlabeled: bool,
    /// With --top-codes, write the selected code table here.
    #[arg(long, requires = "top_codes")]
    pub codes_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub codes: usize,
    #[arg(long)]
    pub records: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-letter typo rate; the other noise rates scale with it.
    #[arg(long, default_value_t = 0.0)]
    pub typo_rate: f64,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.15, 0.15])]
    pub split: Vec<f64>,
    /// Dimension of the companion pretrained word vectors.
    #[arg(long, default_value_t = 200)]
    pub vector_dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Hard,
    Soft,
    Linear,
}

impl From<HeadArg> for Head {
    fn from(h: HeadArg) -> Head {
        match h {
            HeadArg::Hard => Head::Hard,
            HeadArg::Soft => Head::Soft,
            HeadArg::Linear => Head::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    CharLstm,
    #[value(alias = "word-embed-random")]
    WordEmbed,
    WordEmbedPretrained,
    #[value(alias = "avg-pool")]
    Avg,
}

impl From<EncoderArg> for EncoderVariant {
    fn from(e: EncoderArg) -> EncoderVariant {
        match e {
            EncoderArg::CharLstm => EncoderVariant::CharLstm,
            EncoderArg::WordEmbed => EncoderVariant::WordEmbedRandom,
            EncoderArg::WordEmbedPretrained => EncoderVariant::WordEmbedPretrained,
            EncoderArg::Avg => EncoderVariant::AvgPool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Dot,
    Cosine,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> ScoreKind {
        match s {
            ScoreArg::Dot => ScoreKind::Dot,
            ScoreArg::Cosine => ScoreKind::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Tsv,
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> TableFormat {
        match f {
            FormatArg::Text => TableFormat::Text,
            FormatArg::Tsv => TableFormat::Tsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Word,
    Sentence,
}

impl From<LevelArg> for Granularity {
    fn from(l: LevelArg) -> Granularity {
        match l {
            LevelArg::Word => Granularity::Word,
            LevelArg::Sentence => Granularity::Sentence,
        }
    }
}

/// Data directory plus every training hyperparameter.
#[derive(Debug, Args)]
pub struct TrainingFlags {
    /// Directory with records.jsonl, codes.tsv and optionally splits.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    #[arg(long, default_value_t = 200)]
    pub hidden: usize,
    #[arg(long, default_value_t = 50)]
    pub char_embed: usize,
    #[arg(long, default_value_t = 200)]
    pub word_embed: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, value_enum, default_value_t = ScoreArg::Dot)]
    pub score: ScoreArg,
    /// Add a per-code bias to the output layer.
    #[arg(long)]
    pub proj_bias: bool,
    /// Rescale minibatch gradients whose global norm exceeds this.
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
}

impl TrainingFlags {
    pub fn config(&self, head: Head, encoder: EncoderVariant) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch,
            hidden_dim: self.hidden,
            char_embed_dim: self.char_embed,
            word_embed_dim: self.word_embed,
            dropout: self.dropout,
            epochs: self.epochs,
            seed: self.seed,
            head,
            encoder,
            score: self.score.into(),
            proj_bias: self.proj_bias,
            max_grad_norm: self.max_grad_norm,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainingFlags,
    #[arg(long, value_enum, default_value_t = HeadArg::Soft)]
    pub head: HeadArg,
    #[arg(long, value_enum, default_value_t = EncoderArg::CharLstm)]
    pub encoder: EncoderArg,
    /// Word vectors in text format; required by --encoder word-embed-pretrained.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV (default: the checkpoint path with .log.csv appended).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Tune the threshold on the validation split first.
    #[arg(long, conflicts_with = "threshold")]
    pub tune_threshold: bool,
    /// Fixed threshold (default: the one stored in the checkpoint).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Tune one threshold per code on the validation split instead of a global one.
    #[arg(long, conflicts_with_all = ["threshold", "tune_threshold"])]
    pub per_code_threshold: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Records or raw notes as JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Assign codes with probability at least this (default: the checkpoint's).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Write JSONL here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub query: String,
    /// One candidate per line (default: vocabulary words, or code titles at sentence level).
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LevelArg::Word)]
    pub level: LevelArg,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct AttnTableArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Records or raw notes as JSONL.
    #[arg(long)]
    pub records: PathBuf,
    /// Record to show (default: the first).
    #[arg(long)]
    pub hadm_id: Option<String>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub flags: TrainingFlags,
    /// Word vectors for the pretrained row (default: <data>/pretrained.txt).
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
