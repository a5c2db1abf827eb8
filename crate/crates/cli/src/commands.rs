use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use icd_attn::analysis::{attention_table, nearest_neighbors, render_neighbors, run_ablation_suite_with, Granularity};
use icd_attn::corpus::{
    extract_descriptions, generate_synthetic_corpus, pretrained_vectors_text, read_code_table, read_input_lines,
    read_records, read_splits_manifest, restrict_to_codes, select_top_codes, split_dataset, write_code_table,
    write_records, write_splits_manifest, AdmissionRecord, CodeDefinition, DatasetSplit, InputLine, NoiseParams,
    SplitsManifest,
};
use icd_attn::encoders::{load_pretrained_vectors, EncoderVariant};
use icd_attn::evaluation::{
    evaluate, micro_auc, micro_f1_per_code, tune_per_code_thresholds, tune_threshold, EvalReport,
};
use icd_attn::matcher::Head;
use icd_attn::model::{assign_codes, label_matrix};
use icd_attn::numerics::Rng;
use icd_attn::training::{load_checkpoint, log_csv, save_checkpoint, train, ModelCheckpoint};
use icd_attn::Error;
use serde::Serialize;

use crate::args::{
    AblateArgs, AttnTableArgs, EvalArgs, ExtractArgs, NeighborsArgs, PredictArgs, SplitArg, SynthArgs, TrainArgs,
};
use crate::failure::{CliResult, Failure};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const CODES_FILE: &str = "codes.tsv";
pub const SPLITS_FILE: &str = "splits.json";
pub const VECTORS_FILE: &str = "pretrained.txt";

/// Split used when a data directory has no manifest.
const DEFAULT_SPLIT: (f64, f64, f64) = (0.7, 0.15, 0.15);

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn check_threshold(t: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(Failure::usage(format!("threshold must be in [0, 1], got {t}")))
    }
}

/// Records from a JSONL of notes and/or records. Notes are extracted on the
/// way in; anything left without descriptions is dropped.
fn records_from_lines(lines: Vec<InputLine>) -> (Vec<AdmissionRecord>, usize) {
    let mut kept = Vec::new();
    let mut discarded = 0;
    for line in lines {
        let record = match line {
            InputLine::Record(mut r) => {
                r.descriptions = r
                    .descriptions
                    .iter()
                    .map(|d| d.trim().to_string())
                    .filter(|d| !d.is_empty())
                    .collect();
                r
            }
            InputLine::Note(n) => AdmissionRecord {
                descriptions: extract_descriptions(&n.text),
                hadm_id: n.hadm_id,
                codes: n.codes.unwrap_or_default(),
            },
        };
        if record.descriptions.is_empty() {
            discarded += 1;
        } else {
            kept.push(record);
        }
    }
    (kept, discarded)
}

fn load_input_records(path: &Path) -> CliResult<Vec<AdmissionRecord>> {
    let read = read_input_lines(path, true)?;
    let (records, discarded) = records_from_lines(read.items);
    if discarded > 0 {
        log::warn!("{discarded} input line(s) had no diagnosis descriptions and were skipped");
    }
    Ok(records)
}

pub fn extract(a: &ExtractArgs) -> CliResult {
    let read = read_input_lines(&a.notes, a.strict)?;
    let (mut records, discarded) = records_from_lines(read.items);
    if let (Some(k), Some(table)) = (a.top_codes, &a.code_table) {
        let top = select_top_codes(&records, &read_code_table(table)?, k)?;
        let before = records.len();
        records = restrict_to_codes(records, &top, a.drop_unlabeled);
        if let Some(path) = &a.codes_out {
            write_code_table(path, &top)?;
        }
        println!(
            "kept the {k} most frequent codes; {} records left without a gold code were dropped",
            before - records.len()
        );
    }
    write_records(&a.out, &records)?;
    println!(
        "kept {} records, discarded {} without diagnosis descriptions, skipped {} malformed lines",
        records.len(),
        discarded,
        read.skipped.len()
    );
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult {
    let fractions = (a.split[0], a.split[1], a.split[2]);
    let noise = NoiseParams::from_typo_rate(a.typo_rate)?;
    let mut rng = Rng::new(a.seed);
    let corpus = generate_synthetic_corpus(a.codes, a.records, &noise, &mut rng)?;
    let splits = split_dataset(&corpus.records, fractions, &mut rng)?;
    if a.vector_dim == 0 {
        return Err(Failure::usage("--vector-dim must be positive"));
    }
    let vectors = pretrained_vectors_text(a.vector_dim, &mut rng);
    fs::create_dir_all(&a.out).map_err(|e| Failure::data(format!("{}: {e}", a.out.display())))?;
    write_records(&a.out.join(RECORDS_FILE), &corpus.records)?;
    write_code_table(&a.out.join(CODES_FILE), &corpus.codes)?;
    write_splits_manifest(&a.out.join(SPLITS_FILE), &SplitsManifest::from_split(&splits))?;
    write_file(&a.out.join(VECTORS_FILE), &vectors)?;
    println!(
        "wrote {} records over {} codes to {} (train {}, validation {}, test {})",
        corpus.records.len(),
        corpus.codes.len(),
        a.out.display(),
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    Ok(())
}

/// Code table and splits of a data directory. Without a manifest the
/// records are split 70/15/15 with `seed`.
fn load_data(dir: &Path, seed: u64) -> CliResult<(Vec<CodeDefinition>, DatasetSplit)> {
    if !dir.is_dir() {
        return Err(Failure::data(format!("data directory {} not found", dir.display())));
    }
    let codes = read_code_table(&dir.join(CODES_FILE))?;
    let records = read_records(&dir.join(RECORDS_FILE))?;
    let manifest = dir.join(SPLITS_FILE);
    let splits = if manifest.exists() {
        read_splits_manifest(&manifest)?.apply(&records)?
    } else {
        split_dataset(&records, DEFAULT_SPLIT, &mut Rng::new(seed))?
    };
    Ok((codes, splits))
}

fn default_log_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".log.csv");
    PathBuf::from(s)
}

pub fn train_cmd(a: &TrainArgs) -> CliResult {
    let encoder = EncoderVariant::from(a.encoder);
    if encoder == EncoderVariant::WordEmbedPretrained && a.pretrained.is_none() {
        return Err(Failure::usage(
            "--encoder word-embed-pretrained requires --pretrained <path>",
        ));
    }
    let config = a.flags.config(a.head.into(), encoder);
    config.validate()?;
    let (codes, splits) = load_data(&a.flags.data, a.flags.seed)?;
    let vectors = match (&a.pretrained, encoder) {
        (Some(p), EncoderVariant::WordEmbedPretrained) => Some(load_pretrained_vectors(p)?),
        (Some(_), _) => {
            log::warn!("--pretrained is only used by --encoder word-embed-pretrained");
            None
        }
        _ => None,
    };
    let outcome = train(&config, &splits, &codes, vectors.as_ref())?;
    save_checkpoint(&outcome.checkpoint, &a.out)?;
    let log_path = a.log.clone().unwrap_or_else(|| default_log_path(&a.out));
    write_file(&log_path, &log_csv(&outcome.log))?;
    let best = &outcome.log[outcome.checkpoint.epoch];
    println!(
        "best epoch {}: validation f1 {:.4}, auc {:.4}, threshold {:.2}; checkpoint {}",
        best.epoch,
        best.val_f1,
        best.val_auc,
        best.threshold,
        a.out.display()
    );
    Ok(())
}

fn split_of(splits: &DatasetSplit, s: SplitArg) -> &[AdmissionRecord] {
    match s {
        SplitArg::Train => &splits.train,
        SplitArg::Validation => &splits.validation,
        SplitArg::Test => &splits.test,
    }
}

/// An evaluation report with the per-code thresholds that produced it.
#[derive(Serialize)]
struct PerCodeReport<'a> {
    #[serde(flatten)]
    report: EvalReport,
    thresholds: BTreeMap<&'a str, f64>,
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let (_, splits) = load_data(&a.data, ckpt.config.seed)?;
    let model = &ckpt.model;
    if a.per_code_threshold {
        return eval_per_code(model, &splits, a.split);
    }
    let threshold = if a.tune_threshold {
        if splits.validation.is_empty() {
            return Err(Failure::data("--tune-threshold needs a non-empty validation split"));
        }
        let scores = model.predict_all(&splits.validation)?;
        tune_threshold(&scores, &label_matrix(&splits.validation, model.codes()))?
    } else {
        check_threshold(a.threshold.unwrap_or(ckpt.threshold))?
    };
    let records = split_of(&splits, a.split);
    if records.is_empty() {
        return Err(Failure::data("the requested split is empty"));
    }
    let scores = model.predict_all(records)?;
    let report = evaluate(&scores, &label_matrix(records, model.codes()), threshold)?;
    if report.micro_auc.is_none() {
        return Err(Error::DegenerateLabels.into());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eval_per_code(model: &icd_attn::Model, splits: &DatasetSplit, split: SplitArg) -> CliResult {
    if splits.validation.is_empty() {
        return Err(Failure::data("--per-code-threshold needs a non-empty validation split"));
    }
    let val_scores = model.predict_all(&splits.validation)?;
    let thresholds = tune_per_code_thresholds(&val_scores, &label_matrix(&splits.validation, model.codes()))?;
    let records = split_of(splits, split);
    if records.is_empty() {
        return Err(Failure::data("the requested split is empty"));
    }
    let scores = model.predict_all(records)?;
    let labels = label_matrix(records, model.codes());
    let mut report = micro_f1_per_code(&scores, &labels, &thresholds)?;
    report.micro_auc = Some(micro_auc(&scores, &labels)?);
    let out = PerCodeReport {
        report,
        thresholds: model.codes().iter().map(|c| c.code.as_str()).zip(thresholds).collect(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    hadm_id: &'a str,
    probabilities: BTreeMap<&'a str, f64>,
    assigned: Vec<&'a str>,
}

pub fn predict(a: &PredictArgs) -> CliResult {
    if let Some(t) = a.threshold {
        check_threshold(t)?;
    }
    let ckpt = load_checkpoint(&a.ckpt)?;
    let threshold = a.threshold.unwrap_or(ckpt.threshold);
    let records = load_input_records(&a.input)?;
    let scores = ckpt.model.predict_all(&records)?;
    let codes = ckpt.model.codes();
    let mut out = String::new();
    for (r, p) in records.iter().zip(&scores) {
        let line = PredictionLine {
            hadm_id: &r.hadm_id,
            probabilities: codes.iter().zip(p).map(|(c, &x)| (c.code.as_str(), x)).collect(),
            assigned: assign_codes(codes, p, threshold),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    match &a.out {
        Some(path) => write_file(path, &out),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| Failure::data(format!("stdout: {e}"))),
    }
}

fn model_of(path: &Path) -> CliResult<ModelCheckpoint> {
    Ok(load_checkpoint(path)?)
}

pub fn neighbors(a: &NeighborsArgs) -> CliResult {
    let ckpt = model_of(&a.ckpt)?;
    let model = &ckpt.model;
    let level = Granularity::from(a.level);
    let candidates: Vec<String> = match &a.candidates {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None if level == Granularity::Word => model.vocabs.words.symbols().to_vec(),
        None => model.codes().iter().map(|c| c.long_title.clone()).collect(),
    };
    let found = nearest_neighbors(&a.query, &candidates, &model.params.desc, &model.vocabs, level, a.k)?;
    print!("{}", render_neighbors(&a.query, &found, a.format.into()));
    Ok(())
}

pub fn attn_table(a: &AttnTableArgs) -> CliResult {
    let ckpt = model_of(&a.ckpt)?;
    let records = load_input_records(&a.records)?;
    let record = match &a.hadm_id {
        Some(id) => records
            .iter()
            .find(|r| &r.hadm_id == id)
            .ok_or_else(|| Failure::data(format!("no record with hadm_id {id}")))?,
        None => records.first().ok_or_else(|| Failure::data("no records in input"))?,
    };
    if ckpt.model.config.head == Head::Linear {
        return Err(Failure::usage(
            "the checkpoint uses the linear head, which has no attention",
        ));
    }
    let table = attention_table(&ckpt.model, record)?;
    print!("{}", table.render(a.format.into()));
    Ok(())
}

pub fn ablate(a: &AblateArgs) -> CliResult {
    let base = a.flags.config(Head::Soft, EncoderVariant::CharLstm);
    base.validate()?;
    let vectors_path = a.pretrained.clone().unwrap_or_else(|| a.flags.data.join(VECTORS_FILE));
    let (codes, splits) = load_data(&a.flags.data, a.flags.seed)?;
    if !vectors_path.exists() {
        return Err(Failure::usage(format!(
            "the pretrained-embedding row needs word vectors: {} not found (pass --pretrained)",
            vectors_path.display()
        )));
    }
    let vectors = load_pretrained_vectors(&vectors_path)?;
    let table = run_ablation_suite_with(&base, &splits, &codes, &vectors, |row| {
        eprintln!("{}: f1 {:.3} auc {:.3}", row.label, row.f1, row.auc);
    })?;
    let rendered = table.render(a.format.into());
    print!("{rendered}");
    if let Some(path) = &a.out {
        write_file(path, &rendered)?;
    }
    Ok(())
}
