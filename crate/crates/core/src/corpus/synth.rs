//! Synthetic admissions for desk-scale experiments.
//!
//! Code titles are `[Modifier] site condition[ qualifier]` built from a small
//! word bank. Each record draws 1-4 gold codes (rarer codes less often) and
//! writes one description per code: a copy of the title passed through
//! synonym swaps, abbreviations, case flips and character typos. Some records
//! are combinations, where one title is split across two descriptions or two
//! titles are merged into one, and some carry an unrelated extra description.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{AdmissionRecord, CodeDefinition};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Per-event noise probabilities. All zero reproduces code titles verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Per-letter chance of an insert, delete or substitute.
    pub typo: f64,
    /// Per-word chance of swapping in a synonym (when one exists).
    pub synonym: f64,
    /// Per-word chance of abbreviating (when an abbreviation exists).
    pub abbreviation: f64,
    /// Per-word chance of a case change.
    pub case_flip: f64,
    /// Per-record chance of a split or merged description.
    pub combination: f64,
    /// Per-record chance of an extra description unrelated to any code.
    pub distractor: f64,
}

impl NoiseParams {
    pub fn clean() -> Self {
        Self {
            typo: 0.0,
            synonym: 0.0,
            abbreviation: 0.0,
            case_flip: 0.0,
            combination: 0.0,
            distractor: 0.0,
        }
    }

    /// Scales every rate from a single typo rate `r`: word-level noise at
    /// `2r`, record-level events at `4r`, each capped at 1.
    pub fn from_typo_rate(r: f64) -> Result<Self> {
        let p = Self {
            typo: r,
            synonym: (2.0 * r).min(1.0),
            abbreviation: (2.0 * r).min(1.0),
            case_flip: (2.0 * r).min(1.0),
            combination: (4.0 * r).min(1.0),
            distractor: (4.0 * r).min(1.0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("typo", self.typo),
            ("synonym", self.synonym),
            ("abbreviation", self.abbreviation),
            ("case_flip", self.case_flip),
            ("combination", self.combination),
            ("distractor", self.distractor),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} rate must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<AdmissionRecord>,
    pub codes: Vec<CodeDefinition>,
}

const MODIFIERS: &[&str] = &[
    "Acute",
    "Chronic",
    "Malignant",
    "Benign",
    "Congenital",
    "Recurrent",
    "Primary",
    "Secondary",
    "Severe",
    "Mild",
];

const SITES: &[&str] = &[
    "cardiac",
    "renal",
    "hepatic",
    "pulmonary",
    "cerebral",
    "gastric",
    "thyroid",
    "pancreatic",
    "splenic",
    "vascular",
    "biliary",
    "urinary",
    "spinal",
    "esophageal",
    "adrenal",
    "intestinal",
    "coronary",
    "bronchial",
    "retinal",
    "cutaneous",
];

const CONDITIONS: &[&str] = &[
    "failure",
    "insufficiency",
    "stenosis",
    "hemorrhage",
    "infarction",
    "ischemia",
    "embolism",
    "neoplasm",
    "infection",
    "obstruction",
    "hypertrophy",
    "fibrosis",
    "inflammation",
    "ulcer",
    "edema",
    "calculus",
    "dysplasia",
    "abscess",
];

const QUALIFIERS: &[&str] = &[
    ", unspecified",
    " with hemorrhage",
    " without mention of complication",
    " of newborn",
    " in remission",
    " with acute exacerbation",
];

const DISTRACTORS: &[&str] = &[
    "Status post fall",
    "History of tobacco use",
    "Hypokalemia",
    "Anxiety",
    "Constipation",
    "Obesity",
    "Insomnia",
    "Hyponatremia",
    "Deconditioning",
    "Chronic back pain",
];

/// (canonical lowercase word, synonyms, abbreviation)
const LEXICON: &[(&str, &[&str], Option<&str>)] = &[
    ("acute", &[], Some("ac")),
    ("chronic", &["longstanding"], Some("chr")),
    ("malignant", &[], Some("malig")),
    ("congenital", &[], Some("cong")),
    ("recurrent", &["recurring"], Some("recur")),
    ("secondary", &[], Some("sec")),
    ("severe", &["significant"], None),
    ("cardiac", &["heart"], Some("card")),
    ("renal", &["kidney"], None),
    ("hepatic", &["liver"], Some("hep")),
    ("pulmonary", &["lung"], Some("pulm")),
    ("cerebral", &["brain"], None),
    ("gastric", &["stomach"], Some("gast")),
    ("vascular", &["vessel"], Some("vasc")),
    ("urinary", &["bladder"], None),
    ("esophageal", &[], Some("esoph")),
    ("intestinal", &["bowel"], Some("intest")),
    ("coronary", &[], Some("cor")),
    ("cutaneous", &["skin"], None),
    ("insufficiency", &["incompetence"], Some("insuff")),
    ("hemorrhage", &["bleeding", "bleed"], Some("hem")),
    ("infarction", &["infarct"], None),
    ("embolism", &["embolus"], None),
    ("neoplasm", &["tumor", "mass"], None),
    ("obstruction", &["blockage"], Some("obstr")),
    ("hypertrophy", &[], Some("hypertr")),
    ("inflammation", &[], Some("inflamm")),
    ("ulcer", &["ulceration"], None),
    ("edema", &["swelling"], None),
    ("calculus", &["stone"], None),
    ("unspecified", &["NOS"], Some("unsp")),
    ("with", &[], Some("w/")),
    ("without", &[], Some("w/o")),
    ("complication", &["complications"], None),
    ("exacerbation", &["flare"], Some("exac")),
];

fn lexicon_entry(word: &str) -> Option<&'static (&'static str, &'static [&'static str], Option<&'static str>)> {
    let lower = word.to_lowercase();
    LEXICON.iter().find(|(w, _, _)| *w == lower)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Applies per-letter typos to `text`, returning the new text and the number
/// of mutations. Non-letters are never touched and no word is deleted
/// entirely.
pub fn typo(text: &str, rate: f64, rng: &mut Rng) -> (String, usize) {
    let mut count = 0;
    let words: Vec<String> = text
        .split(' ')
        .map(|w| {
            if rate == 0.0 {
                return w.to_string();
            }
            let mut out = String::new();
            let mut n = 0;
            let letters = w.chars().filter(|c| c.is_alphabetic()).count();
            let mut deleted = 0;
            for ch in w.chars() {
                if !ch.is_alphabetic() || !rng.chance(rate) {
                    out.push(ch);
                    continue;
                }
                let random_letter = (b'a' + rng.below(26) as u8) as char;
                match rng.below(3) {
                    0 => {
                        out.push(ch);
                        out.push(random_letter);
                        n += 1;
                    }
                    1 if deleted + 1 < letters => {
                        deleted += 1;
                        n += 1;
                    }
                    _ => {
                        let lower = ch.to_ascii_lowercase();
                        let sub = if random_letter == lower {
                            (b'a' + (lower as u8 - b'a' + 1) % 26) as char
                        } else {
                            random_letter
                        };
                        out.push(sub);
                        n += 1;
                    }
                }
            }
            count += n;
            out
        })
        .collect();
    (words.join(" "), count)
}

fn flip_case(word: &str, rng: &mut Rng) -> String {
    match rng.below(3) {
        0 => word.to_lowercase(),
        1 => word.to_uppercase(),
        _ => {
            let mut c = word.chars();
            match c.next() {
                Some(f) if f.is_uppercase() => f.to_lowercase().chain(c).collect(),
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        }
    }
}

/// A noisy rewrite of `title`.
fn describe(title: &str, noise: &NoiseParams, rng: &mut Rng) -> String {
    let mut words: Vec<String> = Vec::new();
    for (i, w) in title.split(' ').enumerate() {
        let (core, comma) = match w.strip_suffix(',') {
            Some(c) => (c, ","),
            None => (w, ""),
        };
        let mut word = core.to_string();
        if let Some((_, syns, abbr)) = lexicon_entry(core) {
            if !syns.is_empty() && rng.chance(noise.synonym) {
                word = syns[rng.below(syns.len())].to_string();
            } else if let Some(a) = abbr {
                if rng.chance(noise.abbreviation) {
                    word = a.to_string();
                }
            }
            if i == 0 && word != core {
                word = capitalize(&word);
            }
        }
        if rng.chance(noise.case_flip) {
            word = flip_case(&word, rng);
        }
        words.push(word + comma);
    }
    let joined = words.join(" ");
    typo(&joined, noise.typo, rng).0
}

fn make_code(rng: &mut Rng, used: &mut HashSet<String>) -> String {
    loop {
        let c = if rng.below(8) == 0 {
            format!("V{:02}{}", rng.below(100), rng.below(10))
        } else {
            format!("{:03}{}", rng.below(1000), rng.below(10))
        };
        if used.insert(c.clone()) {
            return c;
        }
    }
}

fn make_titles(n: usize, rng: &mut Rng) -> Vec<String> {
    let mut pairs: Vec<(usize, usize)> = (0..SITES.len())
        .flat_map(|s| (0..CONDITIONS.len()).map(move |c| (s, c)))
        .collect();
    rng.shuffle(&mut pairs);
    pairs[..n]
        .iter()
        .map(|&(s, c)| {
            let mut t = String::new();
            if rng.chance(0.5) {
                t.push_str(MODIFIERS[rng.below(MODIFIERS.len())]);
                t.push(' ');
                t.push_str(SITES[s]);
            } else {
                t.push_str(&capitalize(SITES[s]));
            }
            t.push(' ');
            t.push_str(CONDITIONS[c]);
            if rng.chance(0.35) {
                t.push_str(QUALIFIERS[rng.below(QUALIFIERS.len())]);
            }
            t
        })
        .collect()
}

/// Largest supported code count (distinct site/condition pairs).
pub const MAX_SYNTH_CODES: usize = 360;

/// Generates `n_records` admissions over `n_codes` synthetic codes. The code
/// table is ordered by intended frequency, and record `i < n_codes` always
/// carries code `i` so every code occurs.
pub fn generate_synthetic_corpus(
    n_codes: usize,
    n_records: usize,
    noise: &NoiseParams,
    rng: &mut Rng,
) -> Result<SyntheticCorpus> {
    if n_codes < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 codes, got {n_codes}")));
    }
    if n_codes > MAX_SYNTH_CODES {
        return Err(Error::InvalidParam(format!(
            "at most {MAX_SYNTH_CODES} synthetic codes are supported, got {n_codes}"
        )));
    }
    if n_records < n_codes {
        return Err(Error::InvalidParam(format!(
            "need at least as many records as codes ({n_records} < {n_codes})"
        )));
    }
    noise.validate()?;

    let titles = make_titles(n_codes, rng);
    let mut used = HashSet::new();
    let codes: Vec<CodeDefinition> = titles
        .into_iter()
        .map(|t| CodeDefinition::new(make_code(rng, &mut used), t))
        .collect();
    let zipf: Vec<f64> = (0..n_codes).map(|i| 1.0 / (i as f64 + 1.0).powf(0.8)).collect();
    let k_weights = [0.4, 0.3, 0.2, 0.1];

    let mut records = Vec::with_capacity(n_records);
    for r in 0..n_records {
        let k = (rng.weighted(&k_weights) + 1).min(n_codes);
        let mut gold: Vec<usize> = Vec::with_capacity(k);
        if r < n_codes {
            gold.push(r);
        }
        while gold.len() < k {
            let mut w = zipf.clone();
            for &g in &gold {
                w[g] = 0.0;
            }
            gold.push(rng.weighted(&w));
        }

        let mut descs: Vec<String> = gold
            .iter()
            .map(|&g| describe(&codes[g].long_title, noise, rng))
            .collect();
        if rng.chance(noise.combination) {
            let merge = descs.len() >= 2 && rng.chance(0.5);
            if merge {
                let b = descs.pop().unwrap();
                let a = descs.pop().unwrap();
                descs.push(format!("{a} with {}", lower_first(&b)));
            } else {
                let i = rng.below(descs.len());
                let words: Vec<&str> = descs[i].split(' ').collect();
                if words.len() >= 2 {
                    let cut = 1 + rng.below(words.len() - 1);
                    let (head, tail) = (words[..cut].join(" "), words[cut..].join(" "));
                    let head = head.trim_end_matches(',').to_string();
                    descs[i] = head;
                    descs.push(capitalize(&tail));
                }
            }
        }
        if rng.chance(noise.distractor) {
            let d = DISTRACTORS[rng.below(DISTRACTORS.len())];
            descs.push(typo(d, noise.typo, rng).0);
        }
        descs.retain(|d| !d.trim().is_empty());
        rng.shuffle(&mut descs);
        records.push(AdmissionRecord {
            hadm_id: format!("{}", 100_000 + r),
            descriptions: descs,
            codes: gold.iter().map(|&g| codes[g].code.clone()).collect::<BTreeSet<_>>(),
        });
    }
    Ok(SyntheticCorpus { records, codes })
}

/// Word vectors for the synthetic word bank in the classic text format.
/// A word, its synonyms and its abbreviation share a base direction, so they
/// sit close together; other words are unrelated.
pub fn pretrained_vectors_text(dim: usize, rng: &mut Rng) -> String {
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut seen = HashSet::new();
    let mut add_group = |words: Vec<String>, groups: &mut Vec<Vec<String>>| {
        let fresh: Vec<String> = words.into_iter().filter(|w| seen.insert(w.clone())).collect();
        if !fresh.is_empty() {
            groups.push(fresh);
        }
    };
    for (w, syns, abbr) in LEXICON {
        let mut g = vec![w.to_string()];
        g.extend(syns.iter().map(|s| s.to_lowercase()));
        g.extend(abbr.iter().map(|s| s.to_lowercase()));
        add_group(g, &mut groups);
    }
    let bank = MODIFIERS
        .iter()
        .chain(SITES)
        .chain(CONDITIONS)
        .chain(QUALIFIERS)
        .chain(DISTRACTORS);
    for phrase in bank {
        for tok in super::tokenize(phrase) {
            add_group(vec![tok.to_lowercase()], &mut groups);
        }
    }

    let total: usize = groups.iter().map(Vec::len).sum();
    let mut out = format!("{total} {dim}\n");
    for g in &groups {
        let base: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for w in g {
            out.push_str(w);
            for b in &base {
                write!(out, " {:.6}", b + 0.1 * rng.normal()).unwrap();
            }
            out.push('\n');
        }
    }
    out
}
