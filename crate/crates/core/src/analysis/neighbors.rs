use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{align, flat, TableFormat};
use crate::corpus::{tokenize, CodeDefinition};
use crate::encoders::{encode_sentence, encode_word, EncoderStack, Vocabs};
use crate::error::{Error, Result};
use crate::numerics::{squared_distance, Rng, Scalar};

/// What a neighbour query compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// Word vectors (character LSTM output or embedding row).
    Word,
    /// Sentence vectors of the tokenized text.
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub text: String,
    pub distance: f64,
}

fn encode<T: Scalar>(stack: &EncoderStack<T>, vocabs: &Vocabs, g: Granularity, text: &str) -> Result<Vec<f64>> {
    let v = match g {
        Granularity::Word => encode_word(stack, vocabs, text)?,
        Granularity::Sentence => encode_sentence(stack, vocabs, &tokenize(text))?,
    };
    Ok(v.to_f64())
}

/// The `k` candidates closest to `query` in Euclidean distance, ascending.
/// Candidates spelled exactly like the query are skipped; ties keep
/// candidate order.
pub fn nearest_neighbors<T: Scalar>(
    query: &str,
    candidates: &[String],
    stack: &EncoderStack<T>,
    vocabs: &Vocabs,
    granularity: Granularity,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("no neighbour candidates"));
    }
    let q = encode(stack, vocabs, granularity, query)?;
    let mut out: Vec<Neighbor> = candidates
        .par_iter()
        .filter(|c| c.as_str() != query)
        .map(|c| {
            let v = encode(stack, vocabs, granularity, c)?;
            Ok(Neighbor {
                text: c.clone(),
                distance: squared_distance(&q, &v).sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    out.truncate(k);
    Ok(out)
}

/// Text: `rank. neighbour (distance)`. TSV: `rank`, `neighbor`, `distance`.
/// Distances carry two decimals.
pub fn render_neighbors(query: &str, neighbors: &[Neighbor], format: TableFormat) -> String {
    match format {
        TableFormat::Text => {
            let rows: Vec<Vec<String>> = neighbors
                .iter()
                .enumerate()
                .map(|(i, n)| vec![format!("{}.", i + 1), flat(&n.text), format!("({:.2})", n.distance)])
                .collect();
            format!("{}:\n{}", flat(query), align(&rows))
        }
        TableFormat::Tsv => {
            let mut out = String::from("rank\tneighbor\tdistance\n");
            for (i, n) in neighbors.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{:.2}\n", i + 1, flat(&n.text), n.distance));
            }
            out
        }
    }
}

/// One random letter edit (insert, delete or substitute) of `word`.
/// Words with fewer than two letters only get inserts or substitutions.
pub fn misspell(word: &str, rng: &mut Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return word.to_string();
    }
    let i = rng.below(chars.len());
    let letter = (b'a' + rng.below(26) as u8) as char;
    let mut out = chars.clone();
    match rng.below(3) {
        0 => out.insert(i, letter),
        1 if chars.len() >= 2 => {
            out.remove(i);
        }
        _ => {
            out[i] = if chars[i].to_ascii_lowercase() == letter {
                (b'a' + (letter as u8 - b'a' + 1) % 26) as char
            } else {
                letter
            };
        }
    }
    out.into_iter().collect()
}

/// Distinct lowercase alphabetic words of at least `min_len` letters from
/// the code titles, sorted.
pub fn probe_words(codes: &[CodeDefinition], min_len: usize) -> Vec<String> {
    codes
        .iter()
        .flat_map(|c| tokenize(&c.long_title))
        .map(|w| w.to_lowercase())
        .filter(|w| w.chars().count() >= min_len && w.chars().all(char::is_alphabetic))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypoAudit {
    pub k: usize,
    pub probes: usize,
    pub hits: usize,
    /// `(misspelling, clean word)` pairs that missed the top `k`.
    pub misses: Vec<(String, String)>,
}

impl TypoAudit {
    pub fn hit_rate(&self) -> f64 {
        if self.probes == 0 {
            0.0
        } else {
            self.hits as f64 / self.probes as f64
        }
    }
}

/// Misspells every word once and checks whether the clean spelling is among
/// the `k` nearest words. The candidate pool is `words` itself.
pub fn typo_recovery_audit<T: Scalar>(
    stack: &EncoderStack<T>,
    vocabs: &Vocabs,
    words: &[String],
    k: usize,
    rng: &mut Rng,
) -> Result<TypoAudit> {
    if words.len() < 2 {
        return Err(Error::Empty("typo audit needs at least two words"));
    }
    let pool: BTreeSet<&str> = words.iter().map(String::as_str).collect();
    let mut audit = TypoAudit {
        k,
        probes: 0,
        hits: 0,
        misses: Vec::new(),
    };
    for w in words {
        // A misspelling that collides with another real word is no typo.
        let variant = (0..32).map(|_| misspell(w, rng)).find(|v| !pool.contains(v.as_str()));
        let Some(variant) = variant else { continue };
        let found = nearest_neighbors(&variant, words, stack, vocabs, Granularity::Word, k)?;
        audit.probes += 1;
        if found.iter().any(|n| &n.text == w) {
            audit.hits += 1;
        } else {
            audit.misses.push((variant, w.clone()));
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderVariant, StackDims};
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn stack(variant: EncoderVariant, words: &[&str]) -> (EncoderStack<f64>, Vocabs) {
        let codes: Vec<CodeDefinition> = words.iter().map(|w| CodeDefinition::new("c", *w)).collect();
        let vocabs = crate::training::build_vocabs(variant, &[], &codes);
        let dims = StackDims {
            chars: vocabs.chars.len(),
            words: vocabs.words.len(),
            char_embed_dim: 3,
            word_embed_dim: 5,
            hidden_dim: 5,
        };
        let s = EncoderStack::init(variant, dims, None, &mut Rng::new(3)).unwrap();
        (s, vocabs)
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn query_is_excluded_and_duplicates_are_zero() {
        let (s, v) = stack(EncoderVariant::CharLstm, &["renal failure", "acute ischemia"]);
        let c = strings(&["renal failure", "renal  failure", "acute ischemia"]);
        let n = nearest_neighbors("renal failure", &c, &s, &v, Granularity::Sentence, 5).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].text, "renal  failure");
        assert_eq!(n[0].distance, 0.0);
        assert!(n[1].distance > 0.0);
    }

    #[test]
    fn k_caps_and_errors() {
        let (s, v) = stack(EncoderVariant::CharLstm, &["renal failure"]);
        let c = strings(&["renal", "failure", "ischemia", "abc"]);
        assert_eq!(
            nearest_neighbors("renal", &c, &s, &v, Granularity::Word, 2)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            nearest_neighbors("xyz", &c, &s, &v, Granularity::Word, 10)
                .unwrap()
                .len(),
            4
        );
        assert!(nearest_neighbors("xyz", &[], &s, &v, Granularity::Word, 1).is_err());
        assert!(nearest_neighbors("xyz", &c, &s, &v, Granularity::Word, 0).is_err());
    }

    #[test]
    fn rendering_uses_two_decimals() {
        let n = vec![
            Neighbor {
                text: "ischemia".into(),
                distance: 4.049,
            },
            Neighbor {
                text: "ischmia".into(),
                distance: 2.7612,
            },
        ];
        let t = render_neighbors("Ischemia", &n, TableFormat::Text);
        assert_eq!(t, "Ischemia:\n1.  ischemia  (4.05)\n2.  ischmia   (2.76)\n");
        let tsv = render_neighbors("Ischemia", &n, TableFormat::Tsv);
        assert_eq!(tsv, "rank\tneighbor\tdistance\n1\tischemia\t4.05\n2\tischmia\t2.76\n");
    }

    #[test]
    fn misspellings_are_single_edits() {
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let m = misspell("ischemia", &mut rng);
            assert_ne!(m, "ischemia");
            let d = m.chars().count() as i64 - 8;
            assert!(d.abs() <= 1);
        }
        assert_eq!(misspell("", &mut rng), "");
    }

    #[test]
    fn probe_words_are_distinct_and_long() {
        let codes = vec![
            CodeDefinition::new("1", "Acute renal failure, unspecified"),
            CodeDefinition::new("2", "Chronic renal failure"),
        ];
        assert_eq!(
            probe_words(&codes, 5),
            strings(&["acute", "chronic", "failure", "renal", "unspecified"])
        );
    }

    #[test]
    fn audit_counts_every_probe() {
        let words = strings(&["renal", "failure", "ischemia", "stenosis"]);
        let (s, v) = stack(EncoderVariant::CharLstm, &["renal failure ischemia stenosis"]);
        let a = typo_recovery_audit(&s, &v, &words, 3, &mut Rng::new(1)).unwrap();
        assert_eq!(a.probes, 4);
        assert_eq!(a.hits + a.misses.len(), 4);
        assert!((0.0..=1.0).contains(&a.hit_rate()));
    }

    proptest! {
        #[test]
        fn distances_are_non_decreasing(words in prop::collection::vec("[a-z]{1,8}", 1..12), q in "[a-z]{1,8}") {
            let (s, v) = stack(EncoderVariant::CharLstm, &["abc"]);
            let c: Vec<String> = words.clone();
            if c.iter().all(|w| w == &q) {
                return Ok(());
            }
            let n = nearest_neighbors(&q, &c, &s, &v, Granularity::Word, 20).unwrap();
            prop_assert!(n.windows(2).all(|w| w[0].distance <= w[1].distance));
            prop_assert!(n.iter().all(|x| x.text != q));
        }
    }
}
