use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{AdmissionRecord, CodeDefinition};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// The `k` codes assigned to the most records, most frequent first; equal
/// counts are ordered by code string. Codes missing from `code_table` are
/// ignored with a warning.
pub fn select_top_codes(
    records: &[AdmissionRecord],
    code_table: &[CodeDefinition],
    k: usize,
) -> Result<Vec<CodeDefinition>> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    let known: BTreeMap<&str, &CodeDefinition> = code_table.iter().map(|c| (c.code.as_str(), c)).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unknown: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        for c in &r.codes {
            if known.contains_key(c.as_str()) {
                *counts.entry(c).or_default() += 1;
            } else {
                unknown.insert(c);
            }
        }
    }
    if !unknown.is_empty() {
        log::warn!("{} code(s) missing from the code table were ignored", unknown.len());
    }
    if counts.len() < k {
        return Err(Error::InvalidParam(format!(
            "asked for {k} codes but only {} distinct codes occur",
            counts.len()
        )));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // BTreeMap iteration is already code-ordered; a stable sort keeps that for ties.
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    Ok(ranked[..k].iter().map(|(c, _)| known[c].clone()).collect())
}

/// Restricts every gold set to `codes`. Records left without any gold code are
/// kept unless `drop_unlabeled`; records without descriptions are always dropped.
pub fn restrict_to_codes(
    records: Vec<AdmissionRecord>,
    codes: &[CodeDefinition],
    drop_unlabeled: bool,
) -> Vec<AdmissionRecord> {
    let keep: HashSet<&str> = codes.iter().map(|c| c.code.as_str()).collect();
    records
        .into_iter()
        .filter(|r| !r.descriptions.is_empty())
        .map(|mut r| {
            r.codes.retain(|c| keep.contains(c.as_str()));
            r
        })
        .filter(|r| !(drop_unlabeled && r.codes.is_empty()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<AdmissionRecord>,
    pub validation: Vec<AdmissionRecord>,
    pub test: Vec<AdmissionRecord>,
}

/// Seeded shuffle then contiguous slices: validation and test get
/// `floor(n * fraction)` records each and train takes the remainder.
pub fn split_dataset(records: &[AdmissionRecord], fractions: (f64, f64, f64), rng: &mut Rng) -> Result<DatasetSplit> {
    if records.is_empty() {
        return Err(Error::Empty("no records to split"));
    }
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParam(format!(
            "split fractions must be in [0, 1] and sum to 1, got ({ft}, {fv}, {fs})"
        )));
    }
    let mut ids: HashSet<&str> = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(&r.hadm_id)) {
        return Err(Error::InvalidParam(format!("duplicate hadm_id {}", dup.hadm_id)));
    }
    let n = records.len();
    // The epsilon absorbs representation error such as 0.7 * 10 = 6.999...
    let n_val = (n as f64 * fv + 1e-9).floor() as usize;
    let n_test = (n as f64 * fs + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let take = |range: std::ops::Range<usize>| order[range].iter().map(|&i| records[i].clone()).collect();
    Ok(DatasetSplit {
        train: take(0..n_train),
        validation: take(n_train..n_train + n_val),
        test: take(n_train + n_val..n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn rec(id: usize, codes: &[&str]) -> AdmissionRecord {
        AdmissionRecord {
            hadm_id: id.to_string(),
            descriptions: vec!["x".into()],
            codes: codes.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn table(codes: &[&str]) -> Vec<CodeDefinition> {
        codes
            .iter()
            .map(|c| CodeDefinition::new(*c, format!("title {c}")))
            .collect()
    }

    #[test]
    fn top_one() {
        let recs = [rec(1, &["A"]), rec(2, &["A", "B"]), rec(3, &["A"])];
        let top = select_top_codes(&recs, &table(&["A", "B"]), 1).unwrap();
        assert_eq!(top, table(&["A"]));
    }

    #[test]
    fn ties_break_lexicographically() {
        let recs = [rec(1, &["B", "A"]), rec(2, &["C", "B"]), rec(3, &["A"])];
        let top = select_top_codes(&recs, &table(&["C", "B", "A"]), 2).unwrap();
        assert_eq!(top, table(&["A", "B"]));
    }

    #[test]
    fn too_few_codes() {
        let recs = [rec(1, &["A"])];
        assert!(select_top_codes(&recs, &table(&["A", "B"]), 2).is_err());
        assert!(select_top_codes(&recs, &table(&["A"]), 0).is_err());
    }

    #[test]
    fn restriction_keeps_empty_label_sets_by_default() {
        let recs = vec![rec(1, &["A", "Z"]), rec(2, &["Z"])];
        let kept = restrict_to_codes(recs.clone(), &table(&["A"]), false);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].codes.len(), 1);
        assert!(kept[1].codes.is_empty());
        assert_eq!(restrict_to_codes(recs, &table(&["A"]), true).len(), 1);
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let recs: Vec<_> = (0..10).map(|i| rec(i, &[])).collect();
        let s = split_dataset(&recs, (0.8, 0.1, 0.1), &mut Rng::new(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));

        let big: Vec<_> = (0..11_523).map(|i| rec(i, &[])).collect();
        let s = split_dataset(&big, (0.7, 0.15, 0.15), &mut Rng::new(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8067, 1728, 1728));
    }

    #[test]
    fn split_is_seeded_and_validated() {
        let recs: Vec<_> = (0..30).map(|i| rec(i, &[])).collect();
        let a = split_dataset(&recs, (0.7, 0.15, 0.15), &mut Rng::new(4)).unwrap();
        let b = split_dataset(&recs, (0.7, 0.15, 0.15), &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(split_dataset(&[], (0.7, 0.15, 0.15), &mut Rng::new(4)).is_err());
        assert!(split_dataset(&recs, (0.7, 0.2, 0.15), &mut Rng::new(4)).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_input(n in 1usize..200, seed in any::<u64>()) {
            let recs: Vec<_> = (0..n).map(|i| rec(i, &[])).collect();
            let s = split_dataset(&recs, (0.7, 0.15, 0.15), &mut Rng::new(seed)).unwrap();
            let mut all: Vec<&str> = s.train.iter().chain(&s.validation).chain(&s.test)
                .map(|r| r.hadm_id.as_str()).collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        #[test]
        fn top_codes_have_exact_size_and_sorted_counts(
            sets in prop::collection::vec(prop::collection::btree_set(0u8..12, 1..4), 5..40),
            k in 1usize..6,
        ) {
            let recs: Vec<_> = sets.iter().enumerate().map(|(i, s)| AdmissionRecord {
                hadm_id: i.to_string(),
                descriptions: vec!["d".into()],
                codes: s.iter().map(|c| format!("C{c:02}")).collect(),
            }).collect();
            let tbl: Vec<_> = (0..12).map(|c| CodeDefinition::new(format!("C{c:02}"), "t")).collect();
            let distinct: BTreeSet<_> = recs.iter().flat_map(|r| r.codes.iter()).collect();
            match select_top_codes(&recs, &tbl, k) {
                Ok(top) => {
                    prop_assert_eq!(top.len(), k);
                    let count = |c: &str| recs.iter().filter(|r| r.codes.contains(c)).count();
                    for w in top.windows(2) {
                        prop_assert!(count(&w[0].code) >= count(&w[1].code));
                    }
                }
                Err(_) => prop_assert!(distinct.len() < k),
            }
        }
    }
}
