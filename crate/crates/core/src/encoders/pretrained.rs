use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::read_to_string;

/// Word vectors keyed by lowercased word, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl PretrainedVectors {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Parses the text format: a `<count> <dim>` header, then one
    /// `word v1 ... vdim` line per word. A repeated word keeps its last vector.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| err(1, "missing `<count> <dim>` header".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(1, format!("bad header {header:?}")))?;
        let [count, dim] = nums[..] else {
            return Err(err(1, format!("bad header {header:?}")));
        };
        if dim == 0 {
            return Err(err(1, "dimension must be positive".into()));
        }
        let mut vectors = HashMap::with_capacity(count);
        let mut rows = 0;
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-blank line").to_lowercase();
            let v: Vec<f64> = parts
                .map(|x| {
                    x.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(i + 1, format!("bad number {x:?}")))
                })
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(err(i + 1, format!("expected {dim} values, found {}", v.len())));
            }
            if vectors.insert(word.clone(), v).is_some() {
                log::warn!("{source}:{}: duplicate word {word:?}, keeping the later vector", i + 1);
            }
            rows += 1;
        }
        if rows != count {
            return Err(err(1, format!("header declares {count} vectors but {rows} follow")));
        }
        Ok(Self { dim, vectors })
    }
}

pub fn load_pretrained_vectors(path: &Path) -> Result<PretrainedVectors> {
    PretrainedVectors::parse(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let v = PretrainedVectors::parse("2 3\na 1 2 3\nB 4 5 6\n", "mem").unwrap();
        assert_eq!((v.len(), v.dim()), (2, 3));
        assert_eq!(v.get("b"), Some(&[4.0, 5.0, 6.0][..]));
        assert_eq!(v.get("A"), Some(&[1.0, 2.0, 3.0][..]));
        assert_eq!(v.get("c"), None);
    }

    #[test]
    fn duplicates_keep_last() {
        let v = PretrainedVectors::parse("2 1\nx 1\nX 2\n", "mem").unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("x"), Some(&[2.0][..]));
    }

    #[test]
    fn malformed_input_reports_line() {
        let e = PretrainedVectors::parse("2 3\na 1 2 3\nb 4 5\n", "f.txt").unwrap_err();
        assert_eq!(e.to_string(), "f.txt:3: expected 3 values, found 2");
        let e = PretrainedVectors::parse("1 2\na 1 zz\n", "f.txt").unwrap_err();
        assert!(e.to_string().starts_with("f.txt:2:"));
        assert!(PretrainedVectors::parse("", "f").is_err());
        assert!(PretrainedVectors::parse("3 1\na 1\n", "f").is_err());
    }

    #[test]
    fn loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        std::fs::write(&p, "1 2\nword 0.5 -0.5\n").unwrap();
        assert_eq!(load_pretrained_vectors(&p).unwrap().get("WORD"), Some(&[0.5, -0.5][..]));
        assert!(load_pretrained_vectors(&dir.path().join("missing")).is_err());
    }
}
