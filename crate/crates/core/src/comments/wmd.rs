//! Word Mover's Distance between short documents.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::transport;
use crate::error::{Error, Result};

/// Token → vector table loaded from `token v1 v2 ... vk` lines.
#[derive(Debug, Clone, Default)]
pub struct WordVectors {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn from_map(table: HashMap<String, Vec<f64>>) -> Result<Self> {
        let dim = table.values().next().map_or(0, Vec::len);
        if let Some(v) = table.values().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        Ok(WordVectors { dim, table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = HashMap::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let vec: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
            let vec = vec.map_err(|e| {
                Error::invalid(format!("{}:{}: bad vector component: {e}", path.display(), i + 1))
            })?;
            table.insert(token.to_string(), vec);
        }
        Self::from_map(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.table.get(token).map(Vec::as_slice)
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmdResult {
    pub distance: f64,
    pub similarity: f64,
}

impl WmdResult {
    pub fn from_distance(distance: f64) -> Self {
        WmdResult {
            distance,
            similarity: 1.0 / (1.0 + distance),
        }
    }
}

fn bag<'a>(doc: &'a [String], vectors: &WordVectors) -> BTreeMap<&'a str, u64> {
    let mut counts = BTreeMap::new();
    for t in doc {
        if vectors.get(t).is_some() {
            *counts.entry(t.as_str()).or_insert(0u64) += 1;
        }
    }
    counts
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact WMD: optimal transport between normalized bags of in-vocabulary
/// words with Euclidean ground cost.
pub fn wmd(doc_a: &[String], doc_b: &[String], vectors: &WordVectors) -> Result<WmdResult> {
    let a = bag(doc_a, vectors);
    let b = bag(doc_b, vectors);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "document has no in-vocabulary tokens".into(),
        ));
    }
    let total_a: u64 = a.values().sum();
    let total_b: u64 = b.values().sum();
    // weights count/total_a and count/total_b scaled to a common integer mass
    let supply: Vec<u64> = a.values().map(|c| c * total_b).collect();
    let demand: Vec<u64> = b.values().map(|c| c * total_a).collect();
    let cost: Vec<Vec<f64>> = a
        .keys()
        .map(|ta| {
            let va = vectors.get(ta).expect("filtered to vocabulary");
            b.keys()
                .map(|tb| euclidean(va, vectors.get(tb).expect("filtered to vocabulary")))
                .collect()
        })
        .collect();
    let (total, _) = transport::solve(&supply, &demand, &cost)?;
    Ok(WmdResult::from_distance(total / (total_a * total_b) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors() -> WordVectors {
        let mut m = HashMap::new();
        m.insert("free".to_string(), vec![0.0, 0.0]);
        m.insert("likes".to_string(), vec![2.0, 0.0]);
        m.insert("now".to_string(), vec![0.0, 1.0]);
        WordVectors::from_map(m).unwrap()
    }

    #[test]
    fn identical_docs() {
        let d = tokenize("free likes now");
        let r = wmd(&d, &d, &vectors()).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.similarity, 1.0);
    }

    #[test]
    fn single_word_forced_plan() {
        let r = wmd(&tokenize("free"), &tokenize("likes"), &vectors()).unwrap();
        assert_eq!(r.distance, 2.0);
        assert!((r.similarity - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_vocabulary_doc_errors() {
        assert!(wmd(&tokenize("zzz"), &tokenize("free"), &vectors()).is_err());
    }

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("Free, LIKES now!"), vec!["free", "likes", "now"]);
    }

    #[test]
    fn loads_text_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wv.txt");
        std::fs::write(&p, "a 1 0\nb 0 1\n").unwrap();
        let wv = WordVectors::load(&p).unwrap();
        assert_eq!(wv.dim(), 2);
        let r = wmd(&tokenize("a"), &tokenize("b"), &wv).unwrap();
        assert!((r.distance - 2f64.sqrt()).abs() < 1e-12);
    }
}
