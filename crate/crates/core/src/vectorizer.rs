//! Non-normalized TF-IDF.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::{Dictionary, Document, Token};
use crate::{Error, Result};

/// Sparse vector as `(vocabulary index, value)` pairs sorted by index.
pub type SparseVector = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVectorizer {
    vocabulary: Dictionary,
    idf: Vec<f64>,
    corpus_size: usize,
}

/// On-disk form.
#[derive(Debug, Serialize, Deserialize)]
struct VectorizerFile {
    words: Vec<String>,
    idf: Vec<f64>,
    corpus_size: usize,
}

impl TfIdfVectorizer {
    /// Fits smoothed IDF weights `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit(corpus: &[Document]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let vocabulary = Dictionary::from_documents(corpus);
        let mut df = vec![0usize; vocabulary.len()];
        for doc in corpus {
            let mut seen = vec![false; vocabulary.len()];
            for w in doc.tokens().iter().filter_map(Token::word) {
                let j = vocabulary.id(w).expect("word collected above");
                if !seen[j] {
                    seen[j] = true;
                    df[j] += 1;
                }
            }
        }
        let n = corpus.len() as f64;
        let idf = df
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
        Ok(Self {
            vocabulary,
            idf,
            corpus_size: corpus.len(),
        })
    }

    /// Builds a vectorizer from explicit weights.
    pub fn from_parts(words: Vec<String>, idf: Vec<f64>, corpus_size: usize) -> Result<Self> {
        if words.len() != idf.len() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                actual: idf.len(),
            });
        }
        if let Some(bad) = idf.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Parse(format!("idf weights must be finite and >= 0, got {bad}")));
        }
        Ok(Self {
            vocabulary: Dictionary::new(words)?,
            idf,
            corpus_size,
        })
    }

    pub fn vocabulary(&self) -> &Dictionary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// IDF of a word; 0 outside the fitted vocabulary.
    pub fn idf_of(&self, word: &str) -> f64 {
        self.vocabulary.id(word).map_or(0.0, |j| self.idf[j])
    }

    /// Term count times IDF. `UNK` and unknown words contribute nothing.
    pub fn vectorize(&self, doc: &Document) -> SparseVector {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for w in doc.tokens().iter().filter_map(Token::word) {
            if let Some(j) = self.vocabulary.id(w) {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
        counts
            .into_iter()
            .map(|(j, c)| (j, c as f64 * self.idf[j]))
            .collect()
    }

    pub fn vectorize_dense(&self, doc: &Document) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (j, v) in self.vectorize(doc) {
            out[j] = v;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VectorizerFile {
            words: self.vocabulary.words().to_vec(),
            idf: self.idf.clone(),
            corpus_size: self.corpus_size,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: VectorizerFile = serde_json::from_str(s)?;
        Self::from_parts(file.words, file.idf, file.corpus_size)
    }
}
