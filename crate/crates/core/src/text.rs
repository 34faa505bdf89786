//! Documents, dictionaries, and the two anchor representations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Literal rendering of the replacement token.
pub const UNK: &str = "UNK";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Word(String),
    Unk,
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            Token::Unk => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Unk => f.write_str(UNK),
        }
    }
}

/// A tokenized document. `len()` is the document length `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: Vec<Token>,
    source_text: String,
}

impl Document {
    /// Builds a document from already tokenized words.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let source_text = render(&tokens);
        Ok(Self {
            tokens,
            source_text,
        })
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        Self::from_tokens(
            words
                .iter()
                .map(|w| Token::Word(w.as_ref().to_owned()))
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Word counts, ignoring `UNK`.
    pub fn word_counts(&self) -> HashMap<&str, u32> {
        let mut counts = HashMap::new();
        for w in self.tokens.iter().filter_map(Token::word) {
            *counts.entry(w).or_insert(0) += 1;
        }
        counts
    }

    /// Copy of the document with the flagged positions replaced by `UNK`.
    pub fn masked(&self, is_masked: impl Fn(usize) -> bool) -> Document {
        let tokens: Vec<Token> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(k, t)| if is_masked(k) { Token::Unk } else { t.clone() })
            .collect();
        let source_text = render(&tokens);
        Document {
            tokens,
            source_text,
        }
    }

    /// Copy of the document with the flagged positions removed. May be empty.
    pub fn without(&self, is_removed: impl Fn(usize) -> bool) -> Document {
        let tokens: Vec<Token> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(k, _)| !is_removed(*k))
            .map(|(_, t)| t.clone())
            .collect();
        let source_text = render(&tokens);
        Document {
            tokens,
            source_text,
        }
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (k, t) in tokens.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        match t {
            Token::Word(w) => out.push_str(w),
            Token::Unk => out.push_str(UNK),
        }
    }
    out
}

/// Lower-cases `text` and keeps its maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Result<Document> {
    let lowered = text.to_lowercase();
    let tokens: Vec<Token> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| Token::Word(s.to_owned()))
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(Document {
        tokens,
        source_text: text.to_owned(),
    })
}

/// Parses a corpus: one document per line, blank lines rejected.
pub fn parse_corpus(contents: &str) -> Result<Vec<Document>> {
    let docs = contents
        .lines()
        .enumerate()
        .map(|(i, line)| {
            tokenize(line).map_err(|_| Error::Parse(format!("line {}: empty document", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

/// Ordered list of distinct words. `UNK` is a separate token variant and can
/// never be one of the entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Parse(format!("duplicate dictionary word {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    /// Collects distinct words in first-occurrence order.
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut dict = Self::default();
        for doc in docs {
            for w in doc.tokens().iter().filter_map(Token::word) {
                if !dict.index.contains_key(w) {
                    dict.index.insert(w.to_owned(), dict.words.len());
                    dict.words.push(w.to_owned());
                }
            }
        }
        dict
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Local dictionary of the explained example: its `d` distinct words in
/// first-occurrence order, their multiplicities, and the word index of every
/// position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalStats {
    words: Vec<String>,
    multiplicities: Vec<u32>,
    position_word: Vec<usize>,
}

impl LocalStats {
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    /// Word index (into [`Self::words`]) of each document position.
    pub fn position_word(&self) -> &[usize] {
        &self.position_word
    }

    /// Number of distinct words `d`.
    pub fn distinct(&self) -> usize {
        self.words.len()
    }

    /// Document length `b`.
    pub fn doc_len(&self) -> usize {
        self.position_word.len()
    }

    pub fn full_anchor(&self) -> MultiplicityAnchor {
        MultiplicityAnchor {
            counts: self.multiplicities.clone(),
        }
    }
}

pub fn local_stats(doc: &Document) -> Result<LocalStats> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut words = Vec::new();
    let mut multiplicities = Vec::new();
    let mut position_word = Vec::with_capacity(doc.len());
    for t in doc.tokens() {
        let w = t.word().ok_or(Error::UnkInExample)?;
        let j = *index.entry(w).or_insert_with(|| {
            words.push(w.to_owned());
            multiplicities.push(0);
            words.len() - 1
        });
        multiplicities[j] += 1;
        position_word.push(j);
    }
    if words.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(LocalStats {
        words,
        multiplicities,
        position_word,
    })
}

/// Anchor as a non-empty set of document positions, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Anchor {
    positions: Vec<usize>,
}

impl Anchor {
    pub fn new(positions: impl IntoIterator<Item = usize>, doc_len: usize) -> Result<Self> {
        let set: BTreeSet<usize> = positions.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidAnchor("anchor is empty".into()));
        }
        if let Some(&p) = set.iter().next_back().filter(|&&p| p >= doc_len) {
            return Err(Error::InvalidAnchor(format!(
                "position {p} outside a document of length {doc_len}"
            )));
        }
        Ok(Self {
            positions: set.into_iter().collect(),
        })
    }

    /// Every position of a document of length `doc_len`.
    pub fn full(doc_len: usize) -> Self {
        Self {
            positions: (0..doc_len).collect(),
        }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.positions.binary_search(&position).is_ok()
    }

    pub fn to_multiplicity(&self, stats: &LocalStats) -> MultiplicityAnchor {
        let mut counts = vec![0; stats.distinct()];
        for &p in &self.positions {
            counts[stats.position_word[p]] += 1;
        }
        MultiplicityAnchor { counts }
    }
}

/// Anchor as per-word anchored counts `a_j`, indexed like [`LocalStats`].
/// Ordering is lexicographic on the counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiplicityAnchor {
    counts: Vec<u32>,
}

impl MultiplicityAnchor {
    pub fn new(counts: Vec<u32>, stats: &LocalStats) -> Result<Self> {
        if counts.len() != stats.distinct() {
            return Err(Error::DimensionMismatch {
                expected: stats.distinct(),
                actual: counts.len(),
            });
        }
        for (&a, &m) in counts.iter().zip(stats.multiplicities()) {
            if a > m {
                return Err(Error::InvalidRange {
                    multiplicity: m,
                    anchored: a,
                });
            }
        }
        if counts.iter().all(|&a| a == 0) {
            return Err(Error::InvalidAnchor("anchor is empty".into()));
        }
        Ok(Self { counts })
    }

    /// Unchecked constructor for enumeration code that already respects the
    /// bounds.
    pub(crate) fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Anchor length `ℓ(A) = Σ a_j`.
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&a| a as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positional anchor using the earliest occurrences of each word.
    pub fn to_positional(&self, stats: &LocalStats) -> Anchor {
        let mut remaining = self.counts.clone();
        let positions = stats
            .position_word
            .iter()
            .enumerate()
            .filter_map(|(k, &j)| {
                if remaining[j] > 0 {
                    remaining[j] -= 1;
                    Some(k)
                } else {
                    None
                }
            })
            .collect();
        Anchor { positions }
    }

    /// Words with a non-zero anchored count.
    pub fn word_set(&self, stats: &LocalStats) -> BTreeSet<String> {
        self.counts
            .iter()
            .zip(stats.words())
            .filter(|(&a, _)| a > 0)
            .map(|(_, w)| w.clone())
            .collect()
    }

    /// Word requirement used for coverage: `word -> a_j` for every `a_j > 0`.
    pub fn requirement(&self, stats: &LocalStats) -> Vec<(String, u32)> {
        self.counts
            .iter()
            .zip(stats.words())
            .filter(|(&a, _)| a > 0)
            .map(|(&a, w)| (w.clone(), a))
            .collect()
    }

    /// Human-readable form: `{w1 x2, w3}`.
    pub fn describe(&self, stats: &LocalStats) -> String {
        let parts: Vec<String> = self
            .requirement(stats)
            .into_iter()
            .map(|(w, a)| if a == 1 { w } else { format!("{w} x{a}") })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

impl fmt::Display for MultiplicityAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `|S ∩ T| / |S ∪ T|`.
pub fn jaccard<T: Ord>(s: &BTreeSet<T>, t: &BTreeSet<T>) -> Result<f64> {
    let union = s.union(t).count();
    if union == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(s.intersection(t).count() as f64 / union as f64)
}
