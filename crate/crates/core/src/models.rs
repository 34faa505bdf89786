//! Classifiers under explanation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::perturbation::Mask;
use crate::text::{Document, LocalStats, Token};
use crate::vectorizer::TfIdfVectorizer;
use crate::{Error, Result};

/// A deterministic binary classifier over documents. `true` is class 1.
pub trait Classifier: Sync {
    fn predict(&self, doc: &Document) -> bool;

    /// Score in `[0, 1]` whose threshold at 1/2 agrees with `predict`, when
    /// the model has one.
    fn confidence(&self, _doc: &Document) -> Option<f64> {
        None
    }

    /// Specializes the classifier to masked copies of `example`. The default
    /// materializes every masked document; models can override it with a
    /// faster equivalent.
    fn bind<'a>(&'a self, example: &'a Document) -> Box<dyn LocalClassifier + 'a> {
        Box::new(Materialize {
            classifier: self,
            example,
        })
    }
}

/// A classifier restricted to UNK-masked variants of one example.
pub trait LocalClassifier: Sync {
    fn predict_masked(&self, mask: &Mask) -> bool;
}

struct Materialize<'a, C: ?Sized> {
    classifier: &'a C,
    example: &'a Document,
}

impl<C: Classifier + ?Sized> LocalClassifier for Materialize<'_, C> {
    fn predict_masked(&self, mask: &Mask) -> bool {
        self.classifier
            .predict(&self.example.masked(|k| mask.is_masked(k)))
    }
}

/// Wraps a closure as a black-box [`Classifier`].
pub struct FnClassifier<F>(pub F);

impl<F: Fn(&Document) -> bool + Sync> Classifier for FnClassifier<F> {
    fn predict(&self, doc: &Document) -> bool {
        (self.0)(doc)
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `f(x) = 1{λᵀφ(x) + λ0 > 0}` over a fitted TF-IDF vectorizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    lambda: Vec<f64>,
    intercept: f64,
    vectorizer: TfIdfVectorizer,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    lambda: Vec<f64>,
    lambda0: f64,
}

impl LinearModel {
    pub fn new(lambda: Vec<f64>, intercept: f64, vectorizer: TfIdfVectorizer) -> Result<Self> {
        if lambda.len() != vectorizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: vectorizer.dim(),
                actual: lambda.len(),
            });
        }
        Ok(Self {
            lambda,
            intercept,
            vectorizer,
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn vectorizer(&self) -> &TfIdfVectorizer {
        &self.vectorizer
    }

    /// Coefficient of a word; 0 outside the vocabulary.
    pub fn lambda_of(&self, word: &str) -> f64 {
        self.vectorizer
            .vocabulary()
            .id(word)
            .map_or(0.0, |j| self.lambda[j])
    }

    /// `λ_j · idf_j` of a word; 0 outside the vocabulary.
    pub fn weight_of(&self, word: &str) -> f64 {
        self.vectorizer
            .vocabulary()
            .id(word)
            .map_or(0.0, |j| self.lambda[j] * self.vectorizer.idf()[j])
    }

    /// `λ_j · idf_j` for each local word of `stats`.
    pub fn word_weights(&self, stats: &LocalStats) -> Vec<f64> {
        stats.words().iter().map(|w| self.weight_of(w)).collect()
    }

    /// `λ_j` for each local word of `stats`.
    pub fn word_lambdas(&self, stats: &LocalStats) -> Vec<f64> {
        stats.words().iter().map(|w| self.lambda_of(w)).collect()
    }

    /// `λ0 + Σ_j (λ_j idf_j) c_j`, summed over distinct words in first
    /// occurrence order. Every precision routine sums in this same order so
    /// that boundary cases agree bit for bit.
    pub fn score(&self, doc: &Document) -> f64 {
        let mut order: Vec<&str> = Vec::new();
        let mut counts: HashMap<&str, u32> = HashMap::new();
        for w in doc.tokens().iter().filter_map(Token::word) {
            let c = counts.entry(w).or_insert(0);
            if *c == 0 {
                order.push(w);
            }
            *c += 1;
        }
        order.into_iter().fold(self.intercept, |s, w| {
            s + self.weight_of(w) * counts[w] as f64
        })
    }

    /// `λᵀφ(x) + λ0` computed through the vectorizer.
    pub fn score_vectorized(&self, doc: &Document) -> f64 {
        self.vectorizer
            .vectorize(doc)
            .into_iter()
            .fold(self.intercept, |s, (j, x)| s + self.lambda[j] * x)
    }

    /// Strict threshold: a zero score is class 0.
    pub fn decide(&self, doc: &Document) -> bool {
        self.score(doc) > 0.0
    }

    /// `γ = λ0 + Σ_j λ_j idf_j m_j`, the score of the example itself.
    pub fn gamma(&self, stats: &LocalStats) -> f64 {
        self.word_weights(stats)
            .iter()
            .zip(stats.multiplicities())
            .fold(self.intercept, |s, (w, &m)| s + w * m as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            lambda: self.lambda.clone(),
            lambda0: self.intercept,
        })?)
    }

    /// Loads `{"lambda": [...], "lambda0": x}` aligned with `vectorizer`.
    pub fn from_json(s: &str, vectorizer: TfIdfVectorizer) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        Self::new(file.lambda, file.lambda0, vectorizer)
    }
}

impl Classifier for LinearModel {
    fn predict(&self, doc: &Document) -> bool {
        self.decide(doc)
    }

    fn confidence(&self, doc: &Document) -> Option<f64> {
        Some(sigmoid(self.score(doc)))
    }

    fn bind<'a>(&'a self, example: &'a Document) -> Box<dyn LocalClassifier + 'a> {
        Box::new(LinearLocal::new(self, example))
    }
}

/// Linear model bound to one example: per-word position bitsets, so a masked
/// sample is scored with one popcount per word and block.
struct LinearLocal {
    intercept: f64,
    weights: Vec<f64>,
    // word_blocks[j * blocks + i]: positions of word j within block i.
    word_blocks: Vec<u64>,
    blocks: usize,
}

impl LinearLocal {
    fn new(model: &LinearModel, example: &Document) -> Self {
        let blocks = example.len().div_ceil(64);
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut weights = Vec::new();
        let mut word_blocks = Vec::new();
        for (k, t) in example.tokens().iter().enumerate() {
            let Some(w) = t.word() else { continue };
            let j = *index.entry(w).or_insert_with(|| {
                weights.push(model.weight_of(w));
                word_blocks.extend(std::iter::repeat_n(0u64, blocks));
                weights.len() - 1
            });
            word_blocks[j * blocks + k / 64] |= 1 << (k % 64);
        }
        Self {
            intercept: model.intercept,
            weights,
            word_blocks,
            blocks,
        }
    }
}

impl LocalClassifier for LinearLocal {
    fn predict_masked(&self, mask: &Mask) -> bool {
        let masked = mask.blocks();
        let mut score = self.intercept;
        for (j, w) in self.weights.iter().enumerate() {
            let row = &self.word_blocks[j * self.blocks..(j + 1) * self.blocks];
            let kept: u32 = row
                .iter()
                .zip(masked)
                .map(|(p, m)| (p & !m).count_ones())
                .sum();
            score += w * kept as f64;
        }
        score > 0.0
    }
}

/// Full-batch gradient descent settings for [`train_logistic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 2000,
            l2: 1e-4,
        }
    }
}

/// Parses a labeled corpus: one `label<TAB>text` per line, label in {0, 1}.
pub fn parse_labeled(contents: &str) -> Result<Vec<(Document, bool)>> {
    contents
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let (label, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("line {}: expected label<TAB>text", i + 1)))?;
            let label = parse_label(label)
                .ok_or_else(|| Error::Parse(format!("line {}: label must be 0 or 1", i + 1)))?;
            let doc = crate::text::tokenize(text)
                .map_err(|_| Error::Parse(format!("line {}: empty document", i + 1)))?;
            Ok((doc, label))
        })
        .collect()
}

pub fn parse_label(s: &str) -> Option<bool> {
    match s.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// Logistic regression with an L2 penalty on `λ` (not on the intercept),
/// zero initialization and a fixed number of full-batch steps.
pub fn train_logistic(
    corpus: &[(Document, bool)],
    vectorizer: &TfIdfVectorizer,
    config: &TrainConfig,
) -> Result<LinearModel> {
    let positives = corpus.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == corpus.len() {
        return Err(Error::DegenerateLabels);
    }
    let features: Vec<_> = corpus
        .iter()
        .map(|(doc, _)| vectorizer.vectorize(doc))
        .collect();
    let n = corpus.len() as f64;
    let mut lambda = vec![0.0; vectorizer.dim()];
    let mut intercept = 0.0;
    let mut grad = vec![0.0; vectorizer.dim()];
    for _ in 0..config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad0 = 0.0;
        for (x, (_, y)) in features.iter().zip(corpus) {
            let z = x.iter().fold(intercept, |s, &(j, v)| s + lambda[j] * v);
            let r = sigmoid(z) - if *y { 1.0 } else { 0.0 };
            grad0 += r;
            for &(j, v) in x {
                grad[j] += r * v;
            }
        }
        for (l, g) in lambda.iter_mut().zip(&grad) {
            *l -= config.learning_rate * (g / n + config.l2 * *l);
        }
        intercept -= config.learning_rate * grad0 / n;
    }
    LinearModel::new(lambda, intercept, vectorizer.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{local_stats, tokenize};
    use proptest::prelude::*;

    fn w_model(lambda0: f64) -> LinearModel {
        let v = TfIdfVectorizer::from_parts(vec!["w1".into(), "w2".into()], vec![1.0, 1.0], 1)
            .unwrap();
        LinearModel::new(vec![1.0, -1.0], lambda0, v).unwrap()
    }

    #[test]
    fn decide_examples() {
        let m = w_model(0.0);
        assert_eq!(m.score(&tokenize("w1 w1 w2").unwrap()), 1.0);
        assert!(m.decide(&tokenize("w1 w1 w2").unwrap()));
        // score 0 is class 0
        assert!(!m.decide(&tokenize("w1 w2").unwrap()));

        let v = m.vectorizer().clone();
        let neg = LinearModel::new(vec![0.0, 0.0], -5.0, v).unwrap();
        for text in ["w1", "w2 w2 w2", "w1 w1 w1 w1 w1 w1"] {
            assert!(!neg.decide(&tokenize(text).unwrap()));
        }
    }

    #[test]
    fn gamma_examples() {
        let m = w_model(0.0);
        let s = local_stats(&tokenize("w1 w1 w2").unwrap()).unwrap();
        assert_eq!(m.gamma(&s), 1.0);
        let v = m.vectorizer().clone();
        let flat = LinearModel::new(vec![0.0, 0.0], 2.5, v).unwrap();
        assert_eq!(flat.gamma(&s), 2.5);
    }

    #[test]
    fn dimension_checked() {
        let v = w_model(0.0).vectorizer().clone();
        assert!(matches!(
            LinearModel::new(vec![1.0], 0.0, v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let m = w_model(-0.25);
        let back = LinearModel::from_json(&m.to_json().unwrap(), m.vectorizer().clone()).unwrap();
        assert_eq!(back, m);
    }

    fn toy_corpus() -> Vec<(Document, bool)> {
        (0..50)
            .flat_map(|_| {
                [
                    (tokenize("good").unwrap(), true),
                    (tokenize("bad").unwrap(), false),
                ]
            })
            .collect()
    }

    #[test]
    fn training_recovers_signs() {
        let corpus = toy_corpus();
        let docs: Vec<Document> = corpus.iter().map(|(d, _)| d.clone()).collect();
        let v = TfIdfVectorizer::fit(&docs).unwrap();
        let m = train_logistic(&corpus, &v, &TrainConfig::default()).unwrap();
        assert!(m.lambda_of("good") > 0.0);
        assert!(m.lambda_of("bad") < 0.0);
        for (doc, y) in &corpus {
            assert_eq!(m.decide(doc), *y);
        }
    }

    #[test]
    fn zero_iterations_is_the_zero_model() {
        let corpus = toy_corpus();
        let docs: Vec<Document> = corpus.iter().map(|(d, _)| d.clone()).collect();
        let v = TfIdfVectorizer::fit(&docs).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let m = train_logistic(&corpus, &v, &cfg).unwrap();
        assert!(m.lambda().iter().all(|&l| l == 0.0));
        assert_eq!(m.intercept(), 0.0);
        assert!(corpus.iter().all(|(d, _)| !m.decide(d)));
    }

    #[test]
    fn single_class_rejected() {
        let corpus = vec![(tokenize("good").unwrap(), true); 3];
        let v = TfIdfVectorizer::fit(&[tokenize("good").unwrap()]).unwrap();
        assert!(matches!(
            train_logistic(&corpus, &v, &TrainConfig::default()),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let corpus: Vec<(Document, bool)> = [
            ("great fine", true),
            ("bad not", false),
            ("not bad fine", true),
            ("awful bad", false),
            ("great", true),
        ]
        .iter()
        .map(|(t, y)| (tokenize(t).unwrap(), *y))
        .collect();
        let docs: Vec<Document> = corpus.iter().map(|(d, _)| d.clone()).collect();
        let v = TfIdfVectorizer::fit(&docs).unwrap();
        let cfg = TrainConfig {
            iterations: 300,
            ..TrainConfig::default()
        };
        let a = train_logistic(&corpus, &v, &cfg).unwrap();
        let b = train_logistic(&corpus, &v, &cfg).unwrap();
        let bits = |m: &LinearModel| -> Vec<u64> {
            m.lambda().iter().chain([&m.intercept()]).map(|x| x.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn parse_labeled_lines() {
        let rows = parse_labeled("1\tgreat food\n0\tbad").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].1 && !rows[1].1);
        assert!(parse_labeled("2\tx").is_err());
        assert!(parse_labeled("no tab").is_err());
    }

    fn model_strategy() -> impl Strategy<Value = LinearModel> {
        (proptest::collection::vec(-2.0f64..2.0, 4), -2.0f64..2.0).prop_map(|(lambda, l0)| {
            let v = TfIdfVectorizer::from_parts(
                ["a", "b", "c", "d"].map(String::from).to_vec(),
                vec![1.0, 1.5, 0.5, 2.0],
                4,
            )
            .unwrap();
            LinearModel::new(lambda, l0, v).unwrap()
        })
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop::sample::select(vec!["a", "b", "c", "d", "oov"]).prop_map(String::from),
            1..12,
        )
    }

    proptest! {
        #[test]
        fn decide_matches_logistic_threshold(m in model_strategy(), w in words()) {
            let doc = Document::from_words(&w).unwrap();
            let s = m.score(&doc);
            // sigmoid rounds to exactly 1/2 only for |s| below ~1e-16
            if s.abs() > 1e-12 {
                prop_assert_eq!(m.decide(&doc), sigmoid(s) > 0.5);
            }
            prop_assert!((s - m.score_vectorized(&doc)).abs() < 1e-9);
        }

        #[test]
        fn decide_permutation_invariant(m in model_strategy(), w in words()) {
            let mut rev = w.clone();
            rev.reverse();
            prop_assert_eq!(
                m.decide(&Document::from_words(&w).unwrap()),
                m.decide(&Document::from_words(&rev).unwrap())
            );
        }

        #[test]
        fn bound_linear_path_matches_materialized(
            m in model_strategy(),
            w in words(),
            bits in any::<u16>(),
        ) {
            let doc = Document::from_words(&w).unwrap();
            let mut mask = Mask::new(doc.len());
            for k in 0..doc.len() {
                mask.set(k, bits >> k & 1 == 1);
            }
            let fast = m.bind(&doc).predict_masked(&mask);
            let slow = m.predict(&doc.masked(|k| mask.is_masked(k)));
            prop_assert_eq!(fast, slow);
        }
    }
}
