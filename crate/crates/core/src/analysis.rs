//! Verification harness for linear TF-IDF models.
//!
//! * Gaussian bound: on every anchor with `ℓ(A) <= b/2`,
//!   `|Prec(A) - Φ̄(L(A))|` must stay below [`besseen_bound`].
//! * Prefix structure: with `p = Φ̄ ∘ L`, the selected anchor should saturate
//!   words in decreasing `λ_j idf_j` order (full multiplicity up to a split
//!   word, possibly partial there, nothing after) and only use words with
//!   `λ_j > 0`.
//! * Jaccard experiment: overlap between the selected anchor's words and the
//!   top-ranked words by `λ_j idf_j`, per confidence bucket.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    enumerate_anchors, select, ApproxEvaluator, EmpiricalEvaluator, Evaluator, ExactEvaluator,
    TieBreak, DEFAULT_EPSILON,
};
use crate::models::{sigmoid, LinearModel};
use crate::precision::{approx_precision_unchecked, besseen_bound, exact_precision, BoundReport};
use crate::rng;
use crate::text::{jaccard, local_stats, Document, LocalStats, MultiplicityAnchor};
use crate::vectorizer::TfIdfVectorizer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdfSource {
    /// Every word has IDF 1.
    Unit,
    /// IDF fitted on a random background corpus over the instance words.
    Fitted,
}

/// Which hypotheses generated instances must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Non-zero coefficients only; the example may be classified 0.
    Free,
    /// Non-zero `λ_j idf_j` and `f(ξ) = 1`.
    Prop1,
    /// Distinct `λ_j idf_j`, some `λ_j > 0`, `λ0 > -γ/2` and `f(ξ) = 1`.
    Prop2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub words: (usize, usize),
    pub multiplicity: (u32, u32),
    /// Coefficients are drawn from `[-lambda_bound, lambda_bound]`.
    pub lambda_bound: f64,
    pub idf: IdfSource,
    pub target: Target,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(target: Target, seed: u64) -> Self {
        Self {
            words: (2, 6),
            multiplicity: (1, 4),
            lambda_bound: 2.0,
            idf: IdfSource::Unit,
            target,
            seed,
        }
    }

    /// Instance number `index`; depends only on `self` and `index`.
    pub fn generate(&self, index: u64) -> Instance {
        let mut stream = rng::stream(self.seed, index);
        loop {
            if let Some(instance) = self.attempt(&mut stream) {
                return instance;
            }
        }
    }

    fn attempt(&self, stream: &mut impl Rng) -> Option<Instance> {
        let d = stream.random_range(self.words.0..=self.words.1);
        let names: Vec<String> = (1..=d).map(|j| format!("w{j}")).collect();
        let mut tokens: Vec<String> = Vec::new();
        for name in &names {
            let m = stream.random_range(self.multiplicity.0..=self.multiplicity.1);
            tokens.extend(std::iter::repeat_n(name.clone(), m as usize));
        }
        tokens.shuffle(stream);
        let example = Document::from_words(&tokens).ok()?;

        let vectorizer = match self.idf {
            IdfSource::Unit => {
                TfIdfVectorizer::from_parts(names.clone(), vec![1.0; d], 1).ok()?
            }
            IdfSource::Fitted => {
                let mut corpus = vec![example.clone()];
                for _ in 0..20 {
                    let words: Vec<&String> = names.iter().filter(|_| stream.random_bool(0.4)).collect();
                    if let Ok(doc) = Document::from_words(&words) {
                        corpus.push(doc);
                    }
                }
                TfIdfVectorizer::fit(&corpus).ok()?
            }
        };
        let bound = self.lambda_bound;
        let lambda: Vec<f64> = vectorizer
            .vocabulary()
            .words()
            .iter()
            .map(|_| stream.random_range(-bound..bound))
            .collect();
        if lambda.contains(&0.0) {
            return None;
        }
        let provisional = LinearModel::new(lambda.clone(), 0.0, vectorizer.clone()).ok()?;
        let stats = local_stats(&example).ok()?;
        let weights = provisional.word_weights(&stats);
        let partial = provisional.gamma(&stats);

        let intercept = match self.target {
            Target::Free => stream.random_range(-bound..bound),
            Target::Prop1 => stream.random_range(-bound..bound),
            Target::Prop2 => {
                if !has_distinct_weights(&weights) || !lambda.iter().any(|&l| l > 0.0) || partial <= 0.0 {
                    return None;
                }
                stream.random_range(-partial / 2.0..partial / 2.0)
            }
        };
        let model = LinearModel::new(lambda, intercept, vectorizer).ok()?;
        let instance = Instance {
            model,
            example,
            stats,
        };
        let accepted = match self.target {
            Target::Free => true,
            Target::Prop1 => instance.model.decide(&instance.example),
            Target::Prop2 => instance.prop2_hypotheses().is_ok(),
        };
        accepted.then_some(instance)
    }
}

fn has_distinct_weights(weights: &[f64]) -> bool {
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// A linear model together with the example it explains.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: LinearModel,
    pub example: Document,
    pub stats: LocalStats,
}

impl Instance {
    pub fn new(model: LinearModel, example: Document) -> Result<Self> {
        let stats = local_stats(&example)?;
        Ok(Self {
            model,
            example,
            stats,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma(&self.stats)
    }

    pub fn prop1_hypotheses(&self) -> Result<()> {
        if let Some(j) = self.model.word_weights(&self.stats).iter().position(|&w| w == 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "λ_j·idf_j = 0 for word {:?}",
                self.stats.words()[j]
            )));
        }
        Ok(())
    }

    pub fn prop2_hypotheses(&self) -> Result<()> {
        self.prop1_hypotheses()?;
        let weights = self.model.word_weights(&self.stats);
        if !has_distinct_weights(&weights) {
            return Err(Error::HypothesisViolated("λ_j·idf_j values are not distinct".into()));
        }
        if !self.model.word_lambdas(&self.stats).iter().any(|&l| l > 0.0) {
            return Err(Error::HypothesisViolated("no positive coefficient".into()));
        }
        if !self.model.decide(&self.example) {
            return Err(Error::HypothesisViolated("example is classified 0".into()));
        }
        let gamma = self.gamma();
        if self.model.intercept() <= -gamma / 2.0 {
            return Err(Error::HypothesisViolated(format!(
                "λ0 = {} <= -γ/2 = {}",
                self.model.intercept(),
                -gamma / 2.0
            )));
        }
        Ok(())
    }
}

/// Checks the Gaussian bound on one anchor with `ℓ(A) <= b/2`.
pub fn verify_prop1(instance: &Instance, anchor: &MultiplicityAnchor) -> Result<BoundReport> {
    instance.prop1_hypotheses()?;
    let b = instance.stats.doc_len();
    if 2 * anchor.len() > b {
        return Err(Error::HypothesisViolated(format!(
            "anchor length {} exceeds b/2 = {}",
            anchor.len(),
            b as f64 / 2.0
        )));
    }
    let exact = exact_precision(&instance.model, &instance.stats, anchor)?.value;
    let approx = approx_precision_unchecked(&instance.model, &instance.stats, anchor);
    let rhs = besseen_bound(&instance.model, &instance.stats)?;
    Ok(BoundReport::new((exact - approx).abs(), rhs))
}

/// One instance of the Gaussian-bound sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Row {
    pub instance: u64,
    pub d: usize,
    pub b: usize,
    pub anchors: usize,
    pub max_lhs: f64,
    pub rhs: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Summary {
    pub rows: Vec<Prop1Row>,
    pub anchors_checked: usize,
    pub failures: usize,
}

impl Prop1Summary {
    pub fn instances_holding(&self) -> usize {
        self.rows.iter().filter(|r| r.failures == 0).count()
    }
}

pub fn prop1_row(spec: &InstanceSpec, index: u64) -> Result<Prop1Row> {
    let instance = spec.generate(index);
    let b = instance.stats.doc_len();
    let mut row = Prop1Row {
        instance: index,
        d: instance.stats.distinct(),
        b,
        anchors: 0,
        max_lhs: 0.0,
        rhs: besseen_bound(&instance.model, &instance.stats)?,
        failures: 0,
    };
    for anchor in enumerate_anchors(&instance.stats)?
        .iter()
        .filter(|a| 2 * a.len() <= b)
    {
        let report = verify_prop1(&instance, anchor)?;
        row.anchors += 1;
        row.max_lhs = row.max_lhs.max(report.lhs);
        row.failures += !report.holds as usize;
    }
    Ok(row)
}

pub fn prop1_sweep(spec: &InstanceSpec, trials: u64) -> Result<Prop1Summary> {
    use rayon::prelude::*;
    let rows: Vec<Prop1Row> = (0..trials)
        .into_par_iter()
        .map(|i| prop1_row(spec, i))
        .collect::<Result<_>>()?;
    Ok(Prop1Summary {
        anchors_checked: rows.iter().map(|r| r.anchors).sum(),
        failures: rows.iter().map(|r| r.failures).sum(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub chosen: MultiplicityAnchor,
    /// Local word indices sorted by decreasing `λ_j idf_j`.
    pub ranking: Vec<usize>,
    /// Anchored counts in ranking order.
    pub ranked_counts: Vec<u32>,
    pub prefix_valid: bool,
    pub in_a_plus: bool,
    /// 1-based split index in ranking order, when prefix-structured.
    pub j0: Option<usize>,
}

impl Prop2Report {
    pub fn passes(&self) -> bool {
        self.prefix_valid && self.in_a_plus
    }
}

/// Word indices of `stats` sorted by decreasing `λ_j idf_j`; ties rejected.
pub fn rank_words(model: &LinearModel, stats: &LocalStats) -> Result<Vec<usize>> {
    let weights = model.word_weights(stats);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]));
    for pair in order.windows(2) {
        if weights[pair[0]] == weights[pair[1]] {
            return Err(Error::RankTies {
                first: stats.words()[pair[0]].clone(),
                second: stats.words()[pair[1]].clone(),
                weight: weights[pair[0]],
            });
        }
    }
    Ok(order)
}

/// Prefix structure of `anchor` in decreasing `λ_j idf_j` order, and whether
/// it only anchors words with `λ_j > 0`.
pub fn check_prefix_structure(
    anchor: &MultiplicityAnchor,
    model: &LinearModel,
    stats: &LocalStats,
) -> Result<Prop2Report> {
    let ranking = rank_words(model, stats)?;
    let counts: Vec<u32> = ranking.iter().map(|&j| anchor.counts()[j]).collect();
    let mult: Vec<u32> = ranking.iter().map(|&j| stats.multiplicities()[j]).collect();
    let split = counts
        .iter()
        .zip(&mult)
        .position(|(a, m)| a < m)
        .unwrap_or(counts.len() - 1);
    let prefix_valid = counts[split + 1..].iter().all(|&a| a == 0);
    let lambdas = model.word_lambdas(stats);
    let in_a_plus = anchor
        .counts()
        .iter()
        .zip(&lambdas)
        .all(|(&a, &l)| a == 0 || l > 0.0);
    Ok(Prop2Report {
        chosen: anchor.clone(),
        ranking,
        ranked_counts: counts,
        prefix_valid,
        in_a_plus,
        j0: prefix_valid.then_some(split + 1),
    })
}

/// Runs selection with `p = Φ̄ ∘ L` at ε = 0.05 and checks the result.
pub fn verify_prop2(instance: &Instance) -> Result<Prop2Report> {
    instance.prop2_hypotheses()?;
    let anchors = enumerate_anchors(&instance.stats)?;
    let p = ApproxEvaluator {
        model: &instance.model,
        stats: &instance.stats,
    };
    let result = select(&p, &anchors, DEFAULT_EPSILON, TieBreak::Lexicographic)?;
    check_prefix_structure(&result.chosen, &instance.model, &instance.stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Row {
    pub instance: u64,
    pub d: usize,
    pub b: usize,
    pub gamma: f64,
    pub lambda0: f64,
    pub chosen: String,
    pub ranked_counts: String,
    pub prefix_valid: bool,
    pub in_a_plus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Summary {
    pub rows: Vec<Prop2Row>,
    pub failures: usize,
}

pub fn prop2_row(spec: &InstanceSpec, index: u64) -> Result<Prop2Row> {
    let instance = spec.generate(index);
    let report = verify_prop2(&instance)?;
    let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    Ok(Prop2Row {
        instance: index,
        d: instance.stats.distinct(),
        b: instance.stats.doc_len(),
        gamma: instance.gamma(),
        lambda0: instance.model.intercept(),
        chosen: join(report.chosen.counts()),
        ranked_counts: join(&report.ranked_counts),
        prefix_valid: report.prefix_valid,
        in_a_plus: report.in_a_plus,
    })
}

pub fn prop2_sweep(spec: &InstanceSpec, trials: u64) -> Result<Prop2Summary> {
    use rayon::prelude::*;
    let rows: Vec<Prop2Row> = (0..trials)
        .into_par_iter()
        .map(|i| prop2_row(spec, i))
        .collect::<Result<_>>()?;
    Ok(Prop2Summary {
        failures: rows.iter().filter(|r| !(r.prefix_valid && r.in_a_plus)).count(),
        rows,
    })
}

/// Confidence bucket over positively classified documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bucket {
    All,
    /// Documents whose logistic score is below the threshold.
    Below(f64),
}

impl Bucket {
    pub fn label(&self) -> String {
        match self {
            Bucket::All => "full".into(),
            Bucket::Below(t) => format!("pr<{t}"),
        }
    }

    fn contains(&self, confidence: f64) -> bool {
        match self {
            Bucket::All => true,
            Bucket::Below(t) => confidence < *t,
        }
    }

    /// Buckets used in the reference experiment.
    pub fn standard() -> Vec<Bucket> {
        vec![Bucket::All, Bucket::Below(0.85), Bucket::Below(0.75)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EvalMode {
    Exact,
    Empirical { n: usize },
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardConfig {
    pub buckets: Vec<Bucket>,
    pub repetitions: usize,
    pub eval: EvalMode,
    pub epsilon: f64,
    pub seed: u64,
    pub random_ties: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: String,
    pub documents: usize,
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardReport {
    pub rows: Vec<BucketStats>,
    pub positives: usize,
    /// Positive documents skipped because their anchor space exceeds the
    /// enumeration cap.
    pub skipped: usize,
}

/// Jaccard index between the anchor's word set and the `k` local words with
/// the largest `λ_j idf_j`, `k` being the number of anchored words. Ties in the
/// ranking keep first-occurrence order.
pub fn top_word_jaccard(anchor: &MultiplicityAnchor, model: &LinearModel, stats: &LocalStats) -> Result<f64> {
    let words = anchor.word_set(stats);
    let weights = model.word_weights(stats);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]));
    let top: BTreeSet<String> = order
        .iter()
        .take(words.len())
        .map(|&j| stats.words()[j].clone())
        .collect();
    jaccard(&words, &top)
}

fn select_for(
    model: &LinearModel,
    doc: &Document,
    stats: &LocalStats,
    cfg: &JaccardConfig,
    seed: u64,
) -> Result<MultiplicityAnchor> {
    let anchors = enumerate_anchors(stats)?;
    let tie = if cfg.random_ties {
        TieBreak::Random {
            seed: rng::derive_seed(seed, 1),
        }
    } else {
        TieBreak::Lexicographic
    };
    let p: Box<dyn Evaluator<MultiplicityAnchor> + '_> = match cfg.eval {
        EvalMode::Exact => Box::new(ExactEvaluator { model, stats }),
        EvalMode::Approx => Box::new(ApproxEvaluator { model, stats }),
        EvalMode::Empirical { n } => Box::new(EmpiricalEvaluator::new(model, doc, stats, n, seed)),
    };
    Ok(select(p.as_ref(), &anchors, cfg.epsilon, tie)?.chosen)
}

pub fn jaccard_experiment(corpus: &[Document], model: &LinearModel, cfg: &JaccardConfig) -> Result<JaccardReport> {
    use rayon::prelude::*;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let reps = cfg.repetitions.max(1);
    let positives: Vec<(usize, &Document)> = corpus
        .iter()
        .enumerate()
        .filter(|(_, d)| model.decide(d))
        .collect();
    // (confidence, jaccard per repetition) or None when skipped
    let per_doc: Vec<Option<(f64, Vec<f64>)>> = positives
        .par_iter()
        .map(|&(i, doc)| -> Result<Option<(f64, Vec<f64>)>> {
            let stats = local_stats(doc)?;
            let confidence = sigmoid(model.score(doc));
            let mut values = Vec::with_capacity(reps);
            for r in 0..reps {
                let seed = rng::derive_seed(cfg.seed, (i * reps + r) as u64);
                match select_for(model, doc, &stats, cfg, seed) {
                    Ok(anchor) => values.push(top_word_jaccard(&anchor, model, &stats)?),
                    Err(Error::TooManyAnchors { .. } | Error::TooLarge { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(Some((confidence, values)))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<&(f64, Vec<f64>)> = per_doc.iter().flatten().collect();
    let rows = cfg
        .buckets
        .iter()
        .map(|bucket| {
            let members: Vec<&&(f64, Vec<f64>)> = kept.iter().filter(|(c, _)| bucket.contains(*c)).collect();
            if members.is_empty() {
                return Err(Error::EmptyBucket(bucket.label()));
            }
            let values: Vec<f64> = members.iter().flat_map(|(_, v)| v.iter().copied()).collect();
            let (mean, sd) = mean_sd(&values);
            Ok(BucketStats {
                bucket: bucket.label(),
                documents: members.len(),
                runs: values.len(),
                mean,
                sd,
            })
        })
        .collect::<Result<_>>()?;
    Ok(JaccardReport {
        rows,
        positives: positives.len(),
        skipped: per_doc.iter().filter(|d| d.is_none()).count(),
    })
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Synthetic review-like corpus with a latent sentiment label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub documents: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a token comes from the sentiment's own word list.
    pub on_topic: f64,
    /// Probability that a token comes from the opposite list.
    pub off_topic: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            documents: 500,
            min_len: 4,
            max_len: 8,
            on_topic: 0.35,
            off_topic: 0.15,
            seed: 0,
        }
    }
}

const POSITIVE_WORDS: [&str; 6] = ["great", "good", "fine", "tasty", "friendly", "fresh"];
const NEGATIVE_WORDS: [&str; 6] = ["bad", "awful", "slow", "bland", "rude", "cold"];
const NEUTRAL_WORDS: [&str; 8] = ["food", "place", "service", "table", "menu", "staff", "the", "was"];

pub fn synthetic_corpus(spec: &SyntheticCorpusSpec) -> Vec<(Document, bool)> {
    let mut stream = rng::stream(spec.seed, 0xC0FFEE);
    (0..spec.documents)
        .map(|_| {
            let positive = stream.random_bool(0.5);
            let (own, other) = if positive {
                (&POSITIVE_WORDS, &NEGATIVE_WORDS)
            } else {
                (&NEGATIVE_WORDS, &POSITIVE_WORDS)
            };
            let len = stream.random_range(spec.min_len..=spec.max_len);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let u: f64 = stream.random();
                    let list: &[&str] = if u < spec.on_topic {
                        own
                    } else if u < spec.on_topic + spec.off_topic {
                        other
                    } else {
                        &NEUTRAL_WORDS
                    };
                    list[stream.random_range(0..list.len())]
                })
                .collect();
            (Document::from_words(&words).expect("len >= 1"), positive)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_logistic, TrainConfig};
    use crate::text::tokenize;

    fn w_instance() -> Instance {
        let v = TfIdfVectorizer::from_parts(vec!["w1".into(), "w2".into()], vec![1.0, 1.0], 1)
            .unwrap();
        let model = LinearModel::new(vec![1.0, -1.0], 0.0, v).unwrap();
        Instance::new(model, tokenize("w1 w1 w2").unwrap()).unwrap()
    }

    fn anchor(i: &Instance, c: &[u32]) -> MultiplicityAnchor {
        MultiplicityAnchor::new(c.to_vec(), &i.stats).unwrap()
    }

    #[test]
    fn prop1_w_example() {
        let w = w_instance();
        let r = verify_prop1(&w, &anchor(&w, &[1, 0])).unwrap();
        assert!((r.lhs - 0.171_350_396_474_857_4).abs() < 1e-12);
        assert!((r.rhs - 14.30).abs() < 1e-12);
        assert!(r.holds);
        assert!(matches!(
            verify_prop1(&w, &anchor(&w, &[2, 0])),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn prefix_examples() {
        let w = w_instance();
        let r = check_prefix_structure(&anchor(&w, &[2, 0]), &w.model, &w.stats).unwrap();
        assert!(r.prefix_valid && r.in_a_plus);
        assert_eq!(r.j0, Some(2));

        let r = check_prefix_structure(&anchor(&w, &[0, 1]), &w.model, &w.stats).unwrap();
        assert!(!r.prefix_valid && !r.in_a_plus);
        assert_eq!(r.j0, None);

        let r = check_prefix_structure(&anchor(&w, &[1, 0]), &w.model, &w.stats).unwrap();
        assert!(r.prefix_valid);
        assert_eq!(r.j0, Some(1));

        let r = check_prefix_structure(&anchor(&w, &[2, 1]), &w.model, &w.stats).unwrap();
        assert!(r.prefix_valid && !r.in_a_plus);
    }

    #[test]
    fn prefix_uses_weight_order_not_position() {
        // same model, example written so that w2 occurs first
        let w = w_instance();
        let inst = Instance::new(w.model.clone(), tokenize("w2 w1 w1").unwrap()).unwrap();
        let r = check_prefix_structure(&anchor(&inst, &[0, 2]), &inst.model, &inst.stats).unwrap();
        assert_eq!(r.ranking, [1, 0]);
        assert!(r.prefix_valid && r.in_a_plus);
    }

    #[test]
    fn rank_ties_rejected() {
        let v = TfIdfVectorizer::from_parts(vec!["a".into(), "b".into()], vec![1.0, 1.0], 1).unwrap();
        let model = LinearModel::new(vec![0.5, 0.5], 0.0, v).unwrap();
        let inst = Instance::new(model, tokenize("a b").unwrap()).unwrap();
        let a = anchor(&inst, &[1, 0]);
        assert!(matches!(
            check_prefix_structure(&a, &inst.model, &inst.stats),
            Err(Error::RankTies { .. })
        ));
    }

    #[test]
    fn prop2_w_example() {
        let w = w_instance();
        assert_eq!(w.gamma(), 1.0);
        let r = verify_prop2(&w).unwrap();
        assert_eq!(r.chosen.counts(), [2, 0]);
        assert!(r.passes());
    }

    #[test]
    fn prop2_gate() {
        let w = w_instance();
        let low = LinearModel::new(w.model.lambda().to_vec(), -0.5, w.model.vectorizer().clone()).unwrap();
        // γ = 0.5, -γ/2 = -0.25 >= λ0
        let inst = Instance::new(low, w.example.clone()).unwrap();
        assert!(matches!(verify_prop2(&inst), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn generated_instances_satisfy_targets() {
        for target in [Target::Prop1, Target::Prop2] {
            for idf in [IdfSource::Unit, IdfSource::Fitted] {
                let spec = InstanceSpec {
                    idf,
                    ..InstanceSpec::new(target, 3)
                };
                for i in 0..40 {
                    let inst = spec.generate(i);
                    assert!(inst.model.decide(&inst.example));
                    assert!((2..=6).contains(&inst.stats.distinct()));
                    match target {
                        Target::Prop2 => inst.prop2_hypotheses().unwrap(),
                        _ => inst.prop1_hypotheses().unwrap(),
                    }
                }
            }
        }
        let spec = InstanceSpec::new(Target::Prop1, 9);
        assert_eq!(spec.generate(4).model, spec.generate(4).model);
    }

    #[test]
    fn prefix_check_invariant_to_relabeling() {
        let spec = InstanceSpec::new(Target::Prop2, 21);
        for i in 0..30 {
            let inst = spec.generate(i);
            let report = verify_prop2(&inst).unwrap();
            // rename every word; ranking by weight is unchanged
            let renamed: Vec<String> = inst.stats.words().iter().map(|w| format!("z{w}")).collect();
            let idf: Vec<f64> = inst.stats.words().iter().map(|w| inst.model.vectorizer().idf_of(w)).collect();
            let lambda: Vec<f64> = inst.model.word_lambdas(&inst.stats);
            let v = TfIdfVectorizer::from_parts(renamed.clone(), idf, 1).unwrap();
            let model = LinearModel::new(lambda, inst.model.intercept(), v).unwrap();
            let tokens: Vec<String> = inst
                .stats
                .position_word()
                .iter()
                .map(|&j| renamed[j].clone())
                .collect();
            let other = Instance::new(model, Document::from_words(&tokens).unwrap()).unwrap();
            let moved = check_prefix_structure(&report.chosen, &other.model, &other.stats).unwrap();
            assert_eq!(moved.prefix_valid, report.prefix_valid);
            assert_eq!(moved.in_a_plus, report.in_a_plus);
            assert_eq!(moved.j0, report.j0);
        }
    }

    #[test]
    fn jaccard_top_words() {
        let w = w_instance();
        assert_eq!(top_word_jaccard(&anchor(&w, &[2, 0]), &w.model, &w.stats).unwrap(), 1.0);
        assert_eq!(top_word_jaccard(&anchor(&w, &[0, 1]), &w.model, &w.stats).unwrap(), 0.0);
        assert_eq!(top_word_jaccard(&anchor(&w, &[1, 1]), &w.model, &w.stats).unwrap(), 1.0);
    }

    #[test]
    fn jaccard_experiment_small() {
        let corpus = synthetic_corpus(&SyntheticCorpusSpec {
            documents: 80,
            ..SyntheticCorpusSpec::default()
        });
        let docs: Vec<Document> = corpus.iter().map(|(d, _)| d.clone()).collect();
        let v = TfIdfVectorizer::fit(&docs).unwrap();
        let model = train_logistic(&corpus, &v, &TrainConfig::default()).unwrap();
        let cfg = JaccardConfig {
            buckets: vec![Bucket::All, Bucket::Below(0.0)],
            repetitions: 1,
            eval: EvalMode::Approx,
            epsilon: 0.05,
            seed: 0,
            random_ties: false,
        };
        assert!(matches!(
            jaccard_experiment(&docs, &model, &cfg),
            Err(Error::EmptyBucket(_))
        ));
        let cfg = JaccardConfig {
            buckets: vec![Bucket::All],
            ..cfg
        };
        let report = jaccard_experiment(&docs, &model, &cfg).unwrap();
        assert!(report.positives > 0);
        assert!((0.0..=1.0).contains(&report.rows[0].mean));
    }

    #[test]
    fn synthetic_corpus_deterministic() {
        let spec = SyntheticCorpusSpec::default();
        let a = synthetic_corpus(&spec);
        assert_eq!(a.len(), 500);
        assert_eq!(a, synthetic_corpus(&spec));
        assert!(a.iter().any(|(_, y)| *y) && a.iter().any(|(_, y)| !*y));
    }

    #[test]
    fn mean_sd_basic() {
        assert_eq!(mean_sd(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
