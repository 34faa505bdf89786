//! Exhaustive p-Anchors.
//!
//! Given an evaluation function `p` and every candidate anchor:
//!
//! 1. `A1 = {A : p(A) >= 1 - ε}` (when empty, the anchors maximizing `p`),
//! 2. `A2` = the shortest anchors of `A1`,
//! 3. `A3` = the anchors of `A2` with the largest `p`,
//!
//! and one anchor of `A3` is returned.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::Classifier;
use crate::models::LinearModel;
use crate::perturbation::{PerturbationSampler, Scheme};
use crate::precision::{approx_precision_unchecked, empirical_precision, exact_precision};
use crate::rng;
use crate::text::{Anchor, Document, LocalStats, MultiplicityAnchor};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Cap on the number of enumerated candidates.
pub const ANCHOR_CAP: u128 = 1_000_000;

/// Anchor representation the engine can rank.
pub trait Candidate: Clone + Ord + Send + Sync {
    fn length(&self) -> usize;
}

impl Candidate for MultiplicityAnchor {
    fn length(&self) -> usize {
        self.len()
    }
}

impl Candidate for Anchor {
    fn length(&self) -> usize {
        self.len()
    }
}

/// An evaluation function `p : anchors -> [0, 1]`. Must be pure: the same
/// anchor always gets the same value.
pub trait Evaluator<A>: Sync {
    fn evaluate(&self, anchor: &A) -> Result<f64>;
}

impl<A, F> Evaluator<A> for F
where
    F: Fn(&A) -> f64 + Sync,
{
    fn evaluate(&self, anchor: &A) -> Result<f64> {
        Ok(self(anchor))
    }
}

/// `p = Prec`, by exact enumeration.
pub struct ExactEvaluator<'a> {
    pub model: &'a LinearModel,
    pub stats: &'a LocalStats,
}

impl Evaluator<MultiplicityAnchor> for ExactEvaluator<'_> {
    fn evaluate(&self, anchor: &MultiplicityAnchor) -> Result<f64> {
        Ok(exact_precision(self.model, self.stats, anchor)?.value)
    }
}

/// `p = Φ̄ ∘ L`.
pub struct ApproxEvaluator<'a> {
    pub model: &'a LinearModel,
    pub stats: &'a LocalStats,
}

impl Evaluator<MultiplicityAnchor> for ApproxEvaluator<'_> {
    fn evaluate(&self, anchor: &MultiplicityAnchor) -> Result<f64> {
        Ok(approx_precision_unchecked(self.model, self.stats, anchor))
    }
}

/// `p = Empprec_n`. Each anchor is sampled with its own seed derived from
/// the run seed and the anchor's index in the full enumeration, so the value
/// of an anchor does not depend on evaluation order or on which other anchors
/// are evaluated.
pub struct EmpiricalEvaluator<'a, C: ?Sized> {
    pub classifier: &'a C,
    pub example: &'a Document,
    pub stats: &'a LocalStats,
    pub n: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl<'a, C: Classifier + ?Sized> EmpiricalEvaluator<'a, C> {
    pub fn new(
        classifier: &'a C,
        example: &'a Document,
        stats: &'a LocalStats,
        n: usize,
        seed: u64,
    ) -> Self {
        Self {
            classifier,
            example,
            stats,
            n,
            seed,
            scheme: Scheme::Independent,
        }
    }

    fn run(&self, positions: Anchor, key: u64) -> Result<f64> {
        let sampler = PerturbationSampler::new(self.example, Some(positions), rng::derive_seed(self.seed, key))?
            .with_scheme(self.scheme);
        Ok(empirical_precision(self.classifier, &sampler, self.n)?.value)
    }
}

impl<C: Classifier + ?Sized> Evaluator<MultiplicityAnchor> for EmpiricalEvaluator<'_, C> {
    fn evaluate(&self, anchor: &MultiplicityAnchor) -> Result<f64> {
        self.run(anchor.to_positional(self.stats), anchor_rank(anchor, self.stats))
    }
}

impl<C: Classifier + ?Sized> Evaluator<Anchor> for EmpiricalEvaluator<'_, C> {
    fn evaluate(&self, anchor: &Anchor) -> Result<f64> {
        let key = anchor
            .positions()
            .iter()
            .fold(0x5851_F42D_4C95_7F2D, |h, &p| rng::derive_seed(h, p as u64));
        self.run(anchor.clone(), key)
    }
}

/// Mixed-radix index of `a` among all count vectors `0 <= a_j <= m_j`, i.e.
/// its position in lexicographic order (the zero vector has index 0).
pub fn anchor_rank(anchor: &MultiplicityAnchor, stats: &LocalStats) -> u64 {
    anchor
        .counts()
        .iter()
        .zip(stats.multiplicities())
        .fold(0u64, |r, (&a, &m)| r.wrapping_mul(m as u64 + 1).wrapping_add(a as u64))
}

/// Every count vector `0 <= a_j <= m_j` except zero, in lexicographic order.
pub fn enumerate_anchors(stats: &LocalStats) -> Result<Vec<MultiplicityAnchor>> {
    let m = stats.multiplicities();
    let total = m
        .iter()
        .fold(1u128, |acc, &mj| acc.saturating_mul(mj as u128 + 1))
        - 1;
    if total > ANCHOR_CAP {
        return Err(Error::TooManyAnchors {
            count: total,
            cap: ANCHOR_CAP,
        });
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut a = vec![0u32; m.len()];
    loop {
        let mut j = a.len();
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            if a[j] < m[j] {
                a[j] += 1;
                break;
            }
            a[j] = 0;
        }
        out.push(MultiplicityAnchor::from_counts(a.clone()));
    }
}

/// Every non-empty set of positions of a document of length `doc_len`,
/// ordered by bitmask value.
pub fn enumerate_positional(doc_len: usize) -> Result<Vec<Anchor>> {
    let total = if doc_len >= 127 {
        u128::MAX
    } else {
        (1u128 << doc_len) - 1
    };
    if total > ANCHOR_CAP {
        return Err(Error::TooManyAnchors {
            count: total,
            cap: ANCHOR_CAP,
        });
    }
    Ok((1u64..=total as u64)
        .map(|bits| {
            Anchor::new((0..doc_len).filter(|k| bits >> k & 1 == 1), doc_len)
                .expect("non-empty and in range")
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum TieBreak {
    /// Smallest anchor in the candidate ordering.
    #[default]
    Lexicographic,
    /// Uniform choice with a dedicated seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult<A> {
    pub chosen: A,
    pub p_value: f64,
    pub candidates_total: usize,
    pub size_a1: usize,
    pub size_a2: usize,
    pub size_a3: usize,
    pub epsilon: f64,
    pub tie_broken: bool,
    /// No candidate reached `1 - ε`; `A1` fell back to the maximizers of `p`.
    pub fallback: bool,
}

/// Indices of the three selection stages over a scored candidate list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stages {
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub a3: Vec<usize>,
    pub fallback: bool,
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

pub fn stages(values: &[f64], lengths: &[usize], epsilon: f64) -> Result<Stages> {
    check_epsilon(epsilon)?;
    if values.is_empty() {
        return Err(Error::InvalidAnchor("no candidate anchors".into()));
    }
    let threshold = 1.0 - epsilon;
    let mut a1: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= threshold).collect();
    let fallback = a1.is_empty();
    if fallback {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        a1 = (0..values.len()).filter(|&i| values[i] == best).collect();
    }
    let shortest = a1.iter().map(|&i| lengths[i]).min().expect("a1 non-empty");
    let a2: Vec<usize> = a1.iter().copied().filter(|&i| lengths[i] == shortest).collect();
    let best = a2.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max);
    let a3 = a2.iter().copied().filter(|&i| values[i] == best).collect();
    Ok(Stages {
        a1,
        a2,
        a3,
        fallback,
    })
}

/// Evaluates `p` on every candidate, in parallel, preserving order.
pub fn evaluate_all<A: Candidate, E: Evaluator<A> + ?Sized>(p: &E, anchors: &[A]) -> Result<Vec<f64>> {
    anchors.par_iter().map(|a| p.evaluate(a)).collect()
}

pub fn select<A: Candidate, E: Evaluator<A> + ?Sized>(
    p: &E,
    anchors: &[A],
    epsilon: f64,
    tie: TieBreak,
) -> Result<SelectionResult<A>> {
    check_epsilon(epsilon)?;
    let values = evaluate_all(p, anchors)?;
    select_scored(anchors, &values, epsilon, tie)
}

/// Three-stage reduction over precomputed values.
pub fn select_scored<A: Candidate>(
    anchors: &[A],
    values: &[f64],
    epsilon: f64,
    tie: TieBreak,
) -> Result<SelectionResult<A>> {
    if anchors.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            actual: values.len(),
        });
    }
    let lengths: Vec<usize> = anchors.iter().map(Candidate::length).collect();
    let st = stages(values, &lengths, epsilon)?;
    let pick = match tie {
        TieBreak::Lexicographic => *st
            .a3
            .iter()
            .min_by(|&&i, &&j| anchors[i].cmp(&anchors[j]))
            .expect("a3 non-empty"),
        TieBreak::Random { seed } => {
            let mut stream = rng::stream(seed, 0);
            st.a3[stream.random_range(0..st.a3.len())]
        }
    };
    Ok(SelectionResult {
        chosen: anchors[pick].clone(),
        p_value: values[pick],
        candidates_total: anchors.len(),
        size_a1: st.a1.len(),
        size_a2: st.a2.len(),
        size_a3: st.a3.len(),
        epsilon,
        tie_broken: st.a3.len() > 1,
        fallback: st.fallback,
    })
}
