//! Evaluation functions for anchors: exact, empirical and approximate
//! precision, plus coverage and the Berry–Esseen bound.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{Classifier, LinearModel};
use crate::perturbation::{binomial_row, Mask, PerturbationSampler};
use crate::text::{Document, LocalStats, MultiplicityAnchor};
use crate::{Error, Result};

/// Numerical constant of the Berry–Esseen-type precision bound.
pub const BERRY_ESSEEN_CONSTANT: f64 = 7.15;

/// Cap on the number of outcomes enumerated by [`exact_precision`].
pub const EXACT_OUTCOME_CAP: u128 = 10_000_000;

/// Largest total free count for which outcome weights stay exact integers.
const DYADIC_EXPONENT_MAX: u32 = 62;

/// `numerator / 2^exponent`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    pub numerator: u64,
    pub exponent: u32,
}

impl Dyadic {
    pub fn new(mut numerator: u64, mut exponent: u32) -> Self {
        while exponent > 0 && numerator.is_multiple_of(2) {
            numerator /= 2;
            exponent -= 1;
        }
        Self {
            numerator,
            exponent,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / 2f64.powi(self.exponent as i32)
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub value: f64,
    /// Number of samples; 0 for exact and approximate values.
    pub n: usize,
    /// `sqrt(value (1 - value) / n)` for empirical values, 0 otherwise.
    pub stderr: f64,
    /// Exact dyadic value when the enumeration ran in integer arithmetic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Dyadic>,
}

impl PrecisionEstimate {
    fn deterministic(value: f64, exact: Option<Dyadic>) -> Self {
        Self {
            value,
            n: 0,
            stderr: 0.0,
            exact,
        }
    }
}

/// Exact precision of a linear model:
/// `P(λ0 + Σ_j λ_j idf_j M_j > 0)` with independent `M_j ~ a_j + Bin(m_j - a_j, 1/2)`.
pub fn exact_precision(
    model: &LinearModel,
    stats: &LocalStats,
    anchor: &MultiplicityAnchor,
) -> Result<PrecisionEstimate> {
    exact_linear_precision(
        model.intercept(),
        &model.word_weights(stats),
        stats.multiplicities(),
        anchor.counts(),
    )
}

/// [`exact_precision`] on raw per-word weights `λ_j idf_j`.
pub fn exact_linear_precision(
    intercept: f64,
    weights: &[f64],
    multiplicities: &[u32],
    anchored: &[u32],
) -> Result<PrecisionEstimate> {
    let d = weights.len();
    if multiplicities.len() != d || anchored.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: anchored.len().min(multiplicities.len()),
        });
    }
    let mut free = Vec::with_capacity(d);
    for (&m, &a) in multiplicities.iter().zip(anchored) {
        if a > m {
            return Err(Error::InvalidRange {
                multiplicity: m,
                anchored: a,
            });
        }
        free.push(m - a);
    }
    let outcomes = free
        .iter()
        .try_fold(1u128, |acc, &f| acc.checked_mul(f as u128 + 1))
        .filter(|&o| o <= EXACT_OUTCOME_CAP)
        .ok_or(Error::TooLarge {
            outcomes: free
                .iter()
                .fold(1u128, |acc, &f| acc.saturating_mul(f as u128 + 1)),
            cap: EXACT_OUTCOME_CAP,
        })?;
    debug_assert!(outcomes >= 1);

    let exponent: u64 = free.iter().map(|&f| f as u64).sum();
    let score = |k: &[u32]| {
        weights
            .iter()
            .zip(anchored)
            .zip(k)
            .fold(intercept, |s, ((w, &a), &k)| s + w * (a + k) as f64)
    };

    if exponent <= DYADIC_EXPONENT_MAX as u64 {
        let rows: Vec<Vec<u128>> = free.iter().map(|&f| binomial_row(f)).collect();
        let mut positive: u128 = 0;
        for_each_outcome(&free, |k| {
            if score(k) > 0.0 {
                positive += k
                    .iter()
                    .zip(&rows)
                    .map(|(&k, row)| row[k as usize])
                    .product::<u128>();
            }
        });
        let exact = Dyadic::new(positive as u64, exponent as u32);
        Ok(PrecisionEstimate::deterministic(exact.to_f64(), Some(exact)))
    } else {
        let pmfs: Vec<Vec<f64>> = free.iter().map(|&f| binomial_half_pmf(f)).collect();
        let mut positive = 0.0;
        for_each_outcome(&free, |k| {
            if score(k) > 0.0 {
                positive += k
                    .iter()
                    .zip(&pmfs)
                    .map(|(&k, pmf)| pmf[k as usize])
                    .product::<f64>();
            }
        });
        Ok(PrecisionEstimate::deterministic(positive.clamp(0.0, 1.0), None))
    }
}

/// Odometer over `0..=free[0] × 0..=free[1] × ...`.
fn for_each_outcome(free: &[u32], mut visit: impl FnMut(&[u32])) {
    let mut k = vec![0u32; free.len()];
    loop {
        visit(&k);
        let mut j = k.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if k[j] < free[j] {
                k[j] += 1;
                break;
            }
            k[j] = 0;
        }
    }
}

/// `Bin(n, 1/2)` probabilities in floating point, via log-gamma.
fn binomial_half_pmf(n: u32) -> Vec<f64> {
    let n_f = n as f64;
    let log_norm = libm::lgamma(n_f + 1.0) - n_f * std::f64::consts::LN_2;
    (0..=n)
        .map(|k| {
            let k = k as f64;
            (log_norm - libm::lgamma(k + 1.0) - libm::lgamma(n_f - k + 1.0)).exp()
        })
        .collect()
}

/// Monte Carlo precision: the fraction of `n` perturbed samples classified 1.
pub fn empirical_precision<C: Classifier + ?Sized>(
    classifier: &C,
    sampler: &PerturbationSampler<'_>,
    n: usize,
) -> Result<PrecisionEstimate> {
    if n == 0 {
        return Err(Error::NoSamples);
    }
    let local = classifier.bind(sampler.example());
    let batch = sampler.masks(n);
    let len = sampler.example().len();
    let positive: usize = (0..n)
        .into_par_iter()
        .with_min_len(4096)
        .map_init(
            || Mask::new(len),
            |mask, i| {
                batch.fill(i, mask);
                local.predict_masked(mask) as usize
            },
        )
        .sum();
    let value = positive as f64 / n as f64;
    Ok(PrecisionEstimate {
        value,
        n,
        stderr: (value * (1.0 - value) / n as f64).sqrt(),
        exact: None,
    })
}

/// Standard normal CDF `Φ(x) = erfc(-x / √2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `Φ̄(x) = 1 - Φ(x)`, computed without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Numerator and denominator of the Gaussian statistic
/// `L(A) = (-λ0 - ½ Σ w_j (m_j + a_j)) / sqrt(¼ Σ w_j² (m_j - a_j))`, `w_j = λ_j idf_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistic {
    pub numerator: f64,
    pub denominator: f64,
}

impl Statistic {
    /// `L(A)`; infinite or NaN when the denominator vanishes.
    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }

    /// `Φ̄(L(A))`. With a zero denominator the sum is deterministic and the
    /// sign of the numerator decides: 1 if negative, 0 if positive, 1/2 if 0.
    pub fn surrogate_precision(&self) -> f64 {
        if self.denominator > 0.0 {
            normal_sf(self.value())
        } else if self.numerator < 0.0 {
            1.0
        } else if self.numerator > 0.0 {
            0.0
        } else {
            0.5
        }
    }
}

pub fn statistic(weights: &[f64], intercept: f64, multiplicities: &[u32], anchored: &[u32]) -> Statistic {
    let mut shift = 0.0;
    let mut variance = 0.0;
    for ((w, &m), &a) in weights.iter().zip(multiplicities).zip(anchored) {
        shift += w * (m + a) as f64;
        variance += w * w * (m - a) as f64;
    }
    Statistic {
        numerator: -intercept - 0.5 * shift,
        denominator: (0.25 * variance).sqrt(),
    }
}

fn check_weights(weights: &[f64], stats: &LocalStats) -> Result<()> {
    match weights.iter().position(|&w| w == 0.0) {
        Some(j) => Err(Error::HypothesisViolated(format!(
            "λ_j·idf_j = 0 for word {:?}",
            stats.words()[j]
        ))),
        None => Ok(()),
    }
}

/// `Φ̄(L(A))`. Fails with `HypothesisViolated` when some local word has
/// `λ_j idf_j = 0`; [`approx_precision_unchecked`] computes it regardless.
pub fn approx_precision(model: &LinearModel, stats: &LocalStats, anchor: &MultiplicityAnchor) -> Result<f64> {
    check_weights(&model.word_weights(stats), stats)?;
    Ok(approx_precision_unchecked(model, stats, anchor))
}

pub fn approx_precision_unchecked(model: &LinearModel, stats: &LocalStats, anchor: &MultiplicityAnchor) -> f64 {
    statistic(
        &model.word_weights(stats),
        model.intercept(),
        stats.multiplicities(),
        anchor.counts(),
    )
    .surrogate_precision()
}

/// `C · (max w² / min w²)^{3/2} · (max m / min m)^{3/2} / √d` over the local
/// words, `w_j = λ_j idf_j`. Applies to anchors with `ℓ(A) ≤ b/2`.
pub fn besseen_bound(model: &LinearModel, stats: &LocalStats) -> Result<f64> {
    let weights = model.word_weights(stats);
    check_weights(&weights, stats)?;
    Ok(bound_from_parts(&weights, stats.multiplicities()))
}

pub(crate) fn bound_from_parts(weights: &[f64], multiplicities: &[u32]) -> f64 {
    let sq = weights.iter().map(|w| w * w);
    let (lo, hi) = sq.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let m_lo = *multiplicities.iter().min().expect("non-empty") as f64;
    let m_hi = *multiplicities.iter().max().expect("non-empty") as f64;
    BERRY_ESSEEN_CONSTANT * (hi / lo).powf(1.5) * (m_hi / m_lo).powf(1.5) / (weights.len() as f64).sqrt()
}

/// Result of checking the Gaussian bound on one anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `|Prec(A) - Φ̄(L(A))|`
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

/// Fraction of corpus documents containing every required word at least the
/// required number of times.
pub fn coverage(requirement: &[(String, u32)], corpus: &[Document]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let hits = corpus
        .iter()
        .filter(|doc| {
            let counts = doc.word_counts();
            requirement
                .iter()
                .all(|(w, a)| counts.get(w.as_str()).copied().unwrap_or(0) >= *a)
        })
        .count();
    Ok(hits as f64 / corpus.len() as f64)
}
