//! The Anchors sampling scheme.
//!
//! Every position outside the anchor is replaced by `UNK` independently with
//! probability 1/2. For word `j` with multiplicity `m_j` and `a_j` anchored
//! occurrences, the surviving count is then `a_j + Bin(m_j - a_j, 1/2)`.

use rand::seq::index;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::text::{Anchor, Document};
use crate::{Error, Result};

/// Bitset over document positions; a set bit means "replaced by UNK".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    blocks: Vec<u64>,
    len: usize,
}

impl Mask {
    pub fn new(len: usize) -> Self {
        Self {
            blocks: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    #[inline]
    pub fn is_masked(&self, k: usize) -> bool {
        self.blocks[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, masked: bool) {
        let bit = 1u64 << (k % 64);
        if masked {
            self.blocks[k / 64] |= bit;
        } else {
            self.blocks[k / 64] &= !bit;
        }
    }

    pub fn masked_count(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Each free position is replaced independently with probability 1/2.
    #[default]
    Independent,
    /// Batch scheme: for each free position, draw `c ~ Bin(n, 1/2)` and
    /// replace it in `c` copies chosen uniformly without replacement. Each
    /// position is marginally masked with probability 1/2 but samples within
    /// one batch are not independent, and a batch depends on `n`.
    CopyBased,
}

#[derive(Debug, Clone)]
pub struct PerturbationSampler<'a> {
    example: &'a Document,
    anchor: Option<Anchor>,
    seed: u64,
    scheme: Scheme,
    // free[i]: bits of block i that may be masked
    free: Vec<u64>,
}

impl<'a> PerturbationSampler<'a> {
    /// Sampler for `example` keeping the positions of `anchor`. `None` keeps
    /// nothing.
    pub fn new(example: &'a Document, anchor: Option<Anchor>, seed: u64) -> Result<Self> {
        let len = example.len();
        let mut free = Mask::new(len);
        for k in 0..len {
            free.set(k, true);
        }
        if let Some(a) = &anchor {
            if let Some(&p) = a.positions().iter().find(|&&p| p >= len) {
                return Err(Error::InvalidAnchor(format!(
                    "position {p} outside a document of length {len}"
                )));
            }
            for &p in a.positions() {
                free.set(p, false);
            }
        }
        Ok(Self {
            example,
            anchor,
            seed,
            scheme: Scheme::Independent,
            free: free.blocks,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn example(&self) -> &Document {
        self.example
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Mask of sample `index` under the independent scheme; a pure function of
    /// `(seed, index, position)`.
    pub fn fill_mask(&self, index: u64, mask: &mut Mask) {
        debug_assert_eq!(mask.len, self.example.len());
        for (i, (out, free)) in mask.blocks.iter_mut().zip(&self.free).enumerate() {
            *out = rng::keyed_bits(self.seed, index, i as u64) & free;
        }
    }

    /// Masks for a batch of `n` samples, honoring the configured scheme.
    pub fn masks(&self, n: usize) -> MaskBatch<'_> {
        match self.scheme {
            Scheme::Independent => MaskBatch::Keyed(self),
            Scheme::CopyBased => MaskBatch::Materialized(self.copy_based_masks(n)),
        }
    }

    fn copy_based_masks(&self, n: usize) -> Vec<Mask> {
        let len = self.example.len();
        let mut masks = vec![Mask::new(len); n];
        if n == 0 {
            return masks;
        }
        let binomial = Binomial::new(n as u64, 0.5).expect("p = 1/2 is valid");
        for k in (0..len).filter(|&k| self.free[k / 64] >> (k % 64) & 1 == 1) {
            let mut stream = rng::stream(self.seed, k as u64);
            let copies = binomial.sample(&mut stream) as usize;
            for i in index::sample(&mut stream, n, copies) {
                masks[i].set(k, true);
            }
        }
        masks
    }

    /// Draws `n` perturbed documents.
    pub fn sample(&self, n: usize) -> Vec<Document> {
        let batch = self.masks(n);
        let mut mask = Mask::new(self.example.len());
        (0..n)
            .map(|i| {
                batch.fill(i, &mut mask);
                self.example.masked(|k| mask.is_masked(k))
            })
            .collect()
    }
}

pub enum MaskBatch<'s> {
    Keyed(&'s PerturbationSampler<'s>),
    Materialized(Vec<Mask>),
}

impl MaskBatch<'_> {
    pub fn fill(&self, index: usize, mask: &mut Mask) {
        match self {
            MaskBatch::Keyed(s) => s.fill_mask(index as u64, mask),
            MaskBatch::Materialized(masks) => mask.clone_from(&masks[index]),
        }
    }
}

/// Exact law of the surviving count of a word with `multiplicity`
/// occurrences, `anchored` of them fixed: `P(M = anchored + k) = C(f, k) / 2^f`
/// with `f = multiplicity - anchored`. Entries are the numerators `C(f, k)`
/// over the common denominator `2^f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplicityLaw {
    pub anchored: u32,
    pub numerators: Vec<u128>,
    pub exponent: u32,
}

impl MultiplicityLaw {
    pub fn support(&self) -> std::ops::RangeInclusive<u32> {
        self.anchored..=self.anchored + self.numerators.len() as u32 - 1
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let denom = 2f64.powi(self.exponent as i32);
        self.numerators.iter().map(|&c| c as f64 / denom).collect()
    }
}

pub fn multiplicity_pmf(multiplicity: u32, anchored: u32) -> Result<MultiplicityLaw> {
    if anchored > multiplicity {
        return Err(Error::InvalidRange {
            multiplicity,
            anchored,
        });
    }
    let free = multiplicity - anchored;
    // C(n, k) * (n - k) stays below u128::MAX up to here
    if free > 120 {
        return Err(Error::TooLarge {
            outcomes: free as u128 + 1,
            cap: 121,
        });
    }
    Ok(MultiplicityLaw {
        anchored,
        numerators: binomial_row(free),
        exponent: free,
    })
}

/// Row `n` of Pascal's triangle.
pub(crate) fn binomial_row(n: u32) -> Vec<u128> {
    let mut row = vec![1u128];
    for k in 0..n as u128 {
        let next = row[k as usize] * (n as u128 - k) / (k + 1);
        row.push(next);
    }
    row
}
