//! Finite-alphabet stationary source models.
//!
//! Every model can be sampled reproducibly from a `u64` seed and can evaluate
//! exact n-block probabilities (in log2) for the block lengths it supports.
//! Positions are 1-based in documentation and error messages: `x_1^n` is the
//! first `n` symbols of a sequence.

mod block_repeat;
mod codebook;
mod dither;
mod markov;
pub mod spec_file;

pub use block_repeat::{build_adversarial_member, BlockRepeatSource, SamplePhase};
pub use codebook::{build_cyclic_codebooks, hamming, CyclicCodebook};
pub use dither::{Dither, DitheredMarkov};
pub use markov::MarkovSource;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dense n-block table the crate will enumerate (`A^n` entries).
pub const MAX_DENSE_BLOCKS: usize = 1 << 20;

/// A finite alphabet `{0, .., size-1}` with `2 <= size <= 256`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u16);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);

    pub fn new(size: usize) -> Result<Self> {
        if (2..=256).contains(&size) {
            Ok(Alphabet(size as u16))
        } else {
            Err(Error::InvalidAlphabet(size))
        }
    }

    pub fn size(self) -> usize {
        self.0 as usize
    }

    pub fn contains(self, symbol: u8) -> bool {
        (symbol as usize) < self.size()
    }

    /// Number of blocks of length `n`, or `None` on overflow.
    pub fn block_count(self, n: usize) -> Option<usize> {
        self.size().checked_pow(u32::try_from(n).ok()?)
    }

    /// Dense table index of a block, first symbol most significant.
    pub fn block_index(self, block: &[u8]) -> usize {
        block
            .iter()
            .fold(0usize, |acc, &s| acc * self.size() + s as usize)
    }

    /// Inverse of [`Alphabet::block_index`].
    pub fn block_from_index(self, mut index: usize, n: usize) -> Vec<u8> {
        let a = self.size();
        let mut out = vec![0u8; n];
        for slot in out.iter_mut().rev() {
            *slot = (index % a) as u8;
            index /= a;
        }
        out
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;
    fn try_from(size: usize) -> Result<Self> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}

/// A validated sequence of symbols over an [`Alphabet`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequence {
    alphabet: Alphabet,
    data: Vec<u8>,
}

impl Sequence {
    pub fn new(alphabet: Alphabet, data: Vec<u8>) -> Result<Self> {
        if let Some((i, &s)) = data
            .iter()
            .enumerate()
            .find(|(_, &s)| !alphabet.contains(s))
        {
            return Err(Error::InvalidSymbol {
                position: i + 1,
                symbol: s,
                size: alphabet.size(),
            });
        }
        Ok(Sequence { alphabet, data })
    }

    pub(crate) fn from_trusted(alphabet: Alphabet, data: Vec<u8>) -> Self {
        debug_assert!(data.iter().all(|&s| alphabet.contains(s)));
        Sequence { alphabet, data }
    }

    pub fn binary(data: Vec<u8>) -> Result<Self> {
        Sequence::new(Alphabet::BINARY, data)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }
}

/// Any source model the crate can sample and evaluate.
#[derive(Clone, Debug)]
pub enum SourceModel {
    Markov(MarkovSource),
    Dithered(DitheredMarkov),
    BlockRepeat(BlockRepeatSource),
}

impl SourceModel {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            SourceModel::Markov(m) => m.alphabet(),
            SourceModel::Dithered(d) => d.alphabet(),
            SourceModel::BlockRepeat(_) => Alphabet::BINARY,
        }
    }

    /// Lower bound on every conditional next-symbol probability.
    pub fn delta_floor(&self) -> f64 {
        match self {
            SourceModel::Markov(m) => m.delta_floor(),
            SourceModel::Dithered(d) => d.delta_floor(),
            SourceModel::BlockRepeat(b) => b.delta_floor(),
        }
    }

    pub fn sample(&self, length: usize, seed: u64) -> Sequence {
        match self {
            SourceModel::Markov(m) => m.sample(length, seed),
            SourceModel::Dithered(d) => d.sample(length, seed),
            SourceModel::BlockRepeat(b) => b.sample(length, seed),
        }
    }

    /// `log2 P(x_1^n)` where `n = x.len()`.
    pub fn log2_prob(&self, x: &[u8]) -> Result<f64> {
        match self {
            SourceModel::Markov(m) => m.log2_prob(x),
            SourceModel::Dithered(d) => d.log2_prob(x),
            SourceModel::BlockRepeat(b) => b.log2_prob(x),
        }
    }

    /// Dense table of all n-block probabilities, indexed by
    /// [`Alphabet::block_index`].
    pub fn block_distribution(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            SourceModel::Markov(m) => m.block_distribution(n),
            SourceModel::Dithered(d) => d.block_distribution(n),
            SourceModel::BlockRepeat(b) => b.block_distribution(n),
        }
    }
}

impl From<MarkovSource> for SourceModel {
    fn from(m: MarkovSource) -> Self {
        SourceModel::Markov(m)
    }
}

impl From<DitheredMarkov> for SourceModel {
    fn from(d: DitheredMarkov) -> Self {
        SourceModel::Dithered(d)
    }
}

impl From<BlockRepeatSource> for SourceModel {
    fn from(b: BlockRepeatSource) -> Self {
        SourceModel::BlockRepeat(b)
    }
}

/// Dithers a source at rate `rate`.
///
/// Binary sources use modulo-2 addition of Bernoulli(`rate`) noise; larger
/// alphabets replace each symbol with a uniform one at rate `rate`. A rate of
/// zero returns the source unchanged. Block-repeat sources compose the new
/// noise with their existing dither.
pub fn dither(source: &SourceModel, rate: f64) -> Result<SourceModel> {
    if !(0.0..0.5).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if rate == 0.0 {
        return Ok(source.clone());
    }
    match source {
        SourceModel::Markov(m) => {
            let d = Dither::for_alphabet(m.alphabet(), rate)?;
            Ok(DitheredMarkov::new(m.clone(), d).into())
        }
        SourceModel::Dithered(dm) => {
            let combined = dm.dither().compose(rate)?;
            Ok(DitheredMarkov::new(dm.inner().clone(), combined).into())
        }
        SourceModel::BlockRepeat(b) => {
            let old = b.dither_rate();
            let combined = old * (1.0 - rate) + rate * (1.0 - old);
            Ok(b.with_dither_rate(combined)?.into())
        }
    }
}

/// The class-M parameter bundle `(k0, alpha, beta, delta, R, ell, n0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub k0: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub rate: f64,
    pub ell: usize,
    pub n0: usize,
}

impl ClassParams {
    pub fn new(
        k0: usize,
        alpha: f64,
        beta: f64,
        delta: f64,
        rate: f64,
        ell: usize,
        n0: usize,
    ) -> Result<Self> {
        let p = ClassParams {
            k0,
            alpha,
            beta,
            delta,
            rate,
            ell,
            n0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.beta.is_nan() || self.beta <= 1.0 {
            return bad("beta must exceed 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if self.rate.is_nan() || self.rate <= 0.0 {
            return bad("rate must be positive");
        }
        if self.ell == 0 {
            return bad("ell must be positive");
        }
        if self.n0 < self.ell {
            return bad("n0 must be at least ell");
        }
        Ok(())
    }

    /// `N0 = 2^(R * ell)`.
    pub fn threshold_n0(&self) -> f64 {
        (self.rate * self.ell as f64).exp2()
    }
}

/// Applies a per-position symbol channel to a dense n-block table in place.
/// `channel[c * a + o]` is the probability of emitting `o` given clean `c`.
pub(crate) fn apply_channel(dist: &mut [f64], a: usize, n: usize, channel: &[f64]) {
    let mut stride = 1usize;
    let mut scratch = vec![0.0; a];
    for _ in 0..n {
        let span = stride * a;
        for base in (0..dist.len()).step_by(span) {
            for off in 0..stride {
                for (o, s) in scratch.iter_mut().enumerate() {
                    *s = (0..a)
                        .map(|c| dist[base + off + c * stride] * channel[c * a + o])
                        .sum();
                }
                for (o, s) in scratch.iter().enumerate() {
                    dist[base + off + o * stride] = *s;
                }
            }
        }
        stride = span;
    }
}

pub(crate) fn dense_len(alphabet: Alphabet, n: usize) -> Result<usize> {
    match alphabet.block_count(n) {
        Some(c) if c <= MAX_DENSE_BLOCKS => Ok(c),
        _ => Err(Error::BudgetExceeded(format!(
            "{}^{} blocks exceed the dense enumeration limit {}",
            alphabet.size(),
            n,
            MAX_DENSE_BLOCKS
        ))),
    }
}
