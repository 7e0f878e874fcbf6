use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const MAX_ELL: usize = 63;
const ENUMERATE_ELL: usize = 20;
const RANDOM_CANDIDATES: usize = 1 << 16;
const ATTEMPTS: u64 = 8;

/// A set of binary `ell`-vectors closed under the right cyclic shift.
///
/// Words are stored as bit patterns: bit `i` holds the symbol at position
/// `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicCodebook {
    ell: usize,
    rate: f64,
    words: Vec<u64>,
}

impl CyclicCodebook {
    /// Validates closure under the shift operator.
    pub fn from_words(ell: usize, rate: f64, words: impl IntoIterator<Item = u64>) -> Result<Self> {
        if !(2..=MAX_ELL).contains(&ell) {
            return Err(Error::InvalidParameter(format!(
                "ell {ell} outside 2..={MAX_ELL}"
            )));
        }
        let mask = mask(ell);
        let set: BTreeSet<u64> = words.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidParameter("empty codebook".into()));
        }
        if let Some(w) = set.iter().find(|&&w| w & !mask != 0) {
            return Err(Error::InvalidParameter(format!(
                "word {w:#x} longer than {ell} bits"
            )));
        }
        if let Some(w) = set.iter().find(|&&w| !set.contains(&shift_right(w, ell))) {
            return Err(Error::InvalidParameter(format!(
                "codebook not cyclic: shift of {} missing",
                format_word(*w, ell)
            )));
        }
        Ok(CyclicCodebook {
            ell,
            rate,
            words: set.into_iter().collect(),
        })
    }

    /// The orbit of `word` under the shift operator.
    pub fn orbit(ell: usize, rate: f64, word: u64) -> Result<Self> {
        CyclicCodebook::from_words(ell, rate, rotations(word, ell))
    }

    /// Parses words given as strings of '0'/'1', first symbol first.
    pub fn from_strings<S: AsRef<str>>(rate: f64, words: &[S]) -> Result<Self> {
        let ell = words
            .first()
            .map(|w| w.as_ref().len())
            .ok_or_else(|| Error::InvalidParameter("empty codebook".into()))?;
        let parsed = words
            .iter()
            .map(|w| parse_word(w.as_ref(), ell))
            .collect::<Result<Vec<_>>>()?;
        CyclicCodebook::from_words(ell, rate, parsed)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Construction target `floor(2^(R * ell))`.
    pub fn target_size(&self) -> usize {
        (self.rate * self.ell as f64).exp2().floor() as usize
    }

    pub fn contains(&self, word: u64) -> bool {
        self.words.binary_search(&word).is_ok()
    }

    /// Symbol at 0-based position `i` of `word`.
    pub fn symbol(word: u64, i: usize) -> u8 {
        ((word >> i) & 1) as u8
    }

    pub fn word_symbols(&self, word: u64) -> Vec<u8> {
        (0..self.ell).map(|i| Self::symbol(word, i)).collect()
    }

    pub fn word_from_symbols(symbols: &[u8]) -> u64 {
        symbols
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &s)| acc | ((s as u64 & 1) << i))
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.words
            .iter()
            .map(|&w| format_word(w, self.ell))
            .collect()
    }

    /// Minimum Hamming distance between any word here and any word in `other`.
    pub fn min_distance_to(&self, other: &CyclicCodebook) -> u32 {
        self.words
            .iter()
            .flat_map(|&x| other.words.iter().map(move |&y| hamming(x, y)))
            .min()
            .unwrap_or(u32::MAX)
    }
}

pub fn hamming(x: u64, y: u64) -> u32 {
    (x ^ y).count_ones()
}

fn mask(ell: usize) -> u64 {
    if ell == 64 {
        u64::MAX
    } else {
        (1u64 << ell) - 1
    }
}

/// Right cyclic shift: `(x1, .., x_ell) -> (x_ell, x1, .., x_{ell-1})`.
pub(crate) fn shift_right(w: u64, ell: usize) -> u64 {
    ((w << 1) | (w >> (ell - 1))) & mask(ell)
}

fn rotations(w: u64, ell: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(ell);
    let mut cur = w;
    for _ in 0..ell {
        out.push(cur);
        cur = shift_right(cur, ell);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn canonical(w: u64, ell: usize) -> u64 {
    rotations(w, ell)[0]
}

fn format_word(w: u64, ell: usize) -> String {
    (0..ell)
        .map(|i| if (w >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn parse_word(s: &str, ell: usize) -> Result<u64> {
    if s.len() != ell {
        return Err(Error::InvalidParameter(format!(
            "word {s:?} has length != {ell}"
        )));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << i)),
        _ => Err(Error::InvalidParameter(format!("word {s:?} is not binary"))),
    })
}

/// Builds `count` cyclic codebooks of `ell`-vectors, each the union of full
/// (aperiodic) shift orbits with at least `floor(2^(R * ell))` words, such
/// that any two words from different codebooks are at Hamming distance at
/// least `ceil(min_dist_frac * ell)`.
///
/// Orbits are drawn in random order and assigned greedily to the codebooks,
/// rejecting any orbit too close to an orbit already held by another
/// codebook. Up to a fixed number of reshuffled attempts are made.
pub fn build_cyclic_codebooks(
    ell: usize,
    rate: f64,
    min_dist_frac: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CyclicCodebook>> {
    if !(2..=MAX_ELL).contains(&ell) {
        return Err(Error::InvalidParameter(format!(
            "ell {ell} outside 2..={MAX_ELL}"
        )));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(
            "rate must lie in (0, 1) bits".into(),
        ));
    }
    if !(min_dist_frac > 0.0 && min_dist_frac < 0.5) {
        return Err(Error::InvalidParameter(
            "min_dist_frac must lie in (0, 1/2)".into(),
        ));
    }
    let target = (rate * ell as f64).exp2().floor() as usize;
    if target < ell {
        return Err(Error::InvalidParameter(format!(
            "2^(R ell) = {target} leaves no room for a full orbit of length {ell}"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let orbits_per_book = target.div_ceil(ell);
    let d_min = (min_dist_frac * ell as f64).ceil() as u32;

    let mut best_achieved = 0;
    for attempt in 0..ATTEMPTS {
        let mut rng = seed::rng(seed::derive(seed, &[attempt]));
        let candidates = candidate_orbits(ell, &mut rng);
        let mut books: Vec<Vec<Vec<u64>>> = vec![Vec::new(); count];
        let mut next_book = 0usize;
        for rep in candidates {
            let rots = rotations(rep, ell);
            let far_from = |b: &Vec<Vec<u64>>| {
                b.iter().all(|orbit| {
                    // every rotation is in the orbit, so comparing one
                    // representative against all rotations suffices
                    orbit.iter().all(|&w| hamming(w, rep) >= d_min)
                })
            };
            let open: Vec<usize> = (0..count)
                .map(|k| (next_book + k) % count)
                .filter(|&i| books[i].len() < orbits_per_book)
                .collect();
            if open.is_empty() {
                break;
            }
            let chosen = open.into_iter().find(|&i| {
                books
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .all(|(_, b)| far_from(b))
            });
            if let Some(i) = chosen {
                books[i].push(rots);
                next_book = (i + 1) % count;
            }
        }
        let achieved = books.iter().filter(|b| b.len() == orbits_per_book).count();
        if achieved == count {
            return books
                .into_iter()
                .map(|b| CyclicCodebook::from_words(ell, rate, b.into_iter().flatten()))
                .collect();
        }
        best_achieved = best_achieved.max(achieved);
    }
    Err(Error::ConstructionFailed {
        requested: count,
        achieved: best_achieved,
    })
}

/// Canonical representatives of aperiodic orbits in random order.
fn candidate_orbits<R: Rng>(ell: usize, rng: &mut R) -> Vec<u64> {
    let mut reps: Vec<u64> = if ell <= ENUMERATE_ELL {
        (0..1u64 << ell)
            .filter(|&w| canonical(w, ell) == w && rotations(w, ell).len() == ell)
            .collect()
    } else {
        let mut seen = BTreeSet::new();
        for _ in 0..RANDOM_CANDIDATES {
            let w = rng.gen::<u64>() & mask(ell);
            let rots = rotations(w, ell);
            if rots.len() == ell {
                seen.insert(rots[0]);
            }
        }
        seen.into_iter().collect()
    };
    reps.shuffle(rng);
    reps
}
