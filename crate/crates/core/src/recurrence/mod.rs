//! Recurrence times, empirical measures and match lengths over segmented
//! training data.
//!
//! An observed sequence of length `n_bar = K(N + k0) + N` is cut into `K`
//! training blocks of length `N` separated by guards of `k0` symbols, plus a
//! length-`N` suffix `Z` (see [`TrainingLayout`]). The blocks, concatenated
//! in order with the guards removed, form the training string `X'`. Matches
//! never span two blocks.
//!
//! * The recurrence time `N^(z | X')` is the 1-based start position in `X'`
//!   of the first occurrence of `z`, scanning blocks in order.
//! * The empirical measure is `1 / N^` when `N^ <= N` and `1 / N` otherwise
//!   (including when `z` does not occur at all).
//! * The match length at position `i` of `Z` is the length of the longest
//!   prefix of `Z_i, Z_{i+1}, ..` of at most `l_max` symbols that occurs
//!   somewhere in the blocks; it is 0 when `Z_i` itself never occurs.

mod index;
mod layout;

pub use layout::{segment_training, Segmented, TrainingLayout};

use index::SuffixAutomaton;

use crate::error::{Error, Result};
use crate::sources::Alphabet;

/// First occurrence of a pattern inside the training blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occurrence {
    /// 0-based block index.
    pub block: usize,
    /// 1-based start offset within the block.
    pub offset: usize,
    /// 1-based start position in the concatenated blocks `X'`.
    pub position: usize,
}

/// Substring index over the training blocks of one sequence.
#[derive(Clone, Debug)]
pub struct RecurrenceIndex {
    automaton: SuffixAutomaton,
    block_len: usize,
    blocks: usize,
}

impl RecurrenceIndex {
    /// Indexes equal-length training blocks.
    pub fn new(alphabet: Alphabet, blocks: &[&[u8]]) -> Result<Self> {
        let block_len = blocks.first().map_or(0, |b| b.len());
        if block_len == 0 || blocks.iter().any(|b| b.len() != block_len) {
            return Err(Error::LayoutMismatch(
                "training blocks must be non-empty and of equal length".into(),
            ));
        }
        Ok(RecurrenceIndex {
            automaton: SuffixAutomaton::build(alphabet, blocks.iter().copied()),
            block_len,
            blocks: blocks.len(),
        })
    }

    /// Segments `x` and indexes its training blocks. Returns the index and
    /// the suffix `Z`.
    pub fn from_sequence(
        alphabet: Alphabet,
        x: &[u8],
        layout: TrainingLayout,
    ) -> Result<(Self, &[u8])> {
        let seg = segment_training(x, layout)?;
        Ok((RecurrenceIndex::new(alphabet, &seg.blocks)?, seg.suffix))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.automaton.alphabet()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn first_occurrence(&self, z: &[u8]) -> Option<Occurrence> {
        if z.is_empty() {
            return None;
        }
        let start = self.automaton.first_start(z)?;
        Some(Occurrence {
            block: start / self.block_len,
            offset: start % self.block_len + 1,
            position: start + 1,
        })
    }

    /// `N^(z | X')`, or `None` when `z` occurs in no block.
    pub fn recurrence_time(&self, z: &[u8]) -> Option<usize> {
        self.first_occurrence(z).map(|o| o.position)
    }

    /// `1 / N^` if `N^ <= cap`, else `1 / cap`.
    pub fn empirical_measure(&self, z: &[u8], cap: usize) -> f64 {
        capped_measure(self.recurrence_time(z), cap)
    }

    /// Longest `j <= l_max` such that `z[start .. start + j]` occurs in the
    /// blocks (0-based `start`).
    pub fn match_length(&self, z: &[u8], start: usize, l_max: usize) -> usize {
        let end = (start + l_max).min(z.len());
        self.automaton.longest_prefix(&z[start..end])
    }

    /// Mean match length over the `len(z) - l_max` starting positions
    /// `0 .. len(z) - l_max`.
    pub fn avg_match_length(&self, z: &[u8], l_max: usize) -> Result<f64> {
        if l_max == 0 || z.len() < l_max + 1 {
            return Err(Error::SequenceTooShort {
                needed: l_max + 1,
                got: z.len(),
            });
        }
        let count = z.len() - l_max;
        let total: usize = (0..count).map(|i| self.match_length(z, i, l_max)).sum();
        Ok(total as f64 / count as f64)
    }
}

/// Reciprocal of a recurrence time, floored at `1 / cap`.
pub fn capped_measure(recurrence: Option<usize>, cap: usize) -> f64 {
    match recurrence {
        Some(t) if t <= cap => 1.0 / t as f64,
        _ => 1.0 / cap as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(blocks: &[&[u8]]) -> RecurrenceIndex {
        RecurrenceIndex::new(Alphabet::BINARY, blocks).unwrap()
    }

    #[test]
    fn match_at_first_position() {
        let i = idx(&[&[0, 1, 0, 1]]);
        assert_eq!(i.recurrence_time(&[0, 1]), Some(1));
    }

    #[test]
    fn absent_pattern() {
        let i = idx(&[&[0, 1, 0, 1], &[1, 0, 1, 0]]);
        assert_eq!(i.recurrence_time(&[1, 1]), None);
        assert_eq!(i.empirical_measure(&[1, 1], 100), 0.01);
    }

    #[test]
    fn occurrence_coordinates() {
        let i = idx(&[&[0, 0, 0, 0], &[0, 1, 1, 0]]);
        let o = i.first_occurrence(&[1, 1]).unwrap();
        assert_eq!(
            o,
            Occurrence {
                block: 1,
                offset: 2,
                position: 6
            }
        );
    }

    #[test]
    fn capped_measure_cases() {
        assert_eq!(capped_measure(Some(7), 100), 1.0 / 7.0);
        assert_eq!(capped_measure(Some(150), 100), 0.01);
        assert_eq!(capped_measure(None, 100), 0.01);
    }

    #[test]
    fn match_length_cases() {
        let i = idx(&[&[1, 0, 1, 1, 1]]);
        // 0,1,1 occurs, 0,1,1,0 does not
        assert_eq!(i.match_length(&[0, 1, 1, 0, 1], 0, 5), 3);
        assert_eq!(i.match_length(&[1, 0, 1, 1, 0], 0, 3), 3);
        let ones = idx(&[&[1, 1, 1]]);
        assert_eq!(ones.match_length(&[0, 1], 0, 2), 0);
    }

    #[test]
    fn avg_over_self_is_capped_at_l_max() {
        let block: Vec<u8> = vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0];
        let i = idx(&[&block]);
        assert_eq!(i.avg_match_length(&block, 4).unwrap(), 4.0);
        let disjoint = RecurrenceIndex::new(Alphabet::new(4).unwrap(), &[&[0, 1, 0, 1]]).unwrap();
        assert_eq!(disjoint.avg_match_length(&[2, 3, 2, 3, 2], 2).unwrap(), 0.0);
        assert!(i.avg_match_length(&block[..4], 4).is_err());
    }

    #[test]
    fn unequal_blocks_rejected() {
        assert!(RecurrenceIndex::new(Alphabet::BINARY, &[&[0, 1], &[0]]).is_err());
    }
}
