use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Segmentation of an observed sequence of length `n_bar = K(N + k0) + N`
/// into `K` training blocks of length `N`, each followed by a guard of `k0`
/// discarded symbols, and a final length-`N` suffix `Z`.
///
/// Ranges are 0-based and half-open; block `j` covers 1-based positions
/// `j(N+k0)+1 ..= j(N+k0)+N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingLayout {
    pub blocks: usize,
    pub block_len: usize,
    pub guard: usize,
}

impl TrainingLayout {
    pub fn new(blocks: usize, block_len: usize, guard: usize) -> Result<Self> {
        if blocks == 0 || block_len == 0 {
            return Err(Error::InvalidParameter(
                "layout needs at least one block of positive length".into(),
            ));
        }
        Ok(TrainingLayout {
            blocks,
            block_len,
            guard,
        })
    }

    /// `K (N + k0) + N`.
    pub fn n_bar(&self) -> usize {
        self.blocks * (self.block_len + self.guard) + self.block_len
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = j * (self.block_len + self.guard);
        start..start + self.block_len
    }

    pub fn suffix_range(&self) -> std::ops::Range<usize> {
        let start = self.blocks * (self.block_len + self.guard);
        start..start + self.block_len
    }

    /// Total indexed training length `K N`.
    pub fn training_len(&self) -> usize {
        self.blocks * self.block_len
    }
}

/// Borrowed views of a segmented sequence.
#[derive(Clone, Debug)]
pub struct Segmented<'a> {
    pub layout: TrainingLayout,
    pub blocks: Vec<&'a [u8]>,
    pub suffix: &'a [u8],
}

/// Splits `x` into training blocks and the suffix `Z`; guards are dropped.
/// Symbols past `n_bar` are ignored.
pub fn segment_training(x: &[u8], layout: TrainingLayout) -> Result<Segmented<'_>> {
    let needed = layout.n_bar();
    if x.len() < needed {
        return Err(Error::SequenceTooShort {
            needed,
            got: x.len(),
        });
    }
    Ok(Segmented {
        layout,
        blocks: (0..layout.blocks)
            .map(|j| &x[layout.block_range(j)])
            .collect(),
        suffix: &x[layout.suffix_range()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks_with_guard() {
        let x: Vec<u8> = (1..=14).collect();
        let l = TrainingLayout::new(2, 4, 1).unwrap();
        assert_eq!(l.n_bar(), 14);
        let s = segment_training(&x, l).unwrap();
        assert_eq!(s.blocks[0], &[1, 2, 3, 4]);
        assert_eq!(s.blocks[1], &[6, 7, 8, 9]);
        assert_eq!(s.suffix, &[11, 12, 13, 14]);
    }

    #[test]
    fn zero_guard_is_contiguous() {
        let x: Vec<u8> = (1..=12).collect();
        let s = segment_training(&x, TrainingLayout::new(2, 4, 0).unwrap()).unwrap();
        assert_eq!(s.blocks[1], &[5, 6, 7, 8]);
        assert_eq!(s.suffix, &[9, 10, 11, 12]);
    }

    #[test]
    fn too_short() {
        let x = vec![0u8; 13];
        let err = segment_training(&x, TrainingLayout::new(2, 4, 1).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::SequenceTooShort {
                needed: 14,
                got: 13
            }
        ));
    }
}
