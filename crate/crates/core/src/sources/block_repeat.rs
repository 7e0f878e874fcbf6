use std::collections::BTreeMap;

use rand::Rng;

use super::{apply_channel, dense_len, Alphabet, CyclicCodebook, Sequence};
use crate::error::{Error, Result};
use crate::seed;

/// Where sampling starts relative to the segment structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplePhase {
    /// Stationary start: the first segment is length-biased and entered at a
    /// uniform offset. This is the law `log2_prob` evaluates.
    Stationary,
    /// Start at the first symbol of a fresh segment.
    SegmentStart,
}

/// A member of the adversarial block-repeat family.
///
/// The clean process is a concatenation of independent segments. Each
/// segment draws a word `w` uniformly from a cyclic codebook, repeats it
/// `repeats` times and appends the first `tail` symbols of `w`, with `tail`
/// uniform on `1..=ell`. Every length-`ell` window of a clean segment is
/// therefore a codeword. The observed process adds i.i.d. Bernoulli(`dither`)
/// noise modulo 2.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRepeatSource {
    codebook: CyclicCodebook,
    dither_rate: f64,
    repeats: usize,
    enumeration_cap: usize,
}

impl BlockRepeatSource {
    pub const DEFAULT_REPEATS: usize = 2;

    pub fn new(codebook: CyclicCodebook, dither_rate: f64, repeats: usize) -> Result<Self> {
        if !(0.0..0.5).contains(&dither_rate) {
            return Err(Error::InvalidRate(dither_rate));
        }
        if repeats < 2 {
            return Err(Error::InvalidParameter("repeats must be at least 2".into()));
        }
        let enumeration_cap = 2 * codebook.ell();
        Ok(BlockRepeatSource {
            codebook,
            dither_rate,
            repeats,
            enumeration_cap,
        })
    }

    /// Overrides the exact-evaluation cap (default `2 * ell`). Windows up to
    /// `repeats * ell + 2` symbols cross at most one segment boundary, which
    /// bounds the cap.
    pub fn with_enumeration_cap(mut self, cap: usize) -> Result<Self> {
        let limit = self.repeats * self.codebook.ell() + 2;
        if cap > limit {
            return Err(Error::InvalidParameter(format!(
                "enumeration cap {cap} exceeds {limit}"
            )));
        }
        self.enumeration_cap = cap;
        Ok(self)
    }

    pub fn with_dither_rate(&self, rate: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(BlockRepeatSource {
            dither_rate: rate,
            ..self.clone()
        })
    }

    pub fn codebook(&self) -> &CyclicCodebook {
        &self.codebook
    }

    pub fn dither_rate(&self) -> f64 {
        self.dither_rate
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn enumeration_cap(&self) -> usize {
        self.enumeration_cap
    }

    pub fn ell(&self) -> usize {
        self.codebook.ell()
    }

    pub fn delta_floor(&self) -> f64 {
        self.dither_rate
    }

    /// Mean segment length `repeats * ell + (ell + 1) / 2`.
    pub fn mean_segment_len(&self) -> f64 {
        let ell = self.ell() as f64;
        self.repeats as f64 * ell + (ell + 1.0) / 2.0
    }

    pub fn sample(&self, length: usize, seed: u64) -> Sequence {
        self.sample_with_phase(length, seed, SamplePhase::Stationary)
    }

    pub fn sample_with_phase(&self, length: usize, seed: u64, phase: SamplePhase) -> Sequence {
        let mut rng = seed::rng(seed);
        let ell = self.ell();
        let base = self.repeats * ell;
        let words = self.codebook.words();
        let mut out = Vec::with_capacity(length);

        let (first_len, mut offset) = match phase {
            SamplePhase::Stationary => {
                // length-biased tail, then uniform entry offset
                let total: usize = (1..=ell).map(|t| base + t).sum();
                let mut r = rng.gen_range(0..total);
                let mut tail = ell;
                for t in 1..=ell {
                    if r < base + t {
                        tail = t;
                        break;
                    }
                    r -= base + t;
                }
                (base + tail, r)
            }
            SamplePhase::SegmentStart => (base + rng.gen_range(1..=ell), 0),
        };
        let mut seg_len = first_len;
        while out.len() < length {
            let w = words[rng.gen_range(0..words.len())];
            while offset < seg_len && out.len() < length {
                out.push(CyclicCodebook::symbol(w, offset % ell));
                offset += 1;
            }
            offset = 0;
            seg_len = base + rng.gen_range(1..=ell);
        }
        if self.dither_rate > 0.0 {
            let mut noise = seed::rng(seed::derive(seed, &[0x6e6f697365]));
            for s in out.iter_mut() {
                if noise.gen::<f64>() < self.dither_rate {
                    *s ^= 1;
                }
            }
        }
        Sequence::from_trusted(Alphabet::BINARY, out)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n > self.enumeration_cap {
            Err(Error::EnumerationCapExceeded {
                n,
                cap: self.enumeration_cap,
            })
        } else {
            Ok(())
        }
    }

    /// Exact `log2 P(x_1^n)` under the stationary law.
    ///
    /// A window either lies inside one segment, where it is the periodic
    /// extension of a uniformly distributed codeword, or crosses one segment
    /// boundary after `t` symbols (probability `1 / E[L]` for each
    /// `t = 1..n-1`), where the part before the boundary is again a periodic
    /// extension of a uniform codeword and the part after it starts a fresh
    /// segment. Dither likelihoods factor over the two parts.
    pub fn log2_prob(&self, x: &[u8]) -> Result<f64> {
        let n = x.len();
        self.check_len(n)?;
        if let Some(i) = x.iter().position(|&s| s > 1) {
            return Err(Error::InvalidSymbol {
                position: i + 1,
                symbol: x[i],
                size: 2,
            });
        }
        if n == 0 {
            return Ok(0.0);
        }
        let ell = self.ell();
        let words = self.codebook.words();
        let m = words.len() as f64;
        let keep = 1.0 - self.dither_rate;
        let flip = self.dither_rate;
        let mean_len = self.mean_segment_len();

        // prefix[t] = mean over u of the dither likelihood of x_1^t against u
        let mut prefix = vec![0.0; n + 1];
        for &u in words {
            let mut like = 1.0;
            prefix[0] += 1.0;
            for (i, &s) in x.iter().enumerate() {
                like *= if CyclicCodebook::symbol(u, i % ell) == s {
                    keep
                } else {
                    flip
                };
                prefix[i + 1] += like;
            }
        }
        prefix.iter_mut().for_each(|p| *p /= m);

        let mut p = (1.0 - (n as f64 - 1.0) / mean_len) * prefix[n];
        for t in 1..n {
            let tail = &x[t..];
            let suffix: f64 = words
                .iter()
                .map(|&w| {
                    tail.iter()
                        .enumerate()
                        .map(|(i, &s)| {
                            if CyclicCodebook::symbol(w, i % ell) == s {
                                keep
                            } else {
                                flip
                            }
                        })
                        .product::<f64>()
                })
                .sum::<f64>()
                / m;
            p += prefix[t] * suffix / mean_len;
        }
        Ok(p.log2())
    }

    pub fn block_distribution(&self, n: usize) -> Result<Vec<f64>> {
        self.check_len(n)?;
        let len = dense_len(Alphabet::BINARY, n)?;
        let mut dist = vec![0.0; len];
        if n == 0 {
            dist[0] = 1.0;
            return Ok(dist);
        }
        let mean_len = self.mean_segment_len();
        let chunk = |t: usize| self.periodic_chunk_law(t);
        for (idx, p) in chunk(n) {
            dist[idx] += (1.0 - (n as f64 - 1.0) / mean_len) * p;
        }
        for t in 1..n {
            let head = chunk(t);
            let tail = chunk(n - t);
            for (&a, &pa) in &head {
                for (&b, &pb) in &tail {
                    dist[(a << (n - t)) | b] += pa * pb / mean_len;
                }
            }
        }
        if self.dither_rate > 0.0 {
            let d = self.dither_rate;
            apply_channel(&mut dist, 2, n, &[1.0 - d, d, d, 1.0 - d]);
        }
        Ok(dist)
    }

    /// Law of the first `t` symbols of the periodic extension of a uniform
    /// codeword, keyed by block index.
    fn periodic_chunk_law(&self, t: usize) -> BTreeMap<usize, f64> {
        let ell = self.ell();
        let words = self.codebook.words();
        let mut law = BTreeMap::new();
        for &w in words {
            let idx = (0..t).fold(0usize, |acc, i| {
                (acc << 1) | CyclicCodebook::symbol(w, i % ell) as usize
            });
            *law.entry(idx).or_insert(0.0) += 1.0 / words.len() as f64;
        }
        law
    }
}

/// A member of the adversarial family with the default repeat count.
pub fn build_adversarial_member(
    codebook: CyclicCodebook,
    dither_rate: f64,
) -> Result<BlockRepeatSource> {
    BlockRepeatSource::new(codebook, dither_rate, BlockRepeatSource::DEFAULT_REPEATS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orbit_0011() -> CyclicCodebook {
        CyclicCodebook::from_strings(0.5, &["0011", "1001", "1100", "0110"]).unwrap()
    }

    #[test]
    fn undithered_windows_lie_in_codebook() {
        // windows inside one segment are codewords; 40 symbols fit in the
        // first segment when it has at least ten repeats
        let src = BlockRepeatSource::new(orbit_0011(), 0.0, 10).unwrap();
        let x = src.sample_with_phase(40, 3, SamplePhase::SegmentStart);
        assert_eq!(x.len(), 40);
        let windows: Vec<_> = x.as_slice().windows(4).collect();
        assert_eq!(windows.len(), 37);
        for w in windows {
            assert!(src
                .codebook()
                .contains(CyclicCodebook::word_from_symbols(w)));
        }
    }

    #[test]
    fn segment_start_is_periodic_within_first_segment() {
        let src = BlockRepeatSource::new(orbit_0011(), 0.0, 3).unwrap();
        let x = src.sample_with_phase(12, 8, SamplePhase::SegmentStart);
        let s = x.as_slice();
        assert_eq!(&s[0..4], &s[4..8]);
        assert_eq!(&s[4..8], &s[8..12]);
    }

    #[test]
    fn rejects_half_dither() {
        assert!(matches!(
            BlockRepeatSource::new(orbit_0011(), 0.5, 2),
            Err(Error::InvalidRate(_))
        ));
    }

    #[test]
    fn single_vs_dense_agree_and_normalize() {
        for d in [0.0, 0.05, 0.2] {
            let src = BlockRepeatSource::new(orbit_0011(), d, 2).unwrap();
            for n in 1..=8 {
                let dense = src.block_distribution(n).unwrap();
                assert!((dense.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (i, &p) in dense.iter().enumerate() {
                    let x = Alphabet::BINARY.block_from_index(i, n);
                    let lp = src.log2_prob(&x).unwrap();
                    assert!((lp.exp2() - p).abs() < 1e-12, "n={n} d={d}");
                }
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let src = BlockRepeatSource::new(orbit_0011(), 0.1, 2).unwrap();
        assert!(matches!(
            src.log2_prob(&[0; 9]),
            Err(Error::EnumerationCapExceeded { n: 9, cap: 8 })
        ));
    }
}
