use rand::Rng;

use super::markov::check_symbols;
use super::{apply_channel, dense_len, Alphabet, MarkovSource, Sequence};
use crate::error::{Error, Result};
use crate::seed;

/// Memoryless symbol noise applied on top of a clean source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dither {
    /// Binary only: flip each symbol with probability `rate`.
    ModTwo { rate: f64 },
    /// With probability `rate` replace the symbol by a uniform one.
    Replace { alphabet: Alphabet, rate: f64 },
}

impl Dither {
    pub fn for_alphabet(alphabet: Alphabet, rate: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(if alphabet.size() == 2 {
            Dither::ModTwo { rate }
        } else {
            Dither::Replace { alphabet, rate }
        })
    }

    pub fn rate(&self) -> f64 {
        match *self {
            Dither::ModTwo { rate } | Dither::Replace { rate, .. } => rate,
        }
    }

    fn alphabet_size(&self) -> usize {
        match self {
            Dither::ModTwo { .. } => 2,
            Dither::Replace { alphabet, .. } => alphabet.size(),
        }
    }

    /// Noise equivalent to applying `self` and then fresh noise at `rate`.
    pub(crate) fn compose(&self, rate: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(match *self {
            Dither::ModTwo { rate: r } => Dither::ModTwo {
                rate: r * (1.0 - rate) + rate * (1.0 - r),
            },
            // keep-probabilities multiply
            Dither::Replace { alphabet, rate: r } => Dither::Replace {
                alphabet,
                rate: 1.0 - (1.0 - r) * (1.0 - rate),
            },
        })
    }

    /// `P(emit o | clean c)`.
    pub fn emit(&self, clean: u8, out: u8) -> f64 {
        match *self {
            Dither::ModTwo { rate } => {
                if clean == out {
                    1.0 - rate
                } else {
                    rate
                }
            }
            Dither::Replace { alphabet, rate } => {
                let base = rate / alphabet.size() as f64;
                if clean == out {
                    1.0 - rate + base
                } else {
                    base
                }
            }
        }
    }

    pub(crate) fn matrix(&self) -> Vec<f64> {
        let a = self.alphabet_size();
        (0..a * a)
            .map(|i| self.emit((i / a) as u8, (i % a) as u8))
            .collect()
    }

    /// Lower bound on `P(emit o | past)` given the clean source's floor.
    fn floor(&self, clean_floor: f64) -> f64 {
        match *self {
            Dither::ModTwo { rate } => {
                rate.max(clean_floor * (1.0 - rate) + (1.0 - clean_floor) * rate)
            }
            Dither::Replace { alphabet, rate } => {
                let base = rate / alphabet.size() as f64;
                base.max(clean_floor * (1.0 - rate) + base)
            }
        }
    }

    pub(crate) fn apply<R: Rng>(&self, symbol: u8, rng: &mut R) -> u8 {
        match *self {
            Dither::ModTwo { rate } => {
                if rng.gen::<f64>() < rate {
                    symbol ^ 1
                } else {
                    symbol
                }
            }
            Dither::Replace { alphabet, rate } => {
                if rng.gen::<f64>() < rate {
                    rng.gen_range(0..alphabet.size()) as u8
                } else {
                    symbol
                }
            }
        }
    }
}

/// A Markov source observed through a [`Dither`] channel: a hidden Markov
/// model whose block probabilities come from the forward recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct DitheredMarkov {
    inner: MarkovSource,
    dither: Dither,
}

impl DitheredMarkov {
    pub fn new(inner: MarkovSource, dither: Dither) -> Self {
        DitheredMarkov { inner, dither }
    }

    pub fn inner(&self) -> &MarkovSource {
        &self.inner
    }

    pub fn dither(&self) -> Dither {
        self.dither
    }

    pub fn alphabet(&self) -> Alphabet {
        self.inner.alphabet()
    }

    pub fn delta_floor(&self) -> f64 {
        self.dither.floor(self.inner.delta_floor())
    }

    pub fn sample(&self, length: usize, seed: u64) -> Sequence {
        let clean = self.inner.sample(length, seed::derive(seed, &[0]));
        let mut rng = seed::rng(seed::derive(seed, &[1]));
        let data = clean
            .as_slice()
            .iter()
            .map(|&s| self.dither.apply(s, &mut rng))
            .collect();
        Sequence::from_trusted(self.alphabet(), data)
    }

    pub fn log2_prob(&self, x: &[u8]) -> Result<f64> {
        check_symbols(self.alphabet(), x)?;
        let a = self.alphabet().size();
        let k = self.inner.order();
        if k == 0 {
            let p: Vec<f64> = (0..a as u8)
                .map(|o| {
                    (0..a as u8)
                        .map(|c| self.inner.transition(0, c) * self.dither.emit(c, o))
                        .sum()
                })
                .collect();
            return Ok(x.iter().map(|&s| p[s as usize].log2()).sum());
        }
        // forward over clean contexts; the first k outputs are emitted by the
        // symbols of the initial context itself
        let contexts = self.inner.stationary().len();
        let head = x.len().min(k);
        let mut alpha: Vec<f64> = (0..contexts)
            .map(|c| {
                let clean = self.alphabet().block_from_index(c, k);
                let e: f64 = clean
                    .iter()
                    .zip(&x[..head])
                    .map(|(&cs, &o)| self.dither.emit(cs, o))
                    .product();
                self.inner.stationary()[c] * e
            })
            .collect();
        let mut log_scale = 0.0;
        for &o in &x[head..] {
            let mut next = vec![0.0; contexts];
            for (c, &w) in alpha.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for s in 0..a as u8 {
                    let t = self.inner.transition(c, s);
                    if t > 0.0 {
                        next[self.inner.shift_context(c, s)] += w * t * self.dither.emit(s, o);
                    }
                }
            }
            let total: f64 = next.iter().sum();
            if total == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            next.iter_mut().for_each(|v| *v /= total);
            log_scale += total.log2();
            alpha = next;
        }
        Ok(log_scale + alpha.iter().sum::<f64>().log2())
    }

    pub fn block_distribution(&self, n: usize) -> Result<Vec<f64>> {
        dense_len(self.alphabet(), n)?;
        let mut dist = self.inner.block_distribution(n)?;
        apply_channel(&mut dist, self.alphabet().size(), n, &self.dither.matrix());
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_dense_table() {
        let m = MarkovSource::new(
            Alphabet::new(3).unwrap(),
            1,
            vec![
                vec![0.8, 0.1, 0.1],
                vec![0.2, 0.5, 0.3],
                vec![0.3, 0.3, 0.4],
            ],
        )
        .unwrap();
        let d = DitheredMarkov::new(
            m,
            Dither::for_alphabet(Alphabet::new(3).unwrap(), 0.2).unwrap(),
        );
        let dense = d.block_distribution(4).unwrap();
        for (i, &p) in dense.iter().enumerate() {
            let x = d.alphabet().block_from_index(i, 4);
            assert!((d.log2_prob(&x).unwrap().exp2() - p).abs() < 1e-12);
        }
        assert!((dense.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn replace_floor_is_rate_over_alphabet() {
        let a = Alphabet::new(4).unwrap();
        let m = MarkovSource::iid(a, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let d = DitheredMarkov::new(m, Dither::for_alphabet(a, 0.2).unwrap());
        assert!((d.delta_floor() - 0.05).abs() < 1e-15);
        assert!((d.log2_prob(&[3]).unwrap().exp2() - 0.05).abs() < 1e-15);
    }
}
