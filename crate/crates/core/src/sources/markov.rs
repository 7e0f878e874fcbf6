use rand::Rng;

use super::{dense_len, Alphabet, Sequence};
use crate::error::{Error, Result};
use crate::seed;

const ROW_TOLERANCE: f64 = 1e-12;
const STATIONARY_TOLERANCE: f64 = 1e-9;
const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// A stationary order-`k` Markov chain (`k = 0` is i.i.d.).
///
/// Contexts are the last `k` symbols, oldest first, indexed like blocks
/// (see [`Alphabet::block_index`]). The chain starts from its stationary
/// context distribution, so every sample and every block probability is
/// that of the stationary process.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSource {
    alphabet: Alphabet,
    order: usize,
    /// Row-major `contexts x alphabet`.
    transitions: Vec<f64>,
    /// Stationary distribution over contexts.
    initial: Vec<f64>,
    /// Cumulative rows for sampling.
    cumulative: Vec<f64>,
}

impl MarkovSource {
    pub fn new(alphabet: Alphabet, order: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let a = alphabet.size();
        let contexts = alphabet
            .block_count(order)
            .filter(|&c| c <= 1 << 16)
            .ok_or_else(|| Error::InvalidParameter(format!("order {order} too large")))?;
        if rows.len() != contexts {
            return Err(Error::InvalidParameter(format!(
                "expected {contexts} transition rows, got {}",
                rows.len()
            )));
        }
        let mut transitions = Vec::with_capacity(contexts * a);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != a {
                return Err(Error::InvalidParameter(format!(
                    "row {r} has {} entries, expected {a}",
                    row.len()
                )));
            }
            if let Some(&v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidTransition { row: r, value: v });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::NonStochasticRow { row: r, sum });
            }
            transitions.extend_from_slice(row);
        }
        let initial = stationary(a, order, &transitions)?;
        let cumulative = transitions
            .chunks(a)
            .flat_map(|row| {
                row.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(MarkovSource {
            alphabet,
            order,
            transitions,
            initial,
            cumulative,
        })
    }

    pub fn iid(alphabet: Alphabet, probs: &[f64]) -> Result<Self> {
        MarkovSource::new(alphabet, 0, vec![probs.to_vec()])
    }

    pub fn bernoulli(p_one: f64) -> Result<Self> {
        MarkovSource::iid(Alphabet::BINARY, &[1.0 - p_one, p_one])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stationary(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, context: usize, symbol: u8) -> f64 {
        self.transitions[context * self.alphabet.size() + symbol as usize]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.transitions
            .chunks(self.alphabet.size())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Smallest conditional next-symbol probability over all contexts.
    pub fn delta_floor(&self) -> f64 {
        self.transitions
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn shift_context(&self, context: usize, symbol: u8) -> usize {
        if self.order == 0 {
            0
        } else {
            let modulus = self.initial.len() / self.alphabet.size();
            (context % modulus) * self.alphabet.size() + symbol as usize
        }
    }

    pub fn sample(&self, length: usize, seed: u64) -> Sequence {
        let mut rng = seed::rng(seed);
        let a = self.alphabet.size();
        let mut out = Vec::with_capacity(length);
        let k = self.order;
        let mut context = pick(&self.initial_cumulative(), rng.gen::<f64>());
        for s in self
            .alphabet
            .block_from_index(context, k)
            .into_iter()
            .take(length)
        {
            out.push(s);
        }
        while out.len() < length {
            let row = &self.cumulative[context * a..(context + 1) * a];
            let s = pick(row, rng.gen::<f64>()) as u8;
            out.push(s);
            context = self.shift_context(context, s);
        }
        Sequence::from_trusted(self.alphabet, out)
    }

    fn initial_cumulative(&self) -> Vec<f64> {
        self.initial
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    pub fn log2_prob(&self, x: &[u8]) -> Result<f64> {
        check_symbols(self.alphabet, x)?;
        let k = self.order;
        if x.len() < k {
            // marginal of the stationary context law over its first |x| symbols
            let a = self.alphabet.size();
            let tail = a.pow((k - x.len()) as u32);
            let start = self.alphabet.block_index(x) * tail;
            let p: f64 = self.initial[start..start + tail].iter().sum();
            return Ok(p.log2());
        }
        let mut context = self.alphabet.block_index(&x[..k]);
        let mut lp = self.initial[context].log2();
        for &s in &x[k..] {
            lp += self.transition(context, s).log2();
            context = self.shift_context(context, s);
        }
        Ok(lp)
    }

    pub fn block_distribution(&self, n: usize) -> Result<Vec<f64>> {
        let len = dense_len(self.alphabet, n)?;
        let a = self.alphabet.size();
        let k = self.order;
        if n <= k {
            let tail = a.pow((k - n) as u32);
            return Ok((0..len)
                .map(|i| self.initial[i * tail..(i + 1) * tail].iter().sum())
                .collect());
        }
        let mut dist = self.initial.clone();
        let mut m = k;
        while m < n {
            let contexts = self.initial.len();
            let mut next = vec![0.0; dist.len() * a];
            for (i, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let context = i % contexts;
                for s in 0..a {
                    next[i * a + s] = p * self.transitions[context * a + s];
                }
            }
            dist = next;
            m += 1;
        }
        debug_assert_eq!(dist.len(), len);
        Ok(dist)
    }
}

pub(crate) fn check_symbols(alphabet: Alphabet, x: &[u8]) -> Result<()> {
    match x.iter().position(|&s| !alphabet.contains(s)) {
        Some(i) => Err(Error::InvalidSymbol {
            position: i + 1,
            symbol: x[i],
            size: alphabet.size(),
        }),
        None => Ok(()),
    }
}

/// Inverse-CDF pick from a cumulative table.
pub(crate) fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    let target = u * total;
    cumulative
        .iter()
        .position(|&c| target < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Stationary distribution of the context chain by power iteration on the
/// lazy kernel `(I + T) / 2`, which has the same fixed points and removes
/// periodicity.
fn stationary(a: usize, order: usize, transitions: &[f64]) -> Result<Vec<f64>> {
    if order == 0 {
        return Ok(vec![1.0]);
    }
    let contexts = transitions.len() / a;
    let modulus = contexts / a;
    let step = |v: &[f64]| {
        let mut out: Vec<f64> = v.iter().map(|p| 0.5 * p).collect();
        for (c, &p) in v.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for s in 0..a {
                out[(c % modulus) * a + s] += 0.5 * p * transitions[c * a + s];
            }
        }
        out
    };
    let iterate = |mut v: Vec<f64>| -> Option<Vec<f64>> {
        for _ in 0..STATIONARY_MAX_ITERS {
            let next = step(&v);
            let diff: f64 = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).sum();
            v = next;
            if diff < STATIONARY_TOLERANCE * 1e-3 {
                return Some(v);
            }
        }
        None
    };
    let uniform = iterate(vec![1.0 / contexts as f64; contexts]).ok_or(Error::ReducibleChain)?;
    for start in [0, contexts - 1] {
        let mut point = vec![0.0; contexts];
        point[start] = 1.0;
        let other = iterate(point).ok_or(Error::ReducibleChain)?;
        let gap: f64 = other.iter().zip(&uniform).map(|(x, y)| (x - y).abs()).sum();
        if gap > 1e-6 {
            return Err(Error::ReducibleChain);
        }
    }
    Ok(uniform)
}
