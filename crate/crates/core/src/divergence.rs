//! Normalized KL divergence and variable-length (VL) divergence between
//! source models, in bits.
//!
//! `D_KL,n(P||Q) = (1/n) sum_z P(z) log2(P(z)/Q(z))` over all n-blocks.
//!
//! The VL divergence compares how fast prefixes of a `P`-typical sequence
//! become improbable under the two models. For a resolution `n`, the prefix
//! length `L_n(x | M)` is the first `j` with `M(x_1^j) < 1/n`, capped at
//! `l_max = floor(log2 n / (R + eps0))`; then
//! `D_VL,n(P||Q) = log2 n / E_P L_n(X | Q) - log2 n / E_P L_n(X | P)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::sources::SourceModel;

/// Prefix-tree nodes visited before exact VL expectations fall back to
/// Monte Carlo.
pub const EXACT_NODE_BUDGET: usize = 1_000_000;
const VL_FALLBACK_SAMPLES: usize = 20_000;
const TIE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Kl,
    Vl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceValue {
    pub kind: DivergenceKind,
    pub order_n: usize,
    /// Bits (per symbol for KL).
    pub value: f64,
    pub method: Method,
    /// Zero for exact values.
    pub std_error: f64,
}

/// Exact or Monte Carlo `D_KL,n(P||Q)`.
pub fn kl_divergence_n(
    p: &SourceModel,
    q: &SourceModel,
    n: usize,
    method: Method,
) -> Result<DivergenceValue> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if p.alphabet() != q.alphabet() {
        return Err(Error::InvalidParameter(
            "models use different alphabets".into(),
        ));
    }
    let (value, std_error) = match method {
        Method::Exact => {
            let pd = p.block_distribution(n)?;
            let qd = q.block_distribution(n)?;
            (kl_from_distributions(&pd, &qd, n)?, 0.0)
        }
        Method::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::BudgetExceeded(
                    "Monte Carlo needs at least two samples".into(),
                ));
            }
            let terms = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let z = p.sample(n, seed::derive(seed, &[i as u64]));
                    let lp = p.log2_prob(z.as_slice())?;
                    let lq = q.log2_prob(z.as_slice())?;
                    if lq == f64::NEG_INFINITY {
                        return Err(Error::ZeroQProbability);
                    }
                    Ok((lp - lq) / n as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            mean_and_se(&terms)
        }
    };
    Ok(DivergenceValue {
        kind: DivergenceKind::Kl,
        order_n: n,
        value,
        method,
        std_error,
    })
}

/// Normalized KL divergence between two dense n-block distributions.
pub(crate) fn kl_from_distributions(pd: &[f64], qd: &[f64], n: usize) -> Result<f64> {
    let mut sum = 0.0;
    for (&pp, &qq) in pd.iter().zip(qd) {
        if pp > 0.0 {
            if qq <= 0.0 {
                return Err(Error::ZeroQProbability);
            }
            sum += pp * (pp.log2() - qq.log2());
        }
    }
    Ok(sum / n as f64)
}

/// `D_KL,n` for each `n` in an ascending list.
pub fn kl_divergence_sequence(
    p: &SourceModel,
    q: &SourceModel,
    n_list: &[usize],
    method: Method,
) -> Result<Vec<DivergenceValue>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_list must be strictly ascending".into(),
        ));
    }
    n_list
        .iter()
        .map(|&n| kl_divergence_n(p, q, n, method))
        .collect()
}

/// Resolution parameters of the VL divergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VlLengthParams {
    pub n: usize,
    pub rate: f64,
    pub eps0: f64,
}

impl VlLengthParams {
    pub const DEFAULT_EPS0: f64 = 0.25;

    pub fn new(n: usize, rate: f64, eps0: f64) -> Result<Self> {
        let p = VlLengthParams { n, rate, eps0 };
        if eps0.is_nan() || eps0 <= 0.0 {
            return Err(Error::InvalidParameter("eps0 must be positive".into()));
        }
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::InvalidParameter("rate must be non-negative".into()));
        }
        if p.l_max() < 1 {
            return Err(Error::InvalidParameter(format!(
                "l_max = floor(log2 {n} / ({rate} + {eps0})) is zero"
            )));
        }
        Ok(p)
    }

    /// `floor(log2 n / (R + eps0))`.
    pub fn l_max(&self) -> usize {
        l_max(self.n, self.rate, self.eps0)
    }

    fn threshold_log2(&self) -> f64 {
        -(self.n as f64).log2()
    }
}

pub(crate) fn l_max(n: usize, rate: f64, eps0: f64) -> usize {
    if n < 2 {
        return 0;
    }
    ((n as f64).log2() / (rate + eps0) + 1e-12).floor() as usize
}

/// Threshold-crossing prefix length: the smallest `j` with
/// `M(x_1^j) < 1/n`, or `l_max` if no prefix up to `l_max` crosses. Ties
/// `M(x_1^j) = 1/n` do not cross.
pub fn vl_prefix_length(x: &[u8], model: &SourceModel, params: &VlLengthParams) -> Result<usize> {
    let l_max = params.l_max();
    if x.len() < l_max {
        return Err(Error::SequenceTooShort {
            needed: l_max,
            got: x.len(),
        });
    }
    let threshold = params.threshold_log2();
    for j in 1..=l_max {
        if model.log2_prob(&x[..j])? < threshold - TIE_SLACK {
            return Ok(j);
        }
    }
    Ok(l_max)
}

/// An expectation with its standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// `E_P L_n(X | eval_model)`.
///
/// `Method::Exact` walks the prefix tree depth-first and falls back to Monte
/// Carlo (with a fixed seed) once [`EXACT_NODE_BUDGET`] nodes are visited.
pub fn vl_expected_length(
    p: &SourceModel,
    eval_model: &SourceModel,
    params: &VlLengthParams,
    method: Method,
) -> Result<Estimate> {
    match method {
        Method::Exact => match exact_expected_lengths(p, &[eval_model], params)? {
            Some(v) => Ok(Estimate {
                mean: v[0],
                std_error: 0.0,
                exact: true,
            }),
            None => mc_expected_lengths(p, &[eval_model], params, VL_FALLBACK_SAMPLES, 0).map(
                |(m, se, _)| Estimate {
                    mean: m[0],
                    std_error: se[0],
                    exact: false,
                },
            ),
        },
        Method::MonteCarlo { samples, seed } => {
            mc_expected_lengths(p, &[eval_model], params, samples, seed).map(|(m, se, _)| {
                Estimate {
                    mean: m[0],
                    std_error: se[0],
                    exact: false,
                }
            })
        }
    }
}

/// `D_VL,n(P||Q) = log2 n / L_n(P|Q) - log2 n / L_n(P|P)`.
pub fn vl_divergence_n(
    p: &SourceModel,
    q: &SourceModel,
    params: &VlLengthParams,
    method: Method,
) -> Result<DivergenceValue> {
    let c = (params.n as f64).log2();
    let exact = match method {
        Method::Exact => exact_expected_lengths(p, &[q, p], params)?,
        Method::MonteCarlo { .. } => None,
    };
    let (value, std_error, used) = match exact {
        Some(v) => (c / v[0] - c / v[1], 0.0, Method::Exact),
        None => {
            let (samples, seed) = match method {
                Method::MonteCarlo { samples, seed } => (samples, seed),
                Method::Exact => (VL_FALLBACK_SAMPLES, 0),
            };
            let (m, se, cov) = mc_expected_lengths(p, &[q, p], params, samples, seed)?;
            let (a, b) = (m[0], m[1]);
            // delta method on c/a - c/b with paired samples
            let var = c
                * c
                * (se[0].powi(2) / a.powi(4) + se[1].powi(2) / b.powi(4)
                    - 2.0 * cov / (a * a * b * b));
            (
                c / a - c / b,
                var.max(0.0).sqrt(),
                Method::MonteCarlo { samples, seed },
            )
        }
    };
    Ok(DivergenceValue {
        kind: DivergenceKind::Vl,
        order_n: params.n,
        value,
        method: used,
        std_error,
    })
}

/// Exact expectations of the prefix length under several evaluation models
/// at once. `None` when the node budget is exhausted.
fn exact_expected_lengths(
    p: &SourceModel,
    evals: &[&SourceModel],
    params: &VlLengthParams,
) -> Result<Option<Vec<f64>>> {
    let l_max = params.l_max();
    let threshold = params.threshold_log2() - TIE_SLACK;
    let a = p.alphabet().size() as u8;
    let mut totals = vec![0.0; evals.len()];
    let mut visited = 0usize;
    // stack of (prefix, which eval models are still below the threshold)
    let mut stack: Vec<(Vec<u8>, Vec<bool>)> = vec![(Vec::new(), vec![true; evals.len()])];
    while let Some((prefix, open)) = stack.pop() {
        for s in 0..a {
            visited += 1;
            if visited > EXACT_NODE_BUDGET {
                return Ok(None);
            }
            let mut x = prefix.clone();
            x.push(s);
            let lp = p.log2_prob(&x)?;
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let mass = lp.exp2();
            let j = x.len();
            let mut still_open = open.clone();
            for (k, m) in evals.iter().enumerate() {
                if !open[k] {
                    continue;
                }
                if j == l_max || m.log2_prob(&x)? < threshold {
                    totals[k] += mass * j as f64;
                    still_open[k] = false;
                }
            }
            if still_open.iter().any(|&o| o) {
                stack.push((x, still_open));
            }
        }
    }
    Ok(Some(totals))
}

/// Monte Carlo means, standard errors and the covariance of the first two
/// evaluation models' lengths (paired over the same samples).
fn mc_expected_lengths(
    p: &SourceModel,
    evals: &[&SourceModel],
    params: &VlLengthParams,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if samples < 2 {
        return Err(Error::BudgetExceeded(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    let l_max = params.l_max();
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = p.sample(l_max, seed::derive(seed, &[i as u64]));
            evals
                .iter()
                .map(|m| vl_prefix_length(x.as_slice(), m, params).map(|l| l as f64))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let k = evals.len();
    let mut means = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (m, se) = mean_and_se(&col);
        means.push(m);
        ses.push(se);
    }
    let cov = if k >= 2 {
        let n = samples as f64;
        rows.iter()
            .map(|r| (r[0] - means[0]) * (r[1] - means[1]))
            .sum::<f64>()
            / (n - 1.0)
            / n
    } else {
        0.0
    };
    Ok((means, ses, cov))
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{Alphabet, MarkovSource};

    fn ber(p: f64) -> SourceModel {
        MarkovSource::bernoulli(p).unwrap().into()
    }

    fn chain(a: f64, b: f64) -> SourceModel {
        MarkovSource::new(
            Alphabet::BINARY,
            1,
            vec![vec![1.0 - a, a], vec![b, 1.0 - b]],
        )
        .unwrap()
        .into()
    }

    #[test]
    fn self_divergence_is_zero() {
        let m = chain(0.3, 0.6);
        let d = kl_divergence_n(&m, &m, 3, Method::Exact).unwrap();
        assert!(d.value.abs() < 1e-12);
    }

    #[test]
    fn bernoulli_pair_closed_form() {
        let closed = 0.5 * (0.5f64 / 0.25).log2() + 0.5 * (0.5f64 / 0.75).log2();
        for n in 1..=3 {
            let d = kl_divergence_n(&ber(0.5), &ber(0.25), n, Method::Exact).unwrap();
            assert!((d.value - closed).abs() < 1e-9);
        }
        assert!((closed - 0.20752).abs() < 1e-5);
    }

    #[test]
    fn zero_q_probability() {
        let q = ber(0.0);
        let err = kl_divergence_n(&ber(0.5), &q, 2, Method::Exact).unwrap_err();
        assert!(matches!(err, Error::ZeroQProbability));
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let (p, q) = (chain(0.2, 0.3), chain(0.4, 0.5));
        let exact = kl_divergence_n(&p, &q, 6, Method::Exact).unwrap().value;
        let mc = kl_divergence_n(
            &p,
            &q,
            6,
            Method::MonteCarlo {
                samples: 20_000,
                seed: 4,
            },
        )
        .unwrap();
        assert!(
            (mc.value - exact).abs() < 4.0 * mc.std_error,
            "{mc:?} vs {exact}"
        );
    }

    #[test]
    fn sequence_requires_ascending() {
        let m = ber(0.5);
        assert!(kl_divergence_sequence(&m, &m, &[3, 2], Method::Exact).is_err());
        let v = kl_divergence_sequence(&m, &m, &[1, 2, 4], Method::Exact).unwrap();
        assert!(v.iter().all(|d| d.value.abs() < 1e-12));
    }

    #[test]
    fn l_max_floor() {
        assert_eq!(VlLengthParams::new(16, 0.5, 0.25).unwrap().l_max(), 5);
        assert!(VlLengthParams::new(2, 2.0, 0.25).is_err());
    }

    #[test]
    fn prefix_length_uniform() {
        // P(x_1^4) = 1/16 ties, P(x_1^5) = 1/32 crosses
        let params = VlLengthParams::new(16, 0.5, 0.25).unwrap();
        let l = vl_prefix_length(&[0, 1, 1, 0, 1], &ber(0.5), &params).unwrap();
        assert_eq!(l, 5);
    }

    #[test]
    fn prefix_length_crosses_at_first_symbol() {
        let params = VlLengthParams::new(2, 0.0, 0.25).unwrap();
        let m: SourceModel = MarkovSource::iid(Alphabet::new(3).unwrap(), &[0.3, 0.3, 0.4])
            .unwrap()
            .into();
        assert_eq!(params.l_max(), 4);
        assert_eq!(vl_prefix_length(&[2, 0, 0, 0], &m, &params).unwrap(), 1);
    }

    #[test]
    fn prefix_length_cap() {
        let params = VlLengthParams::new(64, 0.5, 0.25).unwrap();
        let l = vl_prefix_length(&[0; 8], &ber(0.01), &params).unwrap();
        assert_eq!(l, params.l_max());
    }

    #[test]
    fn expected_length_uniform_exact() {
        let params = VlLengthParams::new(16, 0.5, 0.25).unwrap();
        let e = vl_expected_length(&ber(0.5), &ber(0.5), &params, Method::Exact).unwrap();
        assert!(e.exact);
        assert!((e.mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn vl_self_zero_and_separated_positive() {
        let params = VlLengthParams::new(64, 0.5, 0.25).unwrap();
        let d0 = vl_divergence_n(&ber(0.5), &ber(0.5), &params, Method::Exact).unwrap();
        assert!(d0.value.abs() < 1e-12);
        let d = vl_divergence_n(&ber(0.5), &ber(0.1), &params, Method::Exact).unwrap();
        assert!(d.value > 0.0);
    }
}
