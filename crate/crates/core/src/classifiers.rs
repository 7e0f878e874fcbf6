//! Decision rules mapping a pair of sequences to a verdict: 0 when they look
//! like the same source, 1 when they look different.
//!
//! All statistics are in bits and all verdicts use the inclusive rule
//! `verdict = 1 iff statistic >= delta_crit / 2`.
//!
//! The likelihood-ratio statistics threshold `(1/n)(log2 P(z) - log2 Q(z))`,
//! whose mean under `z ~ P` is `D_KL,n(P||Q)`.

use serde::{Deserialize, Serialize};

use crate::divergence;
use crate::error::{Error, Result};
use crate::recurrence::{RecurrenceIndex, TrainingLayout};
use crate::sources::{Sequence, SourceModel};

/// Parameters shared by the universal classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// Fidelity criterion `Delta` in bits.
    pub delta_crit: f64,
    pub layout: TrainingLayout,
    pub eps0: f64,
    /// Transition floor `delta`; sets the ESC block length.
    pub delta_source: f64,
    /// Rate `R`; sets the VL match-length cap.
    pub rate: f64,
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_crit > 0.0) {
            return Err(Error::InvalidParameter(
                "delta_crit must be positive".into(),
            ));
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::InvalidParameter("eps0 must be positive".into()));
        }
        if !(self.delta_source > 0.0 && self.delta_source < 1.0) {
            return Err(Error::InvalidParameter(
                "delta_source must lie in (0, 1)".into(),
            ));
        }
        if !(self.rate >= 0.0) {
            return Err(Error::InvalidParameter("rate must be non-negative".into()));
        }
        TrainingLayout::new(self.layout.blocks, self.layout.block_len, self.layout.guard)?;
        Ok(())
    }

    pub fn n_bar(&self) -> usize {
        self.layout.n_bar()
    }

    /// `floor(log2 n_bar / (log2(1/delta) + eps0))`.
    pub fn esc_n(&self) -> usize {
        let n_bar = self.n_bar() as f64;
        (n_bar.log2() / ((1.0 / self.delta_source).log2() + self.eps0) + 1e-12).floor() as usize
    }

    /// `floor(log2 N / (R + eps0))`.
    pub fn vl_l_max(&self) -> usize {
        divergence::l_max(self.layout.block_len, self.rate, self.eps0)
    }

    pub fn threshold(&self) -> f64 {
        self.delta_crit / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// 0 = same source, 1 = different.
    pub verdict: u8,
    pub statistic: f64,
    pub threshold: f64,
}

impl Decision {
    pub fn from_statistic(statistic: f64, delta_crit: f64) -> Self {
        let threshold = delta_crit / 2.0;
        Decision {
            verdict: u8::from(statistic >= threshold),
            statistic,
            threshold,
        }
    }

    pub fn says_different(&self) -> bool {
        self.verdict == 1
    }
}

/// `(1/n)(log2 P - log2 Q)`.
pub fn log_ratio_statistic(log2_p: f64, log2_q: f64, n: usize) -> f64 {
    (log2_p - log2_q) / n as f64
}

/// Known-source likelihood-ratio rule on `z`.
pub fn ml_classify(
    p: &SourceModel,
    q: &SourceModel,
    z: &[u8],
    delta_crit: f64,
) -> Result<Decision> {
    if z.is_empty() {
        return Err(Error::SequenceTooShort { needed: 1, got: 0 });
    }
    let lp = p.log2_prob(z)?;
    let lq = q.log2_prob(z)?;
    let statistic = log_ratio_statistic(lp, lq, z.len());
    Ok(Decision::from_statistic(statistic, delta_crit))
}

fn check_pair(x: &Sequence, y: &Sequence, params: &ClassifierParams) -> Result<()> {
    params.validate()?;
    if x.alphabet() != y.alphabet() {
        return Err(Error::LayoutMismatch(
            "x and y use different alphabets".into(),
        ));
    }
    let n_bar = params.n_bar();
    for s in [x, y] {
        if s.len() < n_bar {
            return Err(Error::SequenceTooShort {
                needed: n_bar,
                got: s.len(),
            });
        }
        if s.len() != n_bar {
            return Err(Error::LayoutMismatch(format!(
                "sequence length {} differs from n_bar = {n_bar}",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Empirical statistics classifier.
///
/// Recurrence-time measures from the training blocks of `x` and of `y` are
/// compared on the first `esc_n` symbols of the suffix of `x`.
pub fn esc_classify(x: &Sequence, y: &Sequence, params: &ClassifierParams) -> Result<Decision> {
    check_pair(x, y, params)?;
    let n = params.esc_n();
    let cap = params.layout.block_len;
    if n < 1 || n > cap {
        return Err(Error::SequenceTooShort {
            needed: n.max(1),
            got: if n < 1 { 0 } else { cap },
        });
    }
    let (ix, z) = RecurrenceIndex::from_sequence(x.alphabet(), x.as_slice(), params.layout)?;
    let (iy, _) = RecurrenceIndex::from_sequence(y.alphabet(), y.as_slice(), params.layout)?;
    let z = &z[..n];
    let p_hat = ix.empirical_measure(z, cap);
    let q_hat = iy.empirical_measure(z, cap);
    let statistic = log_ratio_statistic(p_hat.log2(), q_hat.log2(), n);
    Ok(Decision::from_statistic(statistic, params.delta_crit))
}

/// Variable-length classifier.
///
/// `d_VL = log2 N / avg_cross - log2 N / avg_self`, where the averages are
/// match lengths of the suffix of `x` into the training blocks of `y`
/// (cross) and of `x` (self), each floored at `1/N`.
pub fn vl_classify(x: &Sequence, y: &Sequence, params: &ClassifierParams) -> Result<Decision> {
    check_pair(x, y, params)?;
    let l_max = params.vl_l_max();
    let n = params.layout.block_len;
    if l_max < 1 || n < l_max + 1 {
        return Err(Error::SequenceTooShort {
            needed: l_max.max(1) + 1,
            got: n,
        });
    }
    let (ix, z) = RecurrenceIndex::from_sequence(x.alphabet(), x.as_slice(), params.layout)?;
    let (iy, _) = RecurrenceIndex::from_sequence(y.alphabet(), y.as_slice(), params.layout)?;
    let floor = 1.0 / n as f64;
    let avg_self = ix.avg_match_length(z, l_max)?.max(floor);
    let avg_cross = iy.avg_match_length(z, l_max)?.max(floor);
    let log_n = (n as f64).log2();
    let statistic = log_n / avg_cross - log_n / avg_self;
    Ok(Decision::from_statistic(statistic, params.delta_crit))
}

/// Ground truth of a pair, known to the harness but not to the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    /// Equal n-th order marginals.
    Same,
    /// Divergence at least `delta_crit`.
    Divergent,
    /// Divergence strictly between 0 and `delta_crit`.
    GrayZone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Error,
    Correct,
    NoRequirement,
}

pub fn classify_error_event(decision: &Decision, truth: Truth) -> Outcome {
    match (truth, decision.says_different()) {
        (Truth::GrayZone, _) => Outcome::NoRequirement,
        (Truth::Same, true) | (Truth::Divergent, false) => Outcome::Error,
        _ => Outcome::Correct,
    }
}
