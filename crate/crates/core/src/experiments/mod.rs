//! Monte Carlo estimation of classification error over source pairs.
//!
//! A trial draws `X ~ P` and `Y ~ Q` independently, runs a classifier and
//! scores the verdict against the pair's truth label (see
//! [`classify_error_event`]). Error rates come with Wilson 95% intervals.
//!
//! Per-trial seeds are derived from the master seed, the grid point, the
//! pair kind and the trial index, so results do not depend on the number of
//! worker threads. All classifiers of a cell see the same sampled data.

mod config;
mod report;

pub use config::{
    json_hash, AdversarialSpec, Assertion, ClassifierKind, ExperimentConfig, GrayZoneHandling,
    GridPoint, PairKind, PairSource, PairSpec, DEFAULT_TRIALS,
};
pub use report::{
    emit_report, wilson_interval, write_atomic, CellResult, ExperimentReport, Gap, PairRecord,
    PairTally, ReportFormat, CSV_COLUMNS,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    classify_error_event, esc_classify, ml_classify, vl_classify, ClassifierParams, Decision,
    Outcome, Truth,
};
use crate::divergence::{self, Method};
use crate::error::{Error, Result};
use crate::recurrence::segment_training;
use crate::seed;
use crate::sources::{build_cyclic_codebooks, BlockRepeatSource, Sequence, SourceModel};

/// Divergences at or below this are treated as equal marginals.
pub const SAME_TOLERANCE: f64 = 1e-12;

/// A rule deciding a pair `(x, y)`; the models are available to
/// known-source rules only.
pub trait PairClassifier: Sync {
    fn decide(
        &self,
        p: &SourceModel,
        q: &SourceModel,
        x: &Sequence,
        y: &Sequence,
    ) -> Result<Decision>;
}

/// One of the built-in classifiers with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Configured {
    pub kind: ClassifierKind,
    pub params: ClassifierParams,
    pub ml_n: usize,
}

impl PairClassifier for Configured {
    fn decide(
        &self,
        p: &SourceModel,
        q: &SourceModel,
        x: &Sequence,
        y: &Sequence,
    ) -> Result<Decision> {
        match self.kind {
            ClassifierKind::Ml => {
                let seg = segment_training(x.as_slice(), self.params.layout)?;
                let n = self.ml_n.min(seg.suffix.len());
                ml_classify(p, q, &seg.suffix[..n], self.params.delta_crit)
            }
            ClassifierKind::Esc => esc_classify(x, y, &self.params),
            ClassifierKind::Vl => vl_classify(x, y, &self.params),
        }
    }
}

/// Truth label of a pair with the divergence it was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub truth: Truth,
    pub divergence: f64,
    pub order_n: usize,
    pub delta_crit: f64,
}

/// Labels a pair by its exact `D_KL,n(P||Q)`: same at zero, divergent at
/// `delta_crit` or more, gray zone in between.
pub fn label_pair(
    p: &SourceModel,
    q: &SourceModel,
    n: usize,
    delta_crit: f64,
) -> Result<TruthLabel> {
    let d = divergence::kl_divergence_n(p, q, n, Method::Exact)?.value;
    Ok(label_from_divergence(d, n, delta_crit))
}

fn label_from_divergence(d: f64, n: usize, delta_crit: f64) -> TruthLabel {
    let truth = if d <= SAME_TOLERANCE {
        Truth::Same
    } else if d >= delta_crit {
        Truth::Divergent
    } else {
        Truth::GrayZone
    };
    TruthLabel {
        truth,
        divergence: d,
        order_n: n,
        delta_crit,
    }
}

/// Error count of one classifier over a set of trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub errors: usize,
    pub trials: usize,
    pub lambda_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl CellEstimate {
    pub fn from_counts(errors: usize, trials: usize) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(errors, trials);
        let lambda_hat = if trials == 0 {
            0.0
        } else {
            errors as f64 / trials as f64
        };
        CellEstimate {
            errors,
            trials,
            lambda_hat,
            ci_lo,
            ci_hi,
        }
    }
}

/// Error rate of `classifier` on `trials` independent draws of
/// `(X, Y) ~ P x Q` of length `n_bar`.
pub fn estimate_error(
    p: &SourceModel,
    q: &SourceModel,
    truth: TruthLabel,
    classifier: &dyn PairClassifier,
    n_bar: usize,
    trials: usize,
    seed: u64,
) -> Result<CellEstimate> {
    if truth.truth == Truth::GrayZone {
        return Err(Error::GrayZonePair {
            divergence: truth.divergence,
            delta_crit: truth.delta_crit,
        });
    }
    let pair = [(p, q, truth.truth)];
    let outcomes = run_trials(&pair, &[classifier], n_bar, trials, seed)?;
    let errors = outcomes[0].iter().filter(|o| o.1 == Outcome::Error).count();
    Ok(CellEstimate::from_counts(errors, trials))
}

/// Runs every classifier on `trials` draws; trial `t` uses pair
/// `t % pairs.len()`. Returns `(pair index, outcome)` per trial and
/// classifier.
fn run_trials(
    pairs: &[(&SourceModel, &SourceModel, Truth)],
    classifiers: &[&dyn PairClassifier],
    n_bar: usize,
    trials: usize,
    cell_seed: u64,
) -> Result<Vec<Vec<(usize, Outcome)>>> {
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let k = t % pairs.len();
            let (p, q, truth) = pairs[k];
            let x = p.sample(n_bar, seed::derive(cell_seed, &[t as u64, 0]));
            let y = q.sample(n_bar, seed::derive(cell_seed, &[t as u64, 1]));
            classifiers
                .iter()
                .map(|c| {
                    let d = c.decide(p, q, &x, &y)?;
                    Ok((k, classify_error_event(&d, truth)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..classifiers.len())
        .map(|c| per_trial.iter().map(|row| row[c]).collect())
        .collect())
}

struct LabelledPair {
    name: String,
    p: SourceModel,
    q: SourceModel,
    label: TruthLabel,
}

impl LabelledPair {
    fn kind(&self) -> PairKind {
        match self.label.truth {
            Truth::Same => PairKind::Same,
            _ => PairKind::Different,
        }
    }
}

fn build_pairs(config: &ExperimentConfig, events: &mut Vec<String>) -> Result<Vec<LabelledPair>> {
    let n = config.truth_order();
    let delta = config.delta_crit;
    match &config.pairs {
        PairSource::Explicit(specs) => specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let name = s.name.clone().unwrap_or_else(|| format!("pair{i}"));
                let p = s.p.build()?;
                let (q, label) = match &s.q {
                    Some(qs) if qs != &s.p => {
                        let q = qs.build()?;
                        let label = label_pair(&p, &q, n, delta)?;
                        (q, label)
                    }
                    _ => (p.clone(), label_from_divergence(0.0, n, delta)),
                };
                Ok(LabelledPair { name, p, q, label })
            })
            .collect(),
        PairSource::Adversarial(a) => {
            let books =
                build_cyclic_codebooks(a.ell, a.rate, a.min_dist_frac, a.members, a.codebook_seed)?;
            let members = books
                .into_iter()
                .map(|b| Ok(BlockRepeatSource::new(b, a.dither, a.repeats)?.into()))
                .collect::<Result<Vec<SourceModel>>>()?;
            let dists = members
                .iter()
                .map(|m| m.block_distribution(n))
                .collect::<Result<Vec<_>>>()?;
            let mut pairs = Vec::new();
            for (i, m) in members.iter().enumerate() {
                pairs.push(LabelledPair {
                    name: format!("m{i}/m{i}"),
                    p: m.clone(),
                    q: m.clone(),
                    label: label_from_divergence(0.0, n, delta),
                });
            }
            for i in 0..members.len() {
                for j in 0..members.len() {
                    if i == j {
                        continue;
                    }
                    let d = divergence::kl_from_distributions(&dists[i], &dists[j], n)?;
                    let label = label_from_divergence(d, n, delta);
                    if label.truth != Truth::Divergent {
                        events.push(format!(
                            "pair m{i}/m{j}: D_KL,{n} = {d:.6} below delta_crit {delta}"
                        ));
                    }
                    pairs.push(LabelledPair {
                        name: format!("m{i}/m{j}"),
                        p: members[i].clone(),
                        q: members[j].clone(),
                        label,
                    });
                }
            }
            Ok(pairs)
        }
    }
}

/// Runs an experiment on the global thread pool, or on a dedicated pool of
/// `threads` workers.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    config.validate()?;
    match threads {
        None => run_inner(config),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut events = Vec::new();
    let pairs = build_pairs(config, &mut events)?;
    let delta_source = match config.delta_source {
        Some(d) => d,
        None => pairs
            .iter()
            .flat_map(|p| [p.p.delta_floor(), p.q.delta_floor()])
            .fold(f64::INFINITY, f64::min),
    };
    let n0 = config.n0_threshold();

    let mut cells = Vec::new();
    for (g, point) in config.grid.iter().enumerate() {
        let layout = point.layout()?;
        let params = ClassifierParams {
            delta_crit: config.delta_crit,
            layout,
            eps0: config.eps0,
            delta_source,
            rate: config.vl_rate(),
        };
        params.validate()?;
        let ml_n = config.ml_n.unwrap_or_else(|| params.esc_n().max(1));
        let configured: Vec<Configured> = config
            .classifiers
            .iter()
            .map(|&kind| Configured { kind, params, ml_n })
            .collect();
        let rules: Vec<&dyn PairClassifier> = configured
            .iter()
            .map(|c| c as &dyn PairClassifier)
            .collect();

        for kind in [PairKind::Same, PairKind::Different] {
            let members: Vec<&LabelledPair> = pairs.iter().filter(|p| p.kind() == kind).collect();
            if members.is_empty() {
                continue;
            }
            let cell_seed = seed::derive(config.seed, &[g as u64, kind.code()]);
            let truths: Vec<(&SourceModel, &SourceModel, Truth)> = members
                .iter()
                .map(|m| {
                    let truth = match (m.label.truth, config.gray_zone) {
                        (Truth::GrayZone, GrayZoneHandling::Divergent) => Truth::Divergent,
                        (t, _) => t,
                    };
                    (&m.p, &m.q, truth)
                })
                .collect();
            let outcomes = run_trials(&truths, &rules, point.n_bar(), config.trials, cell_seed)?;
            for (c, &classifier) in config.classifiers.iter().enumerate() {
                cells.push(tally_cell(
                    point,
                    classifier,
                    kind,
                    &members,
                    &outcomes[c],
                    cell_seed,
                    n0,
                ));
            }
        }
    }

    let gaps = compute_gaps(&cells);
    let mut report = ExperimentReport {
        tool_version: crate::VERSION.to_string(),
        config_hash: config.hash(),
        seed: config.seed,
        n0_threshold: n0,
        pairs: pairs
            .iter()
            .map(|p| PairRecord {
                pair: p.name.clone(),
                pair_kind: p.kind(),
                truth: p.label.truth,
                divergence_bits: p.label.divergence,
                order_n: p.label.order_n,
            })
            .collect(),
        cells,
        gaps,
        events,
        assertion_failures: Vec::new(),
    };
    report.assertion_failures = check_assertions(&config.assertions, &report);
    Ok(report)
}

fn tally_cell(
    point: &GridPoint,
    classifier: ClassifierKind,
    kind: PairKind,
    members: &[&LabelledPair],
    outcomes: &[(usize, Outcome)],
    cell_seed: u64,
    n0: Option<f64>,
) -> CellResult {
    let mut per = vec![(0usize, 0usize); members.len()];
    let mut gray = 0;
    for &(k, o) in outcomes {
        match o {
            Outcome::NoRequirement => gray += 1,
            Outcome::Error => {
                per[k].0 += 1;
                per[k].1 += 1;
            }
            Outcome::Correct => per[k].1 += 1,
        }
    }
    let errors: usize = per.iter().map(|p| p.0).sum();
    let trials: usize = per.iter().map(|p| p.1).sum();
    let est = CellEstimate::from_counts(errors, trials);
    let per_pair: Vec<PairTally> = members
        .iter()
        .zip(&per)
        .map(|(m, &(e, t))| PairTally {
            pair: m.name.clone(),
            errors: e,
            trials: t,
            lambda_hat: if t == 0 { 0.0 } else { e as f64 / t as f64 },
        })
        .collect();
    let empirical_max = per_pair
        .iter()
        .filter(|p| p.trials > 0)
        .map(|p| p.lambda_hat)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    CellResult {
        n_bar: point.n_bar(),
        blocks: point.blocks,
        block_len: point.block_len,
        k0: point.k0,
        classifier,
        pair_kind: kind,
        lambda_hat: est.lambda_hat,
        ci_lo: est.ci_lo,
        ci_hi: est.ci_hi,
        trials,
        gray_excluded: gray,
        seed: cell_seed,
        n0_threshold: n0,
        errors,
        empirical_max,
        per_pair,
    }
}

fn compute_gaps(cells: &[CellResult]) -> Vec<Gap> {
    let mut gaps = Vec::new();
    for esc in cells.iter().filter(|c| c.classifier == ClassifierKind::Esc) {
        if let Some(vl) = cells.iter().find(|c| {
            c.classifier == ClassifierKind::Vl
                && c.n_bar == esc.n_bar
                && c.blocks == esc.blocks
                && c.pair_kind == esc.pair_kind
        }) {
            gaps.push(Gap {
                n_bar: esc.n_bar,
                pair_kind: esc.pair_kind,
                lambda_esc: esc.lambda_hat,
                lambda_vl: vl.lambda_hat,
                gap: esc.lambda_hat - vl.lambda_hat,
            });
        }
    }
    gaps
}

fn check_assertions(assertions: &[Assertion], report: &ExperimentReport) -> Vec<String> {
    let mut failures = Vec::new();
    for a in assertions {
        let matching: Vec<&CellResult> = report
            .cells
            .iter()
            .filter(|c| {
                c.classifier == a.classifier
                    && c.pair_kind == a.pair_kind
                    && a.n_bar.is_none_or(|n| n == c.n_bar)
            })
            .collect();
        if matching.is_empty() {
            failures.push(format!(
                "no cell matches {} {} n_bar={:?}",
                a.classifier.as_str(),
                a.pair_kind.as_str(),
                a.n_bar
            ));
        }
        for c in matching {
            let tag = format!(
                "{} {} n_bar={}",
                c.classifier.as_str(),
                c.pair_kind.as_str(),
                c.n_bar
            );
            if let Some(max) = a.max_lambda {
                if c.lambda_hat > max {
                    failures.push(format!("{tag}: lambda_hat {} > {max}", c.lambda_hat));
                }
            }
            if let Some(min) = a.min_lambda {
                if c.lambda_hat < min {
                    failures.push(format!("{tag}: lambda_hat {} < {min}", c.lambda_hat));
                }
            }
        }
    }
    failures
}

/// Runs an adversarial-family experiment whose grid straddles `N0`.
pub fn threshold_sweep(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let n0 = config.n0_threshold().ok_or_else(|| {
        Error::InvalidParameter("threshold sweep needs an adversarial family".into())
    })?;
    let below = config.grid.iter().any(|g| (g.n_bar() as f64) < n0);
    let above = config.grid.iter().any(|g| (g.n_bar() as f64) > n0);
    if !(below && above) {
        return Err(Error::InvalidParameter(format!(
            "grid must contain n_bar values on both sides of N0 = {n0}"
        )));
    }
    run_experiment(config, threads)
}

/// Runs ESC and VL on identical cells; the report's `gaps` hold
/// `lambda_ESC - lambda_VL`.
pub fn esc_vs_vl(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    let mut config = config.clone();
    for k in [ClassifierKind::Esc, ClassifierKind::Vl] {
        if !config.classifiers.contains(&k) {
            config.classifiers.push(k);
        }
    }
    run_experiment(&config, threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::MarkovSource;

    struct Constant(u8);

    impl PairClassifier for Constant {
        fn decide(
            &self,
            _: &SourceModel,
            _: &SourceModel,
            _: &Sequence,
            _: &Sequence,
        ) -> Result<Decision> {
            Ok(Decision::from_statistic(
                if self.0 == 1 { 1.0 } else { -1.0 },
                1.0,
            ))
        }
    }

    fn same_label() -> TruthLabel {
        label_from_divergence(0.0, 4, 0.5)
    }

    #[test]
    fn constant_stubs() {
        let p: SourceModel = MarkovSource::bernoulli(0.5).unwrap().into();
        let zero = estimate_error(&p, &p, same_label(), &Constant(0), 16, 50, 1).unwrap();
        let one = estimate_error(&p, &p, same_label(), &Constant(1), 16, 50, 1).unwrap();
        assert_eq!(zero.lambda_hat, 0.0);
        assert_eq!(one.lambda_hat, 1.0);
    }

    #[test]
    fn gray_zone_pair_is_reported() {
        let p: SourceModel = MarkovSource::bernoulli(0.5).unwrap().into();
        let q: SourceModel = MarkovSource::bernoulli(0.45).unwrap().into();
        let label = label_pair(&p, &q, 2, 0.5).unwrap();
        assert_eq!(label.truth, Truth::GrayZone);
        assert!(matches!(
            estimate_error(&p, &q, label, &Constant(0), 16, 10, 1),
            Err(Error::GrayZonePair { .. })
        ));
    }
}
