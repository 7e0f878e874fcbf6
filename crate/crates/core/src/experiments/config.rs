use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::recurrence::TrainingLayout;
use crate::sources::spec_file::SourceSpec;

pub const DEFAULT_TRIALS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Ml,
    Esc,
    Vl,
}

impl ClassifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Ml => "ml",
            ClassifierKind::Esc => "esc",
            ClassifierKind::Vl => "vl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Same,
    Different,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Same => "same",
            PairKind::Different => "different",
        }
    }

    pub(crate) fn code(&self) -> u64 {
        match self {
            PairKind::Same => 0,
            PairKind::Different => 1,
        }
    }
}

/// One `(K, N, k0)` layout of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "K")]
    pub blocks: usize,
    #[serde(rename = "N")]
    pub block_len: usize,
    #[serde(default)]
    pub k0: usize,
}

impl GridPoint {
    pub fn layout(&self) -> Result<TrainingLayout> {
        TrainingLayout::new(self.blocks, self.block_len, self.k0)
    }

    pub fn n_bar(&self) -> usize {
        self.blocks * (self.block_len + self.k0) + self.block_len
    }
}

/// An explicit source pair. A missing `q` means `q = p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub p: SourceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<SourceSpec>,
}

/// Members of the adversarial block-repeat family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub ell: usize,
    pub rate: f64,
    pub min_dist_frac: f64,
    pub dither: f64,
    pub members: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub codebook_seed: u64,
}

fn default_repeats() -> usize {
    crate::sources::BlockRepeatSource::DEFAULT_REPEATS
}

impl AdversarialSpec {
    /// `N0 = 2^(R * ell)`.
    pub fn n0(&self) -> f64 {
        (self.rate * self.ell as f64).exp2()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Explicit(Vec<PairSpec>),
    Adversarial(AdversarialSpec),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrayZoneHandling {
    /// Trials on gray-zone pairs are not counted.
    #[default]
    Exclude,
    /// Gray-zone pairs are required to be declared different.
    Divergent,
}

/// A bound on `lambda_hat` for matching cells; violations are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub classifier: ClassifierKind,
    pub pair_kind: PairKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_lambda: Option<f64>,
}

/// Full description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pairs: PairSource,
    pub classifiers: Vec<ClassifierKind>,
    /// Fidelity criterion `Delta` in bits.
    pub delta_crit: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// VL rate `R`; defaults to the family rate for adversarial pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// ESC transition floor; defaults to the smallest model floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_source: Option<f64>,
    pub grid: Vec<GridPoint>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    /// Block length of the divergence used for truth labels; defaults to
    /// `ell` for adversarial pairs and 8 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_n: Option<usize>,
    /// ML block length; defaults to the ESC block length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_n: Option<usize>,
    #[serde(default)]
    pub gray_zone: GrayZoneHandling,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<Assertion>,
}

fn default_eps0() -> f64 {
    crate::divergence::VlLengthParams::DEFAULT_EPS0
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta_crit > 0.0) {
            return bad("delta_crit must be positive".into());
        }
        if !(self.eps0 > 0.0) {
            return bad("eps0 must be positive".into());
        }
        for g in &self.grid {
            g.layout()?;
        }
        match &self.pairs {
            PairSource::Explicit(p) if p.is_empty() => return bad("no source pairs".into()),
            PairSource::Explicit(_)
                if self.rate.is_none() && self.classifiers.contains(&ClassifierKind::Vl) =>
            {
                return bad("rate is required for the VL classifier on explicit pairs".into())
            }
            PairSource::Adversarial(a) if a.members < 1 => {
                return bad("adversarial family needs at least one member".into())
            }
            _ => {}
        }
        Ok(())
    }

    /// VL rate in use.
    pub fn vl_rate(&self) -> f64 {
        match (&self.pairs, self.rate) {
            (_, Some(r)) => r,
            (PairSource::Adversarial(a), None) => a.rate,
            (PairSource::Explicit(_), None) => 0.0,
        }
    }

    pub fn truth_order(&self) -> usize {
        match (&self.pairs, self.truth_n) {
            (_, Some(n)) => n,
            (PairSource::Adversarial(a), None) => a.ell,
            (PairSource::Explicit(_), None) => 8,
        }
    }

    /// `2^(R * ell)` for adversarial families.
    pub fn n0_threshold(&self) -> Option<f64> {
        match &self.pairs {
            PairSource::Adversarial(a) => Some(a.n0()),
            PairSource::Explicit(_) => None,
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        json_hash(self)
    }
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    hex::encode(Sha256::digest(bytes))
}
