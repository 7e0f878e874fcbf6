//! JSON source-spec files.
//!
//! ```json
//! {"type": "markov", "alphabet_size": 2, "order": 1,
//!  "transitions": [[0.9, 0.1], [0.2, 0.8]], "dither": 0.05, "seed": 7}
//! ```
//!
//! `"iid"` accepts a flat probability vector for `transitions`.
//! `"block_repeat"` takes a `codebook` object holding either explicit
//! `words` (strings of '0'/'1') or construction parameters
//! (`ell`, `rate`, `min_dist_frac`, `count`, `index`, `seed`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_cyclic_codebooks, dither, Alphabet, BlockRepeatSource, CyclicCodebook, MarkovSource,
    SourceModel,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Markov,
    Iid,
    BlockRepeat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transitions {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodebookSpec {
    Words {
        rate: f64,
        words: Vec<String>,
    },
    Build {
        ell: usize,
        rate: f64,
        min_dist_frac: f64,
        count: usize,
        #[serde(default)]
        index: usize,
        seed: u64,
    },
}

impl CodebookSpec {
    pub fn build(&self) -> Result<CyclicCodebook> {
        match self {
            CodebookSpec::Words { rate, words } => CyclicCodebook::from_strings(*rate, words),
            CodebookSpec::Build {
                ell,
                rate,
                min_dist_frac,
                count,
                index,
                seed,
            } => {
                let mut books = build_cyclic_codebooks(*ell, *rate, *min_dist_frac, *count, *seed)?;
                if *index >= books.len() {
                    return Err(Error::InvalidParameter(format!(
                        "codebook index {index} out of {count}"
                    )));
                }
                Ok(books.swap_remove(*index))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(rename = "type")]
    pub kind: SourceKind,
    #[serde(default = "default_alphabet")]
    pub alphabet_size: usize,
    #[serde(default)]
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Transitions>,
    #[serde(default)]
    pub dither: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook: Option<CodebookSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_alphabet() -> usize {
    2
}

impl SourceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SourceSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<SourceModel> {
        let alphabet = Alphabet::new(self.alphabet_size)?;
        let clean: SourceModel = match self.kind {
            SourceKind::Iid | SourceKind::Markov => {
                let order = if self.kind == SourceKind::Iid {
                    0
                } else {
                    self.order
                };
                let rows = match &self.transitions {
                    Some(Transitions::Rows(r)) => r.clone(),
                    Some(Transitions::Flat(f)) if order == 0 => vec![f.clone()],
                    Some(Transitions::Flat(_)) => {
                        return Err(Error::InvalidParameter(
                            "markov transitions must be a list of rows".into(),
                        ))
                    }
                    None => return Err(Error::InvalidParameter("missing transitions".into())),
                };
                MarkovSource::new(alphabet, order, rows)?.into()
            }
            SourceKind::BlockRepeat => {
                if alphabet.size() != 2 {
                    return Err(Error::InvalidParameter(
                        "block_repeat sources are binary".into(),
                    ));
                }
                let book = self
                    .codebook
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("missing codebook".into()))?
                    .build()?;
                let repeats = self.repeats.unwrap_or(BlockRepeatSource::DEFAULT_REPEATS);
                return Ok(BlockRepeatSource::new(book, self.dither, repeats)?.into());
            }
        };
        dither(&clean, self.dither)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_markov_spec() {
        let s = SourceSpec::from_json(
            r#"{"type":"markov","alphabet_size":2,"order":1,
                "transitions":[[0.9,0.1],[0.2,0.8]],"dither":0.0,"seed":7}"#,
        )
        .unwrap();
        let m = s.build().unwrap();
        assert!((m.delta_floor() - 0.1).abs() < 1e-15);
        assert_eq!(s.seed, Some(7));
    }

    #[test]
    fn parses_iid_flat() {
        let s = SourceSpec::from_json(r#"{"type":"iid","transitions":[0.25,0.75]}"#).unwrap();
        let m = s.build().unwrap();
        assert!((m.log2_prob(&[1]).unwrap() - 0.75f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn parses_block_repeat_words() {
        let s = SourceSpec::from_json(
            r#"{"type":"block_repeat","dither":0.05,
                "codebook":{"rate":0.5,"words":["0011","1001","1100","0110"]}}"#,
        )
        .unwrap();
        let m = s.build().unwrap();
        assert_eq!(m.delta_floor(), 0.05);
    }

    #[test]
    fn parses_block_repeat_construction() {
        let s = SourceSpec::from_json(
            r#"{"type":"block_repeat","dither":0.05,"repeats":3,
                "codebook":{"ell":8,"rate":0.5,"min_dist_frac":0.2,"count":2,"index":1,"seed":3}}"#,
        )
        .unwrap();
        match s.build().unwrap() {
            SourceModel::BlockRepeat(b) => {
                assert_eq!(b.ell(), 8);
                assert_eq!(b.repeats(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
