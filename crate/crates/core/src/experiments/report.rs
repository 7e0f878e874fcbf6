use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ClassifierKind, PairKind};
use crate::classifiers::Truth;
use crate::error::Result;

/// CSV header of [`ExperimentReport::write_csv`].
pub const CSV_COLUMNS: [&str; 13] = [
    "n_bar",
    "K",
    "N",
    "k0",
    "classifier",
    "pair_kind",
    "lambda_hat",
    "ci_lo",
    "ci_hi",
    "trials",
    "gray_excluded",
    "seed",
    "n0_threshold",
];

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `errors` out of `trials`.
/// Returns `(0, 1)` when there are no trials.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTally {
    pub pair: String,
    pub errors: usize,
    pub trials: usize,
    pub lambda_hat: f64,
}

/// Error estimate for one `(n_bar, classifier, pair_kind)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n_bar: usize,
    #[serde(rename = "K")]
    pub blocks: usize,
    #[serde(rename = "N")]
    pub block_len: usize,
    pub k0: usize,
    pub classifier: ClassifierKind,
    pub pair_kind: PairKind,
    pub lambda_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Trials counted toward `lambda_hat`.
    pub trials: usize,
    pub gray_excluded: usize,
    /// Seed of the sampled data; shared by all classifiers of the cell.
    pub seed: u64,
    pub n0_threshold: Option<f64>,
    pub errors: usize,
    /// Largest per-pair `lambda_hat` over the sampled pairs.
    pub empirical_max: Option<f64>,
    pub per_pair: Vec<PairTally>,
}

/// Truth label recorded for each pair of the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair: String,
    pub pair_kind: PairKind,
    pub truth: Truth,
    pub divergence_bits: f64,
    pub order_n: usize,
}

/// `lambda_ESC - lambda_VL` for cells sharing `n_bar` and pair kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub n_bar: usize,
    pub pair_kind: PairKind,
    pub lambda_esc: f64,
    pub lambda_vl: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n0_threshold: Option<f64>,
    pub pairs: Vec<PairRecord>,
    pub cells: Vec<CellResult>,
    pub gaps: Vec<Gap>,
    pub events: Vec<String>,
    pub assertion_failures: Vec<String>,
}

impl ExperimentReport {
    pub fn cell(
        &self,
        n_bar: usize,
        classifier: ClassifierKind,
        kind: PairKind,
    ) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n_bar == n_bar && c.classifier == classifier && c.pair_kind == kind)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for c in &self.cells {
            w.write_record([
                c.n_bar.to_string(),
                c.blocks.to_string(),
                c.block_len.to_string(),
                c.k0.to_string(),
                c.classifier.as_str().to_string(),
                c.pair_kind.as_str().to_string(),
                c.lambda_hat.to_string(),
                c.ci_lo.to_string(),
                c.ci_hi.to_string(),
                c.trials.to_string(),
                c.gray_excluded.to_string(),
                c.seed.to_string(),
                c.n0_threshold.map_or(String::new(), |v| v.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes the report to `path` through a temporary file and a rename.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => report.to_csv_string()?,
        ReportFormat::Json => report.to_json_string()? + "\n",
    };
    write_atomic(path, body.as_bytes())
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp_name = format!(".{name}.{}.tmp", std::process::id());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        e.into()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(0, 200), (3, 200), (100, 200), (200, 200), (1, 1)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(100, 200);
        assert!((hi - lo) / 2.0 - 0.0686 < 1e-3);
    }

    #[test]
    fn wilson_zero_errors() {
        let (lo, hi) = wilson_interval(0, 200);
        assert_eq!(lo, 0.0);
        // z^2 / (n + z^2)
        let z2 = Z95 * Z95;
        assert!((hi - z2 / (200.0 + z2)).abs() < 1e-12);
    }
}
