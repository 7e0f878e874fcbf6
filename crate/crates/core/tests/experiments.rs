use seqclass::experiments::{
    emit_report, esc_vs_vl, run_experiment, threshold_sweep, wilson_interval, ClassifierKind,
    ExperimentConfig, ExperimentReport, PairKind, ReportFormat, CSV_COLUMNS,
};

const BERNOULLI: &str = r#"{
  "pairs": {"explicit": [
    {"name": "fair-vs-biased", "p": {"type": "iid", "transitions": [0.5, 0.5]},
                               "q": {"type": "iid", "transitions": [0.95, 0.05]}}
  ]},
  "classifiers": ["ml", "esc", "vl"],
  "delta_crit": 0.5,
  "rate": 0.5,
  "delta_source": 0.05,
  "ml_n": 64,
  "grid": [{"K": 16, "N": 512, "k0": 0}],
  "trials": 100,
  "seed": 5
}"#;

fn config() -> ExperimentConfig {
    ExperimentConfig::from_json(BERNOULLI).unwrap()
}

#[test]
fn universal_rules_do_not_beat_known_source_rule() {
    let r = run_experiment(&config(), Some(2)).unwrap();
    let n_bar = 16 * 512 + 512;
    let ml = r
        .cell(n_bar, ClassifierKind::Ml, PairKind::Different)
        .unwrap();
    assert!(ml.lambda_hat <= 0.05, "ml {}", ml.lambda_hat);
    for k in [ClassifierKind::Esc, ClassifierKind::Vl] {
        let c = r.cell(n_bar, k, PairKind::Different).unwrap();
        let half = (ml.ci_hi - ml.ci_lo) / 2.0;
        assert!(c.lambda_hat >= ml.lambda_hat - 2.0 * half);
        assert!(c.ci_lo <= c.lambda_hat && c.lambda_hat <= c.ci_hi);
    }
}

#[test]
fn report_round_trips_through_json() {
    let r = run_experiment(&config(), None).unwrap();
    let back = ExperimentReport::from_json(&r.to_json_string().unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.config_hash, config().hash());
    assert_eq!(r.seed, 5);
    assert!(!r.tool_version.is_empty());
}

#[test]
fn csv_has_header_and_one_row_per_cell() {
    let mut cfg = config();
    cfg.classifiers = vec![ClassifierKind::Vl];
    cfg.trials = 10;
    let r = run_experiment(&cfg, None).unwrap();
    let text = r.to_csv_string().unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 1 + r.cells.len());
    assert_eq!(r.cells.len(), 1);

    cfg.grid.clear();
    let empty = run_experiment(&cfg, None).unwrap();
    assert_eq!(empty.to_csv_string().unwrap().lines().count(), 1);
}

#[test]
fn hash_tracks_every_field() {
    let a = config();
    let mut b = a.clone();
    b.seed += 1;
    let mut c = a.clone();
    c.delta_crit = 0.51;
    assert_eq!(a.hash(), config().hash());
    assert_ne!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn emitted_files_match_in_memory_report() {
    let mut cfg = config();
    cfg.trials = 10;
    let r = run_experiment(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    emit_report(&r, ReportFormat::Csv, &csv).unwrap();
    emit_report(&r, ReportFormat::Json, &json).unwrap();
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        r.to_csv_string().unwrap()
    );
    let back = ExperimentReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, r);
    // only the two outputs remain, no temporaries
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn violated_assertions_are_reported() {
    let mut cfg = config();
    cfg.trials = 20;
    cfg.classifiers = vec![ClassifierKind::Ml];
    cfg.assertions = serde_json::from_str(
        r#"[{"classifier": "ml", "pair_kind": "different", "min_lambda": 0.5},
            {"classifier": "ml", "pair_kind": "different", "max_lambda": 1.0},
            {"classifier": "esc", "pair_kind": "same"}]"#,
    )
    .unwrap();
    let r = run_experiment(&cfg, None).unwrap();
    assert_eq!(r.assertion_failures.len(), 2, "{:?}", r.assertion_failures);
}

#[test]
fn same_pairs_have_zero_ml_error() {
    let cfg = ExperimentConfig::from_json(
        r#"{"pairs": {"explicit": [{"p": {"type": "iid", "transitions": [0.3, 0.7]}}]},
            "classifiers": ["ml"], "delta_crit": 0.5, "ml_n": 16,
            "grid": [{"K": 2, "N": 64, "k0": 0}], "trials": 50, "seed": 1}"#,
    )
    .unwrap();
    let r = run_experiment(&cfg, None).unwrap();
    let c = &r.cells[0];
    assert_eq!((c.pair_kind, c.errors, c.trials), (PairKind::Same, 0, 50));
    assert_eq!((c.ci_lo, c.ci_hi), wilson_interval(0, 50));
}

#[test]
fn sweep_requires_straddling_grid() {
    let adv = r#"{"pairs": {"adversarial": {"ell": 16, "rate": 0.5, "min_dist_frac": 0.25,
        "dither": 0.05, "members": 2, "codebook_seed": 3}},
        "classifiers": ["vl"], "delta_crit": 0.25, "grid": GRID, "trials": 4, "seed": 1}"#;
    // N0 = 2^(0.5 * 16) = 256
    let one_side =
        ExperimentConfig::from_json(&adv.replace("GRID", r#"[{"K": 1, "N": 512, "k0": 0}]"#))
            .unwrap();
    assert!(threshold_sweep(&one_side, None).is_err());
    let both = ExperimentConfig::from_json(&adv.replace(
        "GRID",
        r#"[{"K": 1, "N": 64, "k0": 0}, {"K": 1, "N": 512, "k0": 0}]"#,
    ))
    .unwrap();
    let r = threshold_sweep(&both, None).unwrap();
    assert_eq!(r.n0_threshold, Some(256.0));
    assert!(r.cells.iter().all(|c| c.n0_threshold == Some(256.0)));

    let gaps = esc_vs_vl(&both, None).unwrap();
    assert!(!gaps.gaps.is_empty());
    for g in &gaps.gaps {
        assert!((g.gap - (g.lambda_esc - g.lambda_vl)).abs() < 1e-15);
    }
}
