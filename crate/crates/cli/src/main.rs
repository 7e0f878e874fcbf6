//! `seqclass` command-line front end.
//!
//! Exit codes: 0 on success, 1 on any validation or I/O error (one JSON
//! line on standard error), 2 when an experiment's embedded assertions fail.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use seqclass::classifiers::{esc_classify, ml_classify, vl_classify, ClassifierParams, Decision};
use seqclass::divergence::{
    kl_divergence_n, vl_divergence_n, DivergenceKind, Method, VlLengthParams,
};
use seqclass::experiments::{
    emit_report, esc_vs_vl, json_hash, run_experiment, threshold_sweep, write_atomic,
    ExperimentConfig, ReportFormat,
};
use seqclass::recurrence::TrainingLayout;
use seqclass::sources::spec_file::{CodebookSpec, SourceKind, SourceSpec, Transitions};
use seqclass::sources::{Alphabet, Sequence, SourceModel};

const SYMBOLS: &str = "\
Symbols and flags:
  Delta (fidelity criterion, bits)       --delta-crit
  delta (transition floor of a source)   --delta-floor  (--dither for generated members)
  ell   (codeword length)                --ell
  R     (rate, bits per symbol)          --rate
  eps0  (length slack)                   --eps0
  beta0 (minimum distance fraction)      --min-dist-frac
  K, N, k0 (blocks, block length, guard) --blocks, --block-len, --guard
  n     (block order)                    --n

Exit codes: 0 success, 1 invalid input, 2 experiment assertion failure.";

#[derive(Parser, Debug)]
#[command(
    name = "seqclass",
    version,
    about = "Universal same-source classification of finite sequences",
    after_help = SYMBOLS
)]
struct Cli {
    /// Master seed for randomized work; 0 when absent (logged unless --quiet)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, written atomically; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; experiments default to csv, everything else is json
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress informational messages on standard error
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a source spec file
    GenSource(GenSourceArgs),
    /// Draw a sequence from a source spec (raw bytes, one per symbol)
    Sample(SampleArgs),
    /// Compute the KL or VL divergence between two source specs
    Divergence(DivergenceArgs),
    /// Classify one pair of sequence files
    Classify(ClassifyArgs),
    /// Run an experiment config and write its report
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GenKind {
    Iid,
    Markov,
    Adversarial,
}

#[derive(Args, Debug, Serialize)]
struct GenSourceArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 2)]
    alphabet_size: usize,
    /// Markov order
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// JSON transition rows, e.g. '[[0.9,0.1],[0.2,0.8]]'; a flat vector for iid
    #[arg(long)]
    transitions: Option<String>,
    /// Bit-flip rate; the floor delta of an adversarial member
    #[arg(long, default_value_t = 0.0)]
    dither: f64,
    /// Codeword length ell
    #[arg(long)]
    ell: Option<usize>,
    /// Codebook rate R
    #[arg(long)]
    rate: Option<f64>,
    /// Cross-codebook minimum distance fraction beta0
    #[arg(long, default_value_t = 0.25)]
    min_dist_frac: f64,
    /// Number of codebooks in the family
    #[arg(long, default_value_t = 2)]
    members: usize,
    /// Family member to emit
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Codeword repetitions per segment
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Args, Debug, Serialize)]
struct DivergenceArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Block order n
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
    /// Rate R (VL only)
    #[arg(long)]
    rate: Option<f64>,
    /// Length slack eps0 (VL only)
    #[arg(long, default_value_t = VlLengthParams::DEFAULT_EPS0)]
    eps0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum KindArg {
    Kl,
    Vl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ClassifierArg {
    Ml,
    Esc,
    Vl,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    #[arg(long, value_enum)]
    method: ClassifierArg,
    /// Sequence file X (for ml, the observed sequence)
    #[arg(long)]
    x: PathBuf,
    /// Sequence file Y (esc and vl)
    #[arg(long)]
    y: Option<PathBuf>,
    /// JSON classifier parameters; flags below override its fields
    #[arg(long)]
    params: Option<PathBuf>,
    /// Source spec P (ml)
    #[arg(long)]
    p: Option<PathBuf>,
    /// Source spec Q (ml)
    #[arg(long)]
    q: Option<PathBuf>,
    /// ml: use only the first n symbols of X
    #[arg(long)]
    n: Option<usize>,
    /// Fidelity criterion Delta in bits
    #[arg(long)]
    delta_crit: Option<f64>,
    /// Transition floor delta; sets the esc block length
    #[arg(long)]
    delta_floor: Option<f64>,
    /// Rate R; sets the vl match-length cap
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Training blocks K
    #[arg(long)]
    blocks: Option<usize>,
    /// Block length N
    #[arg(long)]
    block_len: Option<usize>,
    /// Guard length k0
    #[arg(long)]
    guard: Option<usize>,
    #[arg(long, default_value_t = 2)]
    alphabet_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Run,
    Sweep,
    EscVsVl,
}

#[derive(Args, Debug, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "run")]
    mode: Mode,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<seqclass::Error> for Failure {
    fn from(e: seqclass::Error) -> Self {
        let kind = match e {
            seqclass::Error::Io(_) | seqclass::Error::Csv(_) => "io",
            seqclass::Error::Json(_) => "parse",
            _ => "validation",
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            kind: "parse",
            message: e.to_string(),
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            report_failure(&Failure::usage(line.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            report_failure(&f);
            ExitCode::from(1)
        }
    }
}

fn report_failure(f: &Failure) {
    eprintln!("{}", json!({"error": f.kind, "message": f.message}));
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::GenSource(a) => gen_source(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Divergence(a) => divergence(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Experiment(a) => experiment(cli, a),
    }
}

fn seed_for_random_work(cli: &Cli) -> u64 {
    cli.seed.unwrap_or_else(|| {
        if !cli.quiet {
            eprintln!("seed not given; using 0");
        }
        0
    })
}

fn require_json(cli: &Cli) -> Result<(), Failure> {
    match cli.format {
        Some(Format::Csv) => Err(Failure::usage(
            "csv output is only available for experiment",
        )),
        _ => Ok(()),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Adds version, hash and seed to a JSON object and writes it.
fn emit_json(cli: &Cli, body: Value, hashed: &impl Serialize, seed: u64) -> Result<(), Failure> {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    map.insert("tool_version".into(), json!(seqclass::VERSION));
    map.insert("config_hash".into(), json!(json_hash(hashed)));
    map.insert("seed".into(), json!(seed));
    let text = serde_json::to_string_pretty(&Value::Object(map))? + "\n";
    write_output(cli.out.as_deref(), text.as_bytes())
}

fn gen_source(cli: &Cli, a: &GenSourceArgs) -> Outcome {
    require_json(cli)?;
    let mut seed = cli.seed.unwrap_or(0);
    let spec = match a.kind {
        GenKind::Iid | GenKind::Markov => {
            let text = a
                .transitions
                .as_deref()
                .ok_or_else(|| Failure::usage("--transitions is required for iid and markov"))?;
            let transitions: Transitions = serde_json::from_str(text)?;
            SourceSpec {
                kind: if a.kind == GenKind::Iid {
                    SourceKind::Iid
                } else {
                    SourceKind::Markov
                },
                alphabet_size: a.alphabet_size,
                order: if a.kind == GenKind::Iid { 0 } else { a.order },
                transitions: Some(transitions),
                dither: a.dither,
                codebook: None,
                repeats: None,
                seed: None,
            }
        }
        GenKind::Adversarial => {
            let (ell, rate) = match (a.ell, a.rate) {
                (Some(e), Some(r)) => (e, r),
                _ => {
                    return Err(Failure::usage(
                        "--ell and --rate are required for adversarial",
                    ))
                }
            };
            seed = seed_for_random_work(cli);
            SourceSpec {
                kind: SourceKind::BlockRepeat,
                alphabet_size: 2,
                order: 0,
                transitions: None,
                dither: a.dither,
                codebook: Some(CodebookSpec::Build {
                    ell,
                    rate,
                    min_dist_frac: a.min_dist_frac,
                    count: a.members,
                    index: a.index,
                    seed,
                }),
                repeats: a.repeats,
                seed: Some(seed),
            }
        }
    };
    spec.build()?;
    let body = serde_json::to_value(&spec)?;
    emit_json(cli, body, &spec, seed)?;
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<(SourceSpec, SourceModel), Failure> {
    let spec = SourceSpec::load(path)?;
    let model = spec.build()?;
    Ok((spec, model))
}

fn sample(cli: &Cli, a: &SampleArgs) -> Outcome {
    require_json(cli)?;
    let seed = seed_for_random_work(cli);
    let (spec, model) = load_model(&a.spec)?;
    let x = model.sample(a.len, seed);
    match &cli.out {
        Some(path) => {
            write_atomic(path, x.as_slice())?;
            if !cli.quiet {
                let body =
                    json!({"len": a.len, "out": path, "alphabet_size": model.alphabet().size()});
                let hashed = json!({"spec": spec, "len": a.len});
                println!("{}", with_meta(body, &hashed, seed)?);
            }
        }
        None => std::io::stdout().write_all(x.as_slice())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn with_meta(mut body: Value, hashed: &impl Serialize, seed: u64) -> Result<String, Failure> {
    body["tool_version"] = json!(seqclass::VERSION);
    body["config_hash"] = json!(json_hash(hashed));
    body["seed"] = json!(seed);
    Ok(serde_json::to_string(&body)?)
}

fn divergence(cli: &Cli, a: &DivergenceArgs) -> Outcome {
    require_json(cli)?;
    let (ps, p) = load_model(&a.p)?;
    let (qs, q) = load_model(&a.q)?;
    let (method, seed) = match a.method {
        MethodArg::Exact => (Method::Exact, cli.seed.unwrap_or(0)),
        MethodArg::Mc => {
            let seed = seed_for_random_work(cli);
            (
                Method::MonteCarlo {
                    samples: a.samples,
                    seed,
                },
                seed,
            )
        }
    };
    let d = match a.kind {
        KindArg::Kl => kl_divergence_n(&p, &q, a.n, method)?,
        KindArg::Vl => {
            let rate = a
                .rate
                .ok_or_else(|| Failure::usage("--rate is required for vl"))?;
            vl_divergence_n(&p, &q, &VlLengthParams::new(a.n, rate, a.eps0)?, method)?
        }
    };
    let body = json!({
        "kind": match d.kind { DivergenceKind::Kl => "kl", DivergenceKind::Vl => "vl" },
        "n": d.order_n,
        "value_bits": d.value,
        "std_error": d.std_error,
        "method": d.method.label(),
    });
    emit_json(cli, body, &json!({"args": a, "p": ps, "q": qs}), seed)?;
    Ok(ExitCode::SUCCESS)
}

fn read_sequence(path: &Path, alphabet: Alphabet) -> Result<Sequence, Failure> {
    let bytes = std::fs::read(path).map_err(|e| {
        Failure::from(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(Sequence::new(alphabet, bytes)?)
}

fn resolve_params(a: &ClassifyArgs) -> Result<ClassifierParams, Failure> {
    let base: Option<ClassifierParams> = match &a.params {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    fn pick<T: Copy>(flag: Option<T>, base: Option<T>, name: &str) -> Result<T, Failure> {
        flag.or(base)
            .ok_or_else(|| Failure::usage(format!("missing --{name} (or a --params file)")))
    }
    let layout = base.map(|b| b.layout);
    let layout = TrainingLayout::new(
        pick(a.blocks, layout.map(|l| l.blocks), "blocks")?,
        pick(a.block_len, layout.map(|l| l.block_len), "block-len")?,
        a.guard.or(layout.map(|l| l.guard)).unwrap_or(0),
    )?;
    let params = ClassifierParams {
        delta_crit: pick(a.delta_crit, base.map(|b| b.delta_crit), "delta-crit")?,
        layout,
        eps0: a
            .eps0
            .or(base.map(|b| b.eps0))
            .unwrap_or(VlLengthParams::DEFAULT_EPS0),
        delta_source: pick(a.delta_floor, base.map(|b| b.delta_source), "delta-floor")?,
        rate: pick(a.rate, base.map(|b| b.rate), "rate")?,
    };
    params.validate()?;
    Ok(params)
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Outcome {
    require_json(cli)?;
    let alphabet = Alphabet::new(a.alphabet_size)?;
    let x = read_sequence(&a.x, alphabet)?;
    let (decision, hashed): (Decision, Value) = match a.method {
        ClassifierArg::Ml => {
            let (p, q) = match (&a.p, &a.q) {
                (Some(p), Some(q)) => (load_model(p)?, load_model(q)?),
                _ => return Err(Failure::usage("ml needs --p and --q")),
            };
            let delta_crit = match a.delta_crit {
                Some(d) => d,
                None => resolve_params(a)?.delta_crit,
            };
            let n = a.n.unwrap_or(x.len());
            if n > x.len() {
                return Err(seqclass::Error::SequenceTooShort {
                    needed: n,
                    got: x.len(),
                }
                .into());
            }
            let d = ml_classify(&p.1, &q.1, &x.as_slice()[..n], delta_crit)?;
            (d, json!({"args": a, "p": p.0, "q": q.0}))
        }
        ClassifierArg::Esc | ClassifierArg::Vl => {
            let y_path =
                a.y.as_ref()
                    .ok_or_else(|| Failure::usage("--y is required"))?;
            let y = read_sequence(y_path, alphabet)?;
            let params = resolve_params(a)?;
            let d = if a.method == ClassifierArg::Esc {
                esc_classify(&x, &y, &params)?
            } else {
                vl_classify(&x, &y, &params)?
            };
            (d, json!({"args": a, "params": params}))
        }
    };
    let body = json!({
        "method": a.method,
        "verdict": decision.verdict,
        "statistic": decision.statistic,
        "threshold": decision.threshold,
    });
    emit_json(cli, body, &hashed, cli.seed.unwrap_or(0))?;
    Ok(ExitCode::SUCCESS)
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Outcome {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let report = match a.mode {
        Mode::Run => run_experiment(&config, a.threads)?,
        Mode::Sweep => threshold_sweep(&config, a.threads)?,
        Mode::EscVsVl => esc_vs_vl(&config, a.threads)?,
    };
    let format = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    match &cli.out {
        Some(path) => emit_report(&report, format, path)?,
        None => {
            let text = match format {
                ReportFormat::Csv => report.to_csv_string()?,
                ReportFormat::Json => report.to_json_string()? + "\n",
            };
            write_output(None, text.as_bytes())?;
        }
    }
    if !cli.quiet {
        for e in &report.events {
            eprintln!("{e}");
        }
    }
    if report.assertion_failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.assertion_failures {
            eprintln!("{}", json!({"assertion_failed": f}));
        }
        Ok(ExitCode::from(2))
    }
}
