//! `mwc`: decide and construct geodesic connections from the command line.
//!
//! Reports go to stdout as JSON (CSV for `mu-map`); diagnostics go to stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use mwc::connect::{mu_map, ConnectError, MuSample, Resolution};
use mwc::model::{catalog_entries, model_from_json};
use mwc::{
    check_conditions, classify_causal, connect, verify_connection, ConnectOptions, ConnectionStatus, End,
    GeodesicCandidate, Problem, SpacetimeModel,
};
use serde::Deserialize;
use serde_json::{json, Value};

const EXIT_NOT_CONNECTED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

#[derive(Parser)]
#[command(name = "mwc", version, about = "Geodesic connectedness of multiwarped spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the endpoint conditions that guarantee connectedness.
    Conditions {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Causal character of a pair: timelike, lightlike or none.
    Classify(ProblemArgs),
    /// Search for a connecting geodesic and verify it.
    Connect(ProblemArgs),
    /// Write the matching defects on the (y, K) grid as CSV.
    MuMap(ProblemArgs),
    /// Re-integrate a candidate geodesic and report residuals.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        /// Candidate JSON, or a connect report whose best candidate is checked.
        #[arg(long)]
        candidate: PathBuf,
    },
    /// List the built-in models.
    Catalog,
}

#[derive(Args)]
struct ModelArg {
    /// Model file, or inline JSON.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file with `model`, `tau0`, `tau1`, `l` and optional settings.
    /// Flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, allow_hyphen_values = true)]
    tau0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau1: Option<f64>,
    /// Fiber distances, comma separated.
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<f64>>,
    /// Highest winding index tried on closed fibers.
    #[arg(long)]
    windings: Option<usize>,
    #[arg(long)]
    k_steps: Option<usize>,
    #[arg(long)]
    c_steps: Option<usize>,
    /// Output file (mu-map); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemConfig {
    model: Option<Value>,
    tau0: Option<f64>,
    tau1: Option<f64>,
    l: Option<Vec<f64>>,
    max_winding: Option<usize>,
    resolution: Option<ResolutionConfig>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolutionConfig {
    k_steps: Option<usize>,
    c_steps: Option<usize>,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

fn config_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: error.into(),
    }
}

/// Bad input maps to the configuration exit code; anything else is a
/// numerical failure.
fn connect_err(e: ConnectError) -> Failure {
    let code = match e {
        ConnectError::Config(_) | ConnectError::Precondition(_) | ConnectError::Model(_) | ConnectError::Unsupported(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_UNDECIDED,
    };
    Failure {
        code,
        error: e.into(),
    }
}

struct Job {
    model: SpacetimeModel,
    problem: Problem,
    opts: ConnectOptions,
    out: Option<PathBuf>,
}

fn load_model_value(spec: &str) -> anyhow::Result<Value> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).with_context(|| format!("cannot read model file {spec}"))?
    };
    serde_json::from_str(&text).context("model is not valid JSON")
}

fn build_model(v: &Value) -> Outcome<SpacetimeModel> {
    model_from_json(v).map_err(config_err)
}

fn model_only(arg: &ModelArg) -> Outcome<SpacetimeModel> {
    let spec = arg.model.as_deref().ok_or_else(|| config_err(anyhow!("--model is required")))?;
    build_model(&load_model_value(spec).map_err(config_err)?)
}

fn job(args: &ProblemArgs) -> Outcome<Job> {
    let cfg: ProblemConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read problem file {}", path.display()))
                .map_err(config_err)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid problem file {}", path.display()))
                .map_err(config_err)?
        }
        None => ProblemConfig::default(),
    };
    let model_value = match (&args.model.model, cfg.model) {
        (Some(spec), _) => load_model_value(spec).map_err(config_err)?,
        // A string in a problem file is a path relative to that file.
        (None, Some(Value::String(p))) => {
            let base = args.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
            load_model_value(&base.join(p).to_string_lossy()).map_err(config_err)?
        }
        (None, Some(v)) => v,
        (None, None) => return Err(config_err(anyhow!("--model is required"))),
    };
    let model = build_model(&model_value)?;
    let missing = |name: &str| config_err(anyhow!("--{name} is required"));
    let tau0 = args.tau0.or(cfg.tau0).ok_or_else(|| missing("tau0"))?;
    let tau1 = args.tau1.or(cfg.tau1).ok_or_else(|| missing("tau1"))?;
    let l = args.l.clone().or(cfg.l).ok_or_else(|| missing("l"))?;
    if l.len() != model.n() {
        return Err(config_err(anyhow!(
            "--l has {} entries but the model has {} factors",
            l.len(),
            model.n()
        )));
    }
    if let Some(bad) = l.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(config_err(anyhow!("fiber distances must be finite and nonnegative, got {bad}")));
    }
    for (name, t) in [("tau0", tau0), ("tau1", tau1)] {
        if !model.interval.contains(t) {
            return Err(config_err(anyhow!(
                "{name} = {t} is outside the interval ({}, {})",
                model.interval.a,
                model.interval.b
            )));
        }
    }
    let res = cfg.resolution;
    let opts = ConnectOptions {
        max_winding: args.windings.or(cfg.max_winding).unwrap_or(ConnectOptions::default().max_winding),
        k_steps: args.k_steps.or(res.as_ref().and_then(|r| r.k_steps)),
        c_steps: args.c_steps.or(res.as_ref().and_then(|r| r.c_steps)),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
    };
    Ok(Job {
        model,
        problem: Problem { tau0, tau1, l },
        opts,
        out: args.out.clone(),
    })
}

fn print_json(v: &impl serde::Serialize) -> Outcome<()> {
    let text = serde_json::to_string_pretty(v).map_err(config_err)?;
    match writeln!(io::stdout().lock(), "{text}") {
        // A closed pipe means the reader has what it wants.
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(config_err(e)),
        _ => Ok(()),
    }
}

fn cmd_conditions(arg: &ModelArg) -> Outcome<u8> {
    let model = model_only(arg)?;
    let report = check_conditions(&model).map_err(config_err)?;
    print_json(&report)?;
    Ok(0)
}

fn cmd_classify(args: &ProblemArgs) -> Outcome<u8> {
    let Job { model, problem, .. } = job(args)?;
    // Causal relations are symmetric; the solver wants the future-directed order.
    let reversed = problem.tau1 < problem.tau0;
    let (lo, hi) = if reversed { (problem.tau1, problem.tau0) } else { (problem.tau0, problem.tau1) };
    let class = classify_causal(&model, lo, hi, &problem.l).map_err(|e| Failure {
        code: EXIT_UNDECIDED,
        error: e.into(),
    })?;
    print_json(&json!({
        "kind": class.kind,
        "reversed": reversed,
        "witness": class.witness,
    }))?;
    Ok(0)
}

fn cmd_connect(args: &ProblemArgs) -> Outcome<u8> {
    let Job { model, problem, opts, .. } = job(args)?;
    let report = connect(&model, &problem, &opts).map_err(connect_err)?;
    print_json(&report)?;
    Ok(match report.status {
        ConnectionStatus::Connected { .. } => 0,
        ConnectionStatus::NotConnected { .. } => EXIT_NOT_CONNECTED,
        ConnectionStatus::Undecided { .. } => EXIT_UNDECIDED,
    })
}

fn end_label(e: Option<End>) -> &'static str {
    match e {
        Some(End::A) => "a",
        Some(End::B) => "b",
        None => "",
    }
}

fn write_mu_csv(w: impl Write, n: usize, samples: &[MuSample]) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..n).map(|i| format!("y{i}")).collect();
    header.push("K".into());
    header.extend((2..=n).map(|i| format!("mu_{i}")));
    header.extend(["s1", "fake", "escape_end"].map(String::from));
    csv.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.y.iter().map(|v| v.to_string()).collect();
        row.push(s.k.to_string());
        row.extend(s.mu.iter().map(|v| v.to_string()));
        row.push(s.s1.to_string());
        row.push(s.fake.to_string());
        row.push(end_label(s.escape_end).into());
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

fn cmd_mu_map(args: &ProblemArgs) -> Outcome<u8> {
    let Job { model, problem, opts, out } = job(args)?;
    let n = model.n();
    if n < 2 {
        return Err(config_err(anyhow!("mu-map requires n ≥ 2 factors, the model has {n}")));
    }
    let res: Resolution = opts.resolution(n);
    let samples = mu_map(&model, &problem, res).map_err(connect_err)?;
    let written = match &out {
        Some(path) => fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .and_then(|f| write_mu_csv(io::BufWriter::new(f), n, &samples)),
        None => write_mu_csv(io::stdout().lock(), n, &samples),
    };
    written.map_err(config_err)?;
    if let Some(path) = out {
        eprintln!("wrote {} samples to {}", samples.len(), path.display());
    }
    Ok(0)
}

/// A bare candidate, a verified candidate, or a connect report.
fn read_candidate(path: &Path) -> anyhow::Result<GeodesicCandidate> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).context("candidate file is not valid JSON")?;
    let inner = if let Some(list) = v.get("candidates").and_then(Value::as_array) {
        let best = list.first().ok_or_else(|| anyhow!("the report lists no candidates"))?;
        best.get("candidate").cloned().unwrap_or_else(|| best.clone())
    } else if v.get("status").is_some() {
        bail!("the report has no connected candidate");
    } else {
        v.get("candidate").cloned().unwrap_or(v)
    };
    serde_json::from_value(inner).context("not a geodesic candidate")
}

fn cmd_verify(arg: &ModelArg, candidate: &Path) -> Outcome<u8> {
    let model = model_only(arg)?;
    let cand = read_candidate(candidate).map_err(config_err)?;
    let report = verify_connection(&model, &cand).map_err(config_err)?;
    print_json(&report)?;
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_catalog() -> Outcome<u8> {
    print_json(&catalog_entries())?;
    Ok(0)
}

fn configure_threads() -> Outcome<()> {
    let Ok(raw) = std::env::var("MWC_THREADS") else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| config_err(anyhow!("MWC_THREADS must be a nonnegative integer, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(config_err)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<u8> {
    configure_threads()?;
    match &cli.command {
        Command::Conditions { model } => cmd_conditions(model),
        Command::Classify(args) => cmd_classify(args),
        Command::Connect(args) => cmd_connect(args),
        Command::MuMap(args) => cmd_mu_map(args),
        Command::Verify { model, candidate } => cmd_verify(model, candidate),
        Command::Catalog => cmd_catalog(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
