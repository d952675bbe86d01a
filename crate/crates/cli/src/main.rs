use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decole::eval::{evaluate, metrics_csv};
use decole::experiment::{run_to_dir, ExperimentConfig};
use decole::io::write_atomic;
use decole::prune::{
    cl_prune, decole_prune, random_prune, retain, Method, PruneConfig, PruneResult,
};
use decole::synth::{generate_population, inject_noise, NoiseSpec, SynthConfig};
use decole::{read_csv, write_csv, Error, ErrorKind, Execution};
use serde::Deserialize;

/// Detect and prune biased labels with group-aware confident learning.
#[derive(Debug, Parser)]
#[command(name = "decole", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the two-group synthetic population with label noise.
    Synth(SynthArgs),
    /// Prune suspected label errors from a dataset CSV.
    Prune(PruneArgs),
    /// Score a pruned dataset against gold labels.
    Eval(EvalArgs),
    /// Run the full multi-seed comparison and write report files.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON file with `synth` and `noise` sections; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of the population in group 1.
    #[arg(long)]
    majority_fraction: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write gold labels only (no noise injected).
    #[arg(long)]
    clean: bool,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFile {
    synth: SynthConfig,
    noise: NoiseSpec,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    input: PathBuf,
    /// JSON learner settings (l2_lambda, max_iterations, tolerance, k_cv, group_feature).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    l2_lambda: Option<f64>,
    /// Feed group indicators to the classifier (defaults: off for decole, on for cl).
    #[arg(long)]
    group_feature: Option<bool>,
    /// Number of rows to remove (random only).
    #[arg(long, required_if_eq("method", "random"))]
    count: Option<usize>,
    #[arg(long)]
    output_retained: Option<PathBuf>,
    #[arg(long)]
    output_report: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Retained dataset CSV (must carry gold labels).
    #[arg(long)]
    retained: PathBuf,
    /// Prune report JSON; with --original, enables pruning recall/precision.
    #[arg(long, requires = "original")]
    report: Option<PathBuf>,
    /// Pre-pruning dataset CSV.
    #[arg(long)]
    original: Option<PathBuf>,
    /// Metrics JSON path (stdout when omitted).
    #[arg(long)]
    output_json: Option<PathBuf>,
    /// Flat metric,scope,value CSV.
    #[arg(long)]
    output_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "DECOLE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> decole::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> decole::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn synth(args: SynthArgs) -> decole::Result<()> {
    let mut file: SynthFile = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthFile::default(),
    };
    let cfg = &mut file.synth;
    cfg.n = args.n.unwrap_or(cfg.n);
    cfg.majority_fraction = args.majority_fraction.unwrap_or(cfg.majority_fraction);
    cfg.sigma = args.sigma.unwrap_or(cfg.sigma);
    cfg.seed = args.seed.unwrap_or(cfg.seed);

    let population = generate_population(&file.synth)?;
    let dataset = if args.clean {
        population
    } else {
        inject_noise(&population, &file.noise, file.synth.seed)?
    };
    write_csv(&dataset, &args.output)?;
    eprintln!("wrote {} rows to {}", dataset.n(), args.output.display());
    Ok(())
}

fn prune(args: PruneArgs) -> decole::Result<()> {
    let dataset = read_csv(&args.input)?;
    let mut config: PruneConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => PruneConfig::default(),
    };
    config.k_cv = args.folds.unwrap_or(config.k_cv);
    config.l2_lambda = args.l2_lambda.unwrap_or(config.l2_lambda);
    config.group_feature = args.group_feature.or(config.group_feature);
    if args.sequential {
        config.execution = Execution::Sequential;
    }

    let result: PruneResult = match args.method {
        Method::Decole => decole_prune(&dataset, &config, args.seed)?,
        Method::Cl => cl_prune(&dataset, &config, args.seed)?,
        Method::Random => random_prune(&dataset, args.count.unwrap_or(0), args.seed)?,
    };
    for w in &result.warnings {
        eprintln!("warning [{}]: {}", w.scope, w.detail);
    }
    let report = json_bytes(&result)?;
    match &args.output_report {
        Some(path) => write_atomic(path, &report)?,
        None => print!("{}", String::from_utf8_lossy(&report)),
    }
    if let Some(path) = &args.output_retained {
        write_csv(&retain(&dataset, &result)?, path)?;
    }
    eprintln!(
        "{}: pruned {} of {} rows",
        result.method,
        result.len(),
        dataset.n()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> decole::Result<()> {
    let retained = read_csv(&args.retained)?;
    let original = args.original.as_deref().map(read_csv).transpose()?;
    let result: Option<PruneResult> = args.report.as_deref().map(read_json).transpose()?;
    let report = evaluate(&retained, original.as_ref(), result.as_ref())?;
    let json = json_bytes(&report)?;
    match &args.output_json {
        Some(path) => write_atomic(path, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    if let Some(path) = &args.output_csv {
        write_atomic(path, &metrics_csv(&report.metrics)?)?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> decole::Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if args.sequential {
        config.execution = Execution::Sequential;
    }
    let dir = args
        .output_dir
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("decole-output"));
    let report = run_to_dir(&config, &dir)?;
    for (method, agg) in &report.aggregate.methods {
        let show = |key: &str| match (agg.mean(key), agg.half_width(key)) {
            (Some(m), Some(h)) => format!("{m:.4} ± {h:.4}"),
            (Some(m), None) => format!("{m:.4}"),
            _ => "n/a".into(),
        };
        eprintln!(
            "{method:>7}: recall {}  precision {}  g0 FNR {}  g1 FPR {}",
            show("recall/overall"),
            show("precision/overall"),
            show("fnr/g0"),
            show("fpr/g1")
        );
    }
    eprintln!("reports written to {}", dir.display());
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => synth(args),
        Command::Prune(args) => prune(args),
        Command::Eval(args) => eval(args),
        Command::Experiment(args) => experiment(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let message = serde_json::json!({
                "error": {
                    "kind": format!("{kind:?}").to_lowercase(),
                    "message": e.to_string(),
                }
            });
            eprintln!("{message}");
            ExitCode::from(exit_code(kind))
        }
    }
}
