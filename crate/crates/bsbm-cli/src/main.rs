//! `bsbm`: generation, one-shot recovery, grid experiments, concentration
//! benches and plot emission for the bipartite stochastic block model.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 I/O failure,
//! 4 degenerate input. Every error path prints a one-line JSON reason to
//! stderr.

use bsbm::bench::{
    bernstein_tail_check, binomial_tail_lower, default_t_grid, hollow_vs_debias,
    oracle_impossibility_sweep, write_bench_csv, BenchError, BenchRecord,
};
use bsbm::estimators::{
    debiased_spectral, diagonal_deletion_svd, hollowed_lloyd, oracle_estimator, spectral_estimator,
    svd_estimator, EstimatorConfig, EstimatorError, Method, RecoveryOutcome, TruthChannel,
};
use bsbm::experiment::{run_grid, write_csv, ExperimentGrid};
use bsbm::io::{read_labels, read_matrix_market, write_labels, write_matrix_market};
use bsbm::model::{sample_bsbm, BsbmParams, LabelVector};
use bsbm::plot::{render_csv_chart, PlotSpec};
use bsbm::rng::RngStream;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bsbm",
    version,
    about = "Bipartite stochastic block model toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one instance and write the matrix plus both label files.
    Generate(GenerateArgs),
    /// Run one recovery method on a Matrix Market file.
    Recover(RecoverArgs),
    /// Run a grid experiment from a config file and write a CSV.
    Experiment(ExperimentArgs),
    /// Run a concentration bench and write its CSV.
    Concentration(ConcentrationArgs),
    /// Render an SVG line chart from a result CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma2: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out_matrix: PathBuf,
    #[arg(long, value_name = "PATH")]
    out_labels1: PathBuf,
    #[arg(long, value_name = "PATH")]
    out_labels2: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, value_name = "PATH")]
    matrix: PathBuf,
    /// SP, HL, SVD, DS, DD or O.
    #[arg(long)]
    method: String,
    /// Ground-truth labels of the first vertex set (supervised methods only).
    #[arg(long, value_name = "PATH")]
    labels1: Option<PathBuf>,
    /// Ground-truth labels of the second vertex set (DS only).
    #[arg(long, value_name = "PATH")]
    labels2: Option<PathBuf>,
    /// True edge intensity (supervised methods only).
    #[arg(long)]
    p: Option<f64>,
    /// True delta (DS only).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Worker threads; falls back to BSBM_THREADS, then the config value.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long, value_parser = ["bernstein", "hollow-vs-debias", "binomial-tail", "oracle-impossibility"])]
    mode: String,
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long = "in", value_name = "CSV")]
    input: PathBuf,
    #[arg(long, value_name = "SVG")]
    out: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    series: String,
    #[arg(long)]
    facet: Option<String>,
}

enum CliError {
    Usage(String),
    Io(String),
    Degenerate(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Degenerate(_) => "degenerate-input",
        }
    }

    fn detail(&self) -> &str {
        match self {
            CliError::Usage(d) | CliError::Io(d) | CliError::Degenerate(d) => d,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err<E: std::fmt::Display>(path: &Path, e: E) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "detail": e.detail() })
            );
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Recover(args) => recover(args),
        Command::Experiment(args) => experiment(args),
        Command::Concentration(args) => concentration(args),
        Command::Plot(args) => plot(args),
    }
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| io_err(path, e))?;
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let params = BsbmParams::with_imbalance(
        args.n1,
        args.n2,
        args.gamma1,
        args.gamma2,
        args.delta,
        args.p,
    )
    .map_err(usage)?;
    let (a, eta1, eta2) = sample_bsbm(&params, RngStream::new(args.seed, (0, 0)));
    write_file(&args.out_matrix, |w| write_matrix_market(&a, w))?;
    write_file(&args.out_labels1, |w| write_labels(&eta1, w))?;
    write_file(&args.out_labels2, |w| write_labels(&eta2, w))?;
    println!(
        "{}",
        serde_json::json!({
            "n1": a.n1(), "n2": a.n2(), "nnz": a.nnz(),
            "matrix": args.out_matrix, "labels1": args.out_labels1, "labels2": args.out_labels2,
        })
    );
    Ok(())
}

fn load_labels(path: &Path) -> Result<LabelVector, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_labels(BufReader::new(file)).map_err(|e| io_err(path, e))
}

fn recover(args: RecoverArgs) -> Result<(), CliError> {
    let method = Method::parse(&args.method)
        .ok_or_else(|| usage(format!("unknown method name `{}`", args.method)))?;

    // Truth flags are accepted exactly where the method needs them.
    let requires = |have: bool, flag: &str| -> Result<(), CliError> {
        if have {
            Ok(())
        } else {
            Err(usage(format!("method {method} requires --{flag}")))
        }
    };
    let forbids = |absent: bool, flag: &str| -> Result<(), CliError> {
        if absent {
            Ok(())
        } else {
            Err(usage(format!("method {method} must not receive --{flag}")))
        }
    };
    match method {
        Method::Oracle => {
            requires(args.labels1.is_some(), "labels1")?;
            requires(args.p.is_some(), "p")?;
            forbids(args.labels2.is_none(), "labels2")?;
            forbids(args.delta.is_none(), "delta")?;
        }
        Method::DebiasedSpectral => {
            requires(args.labels1.is_some(), "labels1")?;
            requires(args.labels2.is_some(), "labels2")?;
            requires(args.p.is_some(), "p")?;
            requires(args.delta.is_some(), "delta")?;
        }
        _ => {
            forbids(args.labels1.is_none(), "labels1")?;
            forbids(args.labels2.is_none(), "labels2")?;
            forbids(args.p.is_none(), "p")?;
            forbids(args.delta.is_none(), "delta")?;
        }
    }

    let file = fs::File::open(&args.matrix).map_err(|e| io_err(&args.matrix, e))?;
    let a = read_matrix_market(BufReader::new(file)).map_err(|e| io_err(&args.matrix, e))?;
    let cfg = EstimatorConfig::default();
    let stream = RngStream::new(args.seed, (0, 0));

    let truth1 = args.labels1.as_deref().map(load_labels).transpose()?;
    let truth2 = args.labels2.as_deref().map(load_labels).transpose()?;

    let outcome: Result<RecoveryOutcome, EstimatorError> = match method {
        Method::Spectral => spectral_estimator(&a, &cfg, stream),
        Method::HollowedLloyd => hollowed_lloyd(&a, &cfg, stream),
        Method::Svd => svd_estimator(&a, &cfg, stream),
        Method::DiagonalDeletion => diagonal_deletion_svd(&a, &cfg, stream),
        Method::Oracle => oracle_estimator(&a, args.p.unwrap(), truth1.as_ref().unwrap()),
        Method::DebiasedSpectral => {
            let eta1 = truth1.as_ref().unwrap();
            let eta2 = truth2.as_ref().unwrap();
            let params = BsbmParams::new(
                eta1.plus_count(),
                eta1.len() - eta1.plus_count(),
                eta2.plus_count(),
                eta2.len() - eta2.plus_count(),
                args.delta.unwrap(),
                args.p.unwrap(),
            )
            .map_err(usage)?;
            debiased_spectral(
                &a,
                TruthChannel {
                    params: &params,
                    eta1,
                    eta2,
                },
                &cfg,
                stream,
            )
        }
    };
    let mut outcome = match outcome {
        Ok(o) => o,
        Err(EstimatorError::DegenerateInput) => {
            return Err(CliError::Degenerate(format!(
                "{}: the instance carries no usable signal",
                args.matrix.display()
            )))
        }
        Err(e) => return Err(usage(e)),
    };

    let evaluation = truth1
        .as_ref()
        .map(|t| outcome.evaluate_against(t))
        .transpose()
        .map_err(usage)?;

    write_file(&args.out, |w| write_labels(&outcome.eta_hat, w))?;
    let mut summary = serde_json::json!({
        "method": method.short_name(),
        "n1": a.n1(),
        "n2": a.n2(),
        "degenerate_gap": outcome.degenerate_gap,
        "lloyd_iters": outcome.lloyd_trace.len(),
        "out": args.out,
    });
    if let Some(class) = evaluation {
        summary["loss_r"] = class.loss_r.into();
        summary["exact"] = class.exact.into();
    }
    println!("{summary}");
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let mut grid = ExperimentGrid::from_toml(&text).map_err(usage)?;
    if let Some(threads) = args.threads {
        grid.threads = threads;
    } else if let Ok(env) = std::env::var("BSBM_THREADS") {
        grid.threads = env
            .parse()
            .map_err(|_| usage(format!("BSBM_THREADS is not a thread count: {env:?}")))?;
    }
    let rows = run_grid(&grid).map_err(usage)?;
    write_file(&args.out, |w| write_csv(&rows, w))?;
    println!(
        "{}",
        serde_json::json!({ "rows": rows.len(), "out": args.out })
    );
    Ok(())
}

fn concentration(args: ConcentrationArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let records = match args.mode.as_str() {
        "bernstein" => bernstein_records(&text),
        "hollow-vs-debias" => hollow_vs_debias_records(&text),
        "binomial-tail" => binomial_records(&text),
        "oracle-impossibility" => oracle_records(&text),
        other => return Err(usage(format!("unknown mode {other}"))),
    }?;
    write_file(&args.out, |w| write_bench_csv(&records, w))?;
    println!(
        "{}",
        serde_json::json!({ "rows": records.len(), "out": args.out })
    );
    Ok(())
}

fn parse_config<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, CliError> {
    toml::from_str(text).map_err(usage)
}

fn bench_error(e: BenchError) -> CliError {
    usage(e)
}

fn verdict(pass: bool) -> String {
    if pass { "PASS" } else { "FAIL" }.to_string()
}

#[derive(Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct BernsteinConfig {
    n1: usize,
    n2: usize,
    #[serde(default)]
    gamma1: f64,
    #[serde(default)]
    gamma2: f64,
    delta: f64,
    p: f64,
    #[serde(default = "default_t_points")]
    t_points: usize,
    #[serde(default = "default_tail_floor")]
    tail_floor: f64,
    samples: usize,
    master_seed: u64,
}

fn default_t_points() -> usize {
    10
}

fn default_tail_floor() -> f64 {
    1e-4
}

fn bernstein_records(text: &str) -> Result<Vec<BenchRecord>, CliError> {
    let cfg: BernsteinConfig = parse_config(text)?;
    let params =
        BsbmParams::with_imbalance(cfg.n1, cfg.n2, cfg.gamma1, cfg.gamma2, cfg.delta, cfg.p)
            .map_err(usage)?;
    let grid = default_t_grid(&params, cfg.t_points, cfg.tail_floor);
    let estimates = bernstein_tail_check(
        &params,
        &grid,
        cfg.samples,
        RngStream::new(cfg.master_seed, (0, 0)),
    )
    .map_err(bench_error)?;
    let config_json = serde_json::to_string(&cfg).map_err(usage)?;
    Ok(estimates
        .iter()
        .map(|e| BenchRecord {
            check_name: "bernstein".into(),
            config_json: config_json.clone(),
            x: e.t,
            empirical: e.empirical_prob,
            bound_or_reference: e.bound,
            slack: e.slack,
            verdict: verdict(e.pass),
        })
        .collect())
}

#[derive(Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct HollowVsDebiasConfig {
    n1: usize,
    n2: usize,
    #[serde(default)]
    gamma1: f64,
    #[serde(default)]
    gamma2: f64,
    delta: f64,
    /// Defaults to 2 sqrt(ln n1 / (n1 n2)), the high-dimensional comparison
    /// point.
    p: Option<f64>,
    samples: usize,
    master_seed: u64,
}

fn hollow_vs_debias_records(text: &str) -> Result<Vec<BenchRecord>, CliError> {
    let mut cfg: HollowVsDebiasConfig = parse_config(text)?;
    let n1 = cfg.n1 as f64;
    let n2 = cfg.n2 as f64;
    if cfg.p.is_none() {
        cfg.p = Some(2.0 * (n1.ln() / (n1 * n2)).sqrt());
    }
    let params = BsbmParams::with_imbalance(
        cfg.n1,
        cfg.n2,
        cfg.gamma1,
        cfg.gamma2,
        cfg.delta,
        cfg.p.unwrap(),
    )
    .map_err(usage)?;
    let report = hollow_vs_debias(
        &params,
        cfg.samples,
        RngStream::new(cfg.master_seed, (0, 0)),
    )
    .map_err(bench_error)?;
    let config_json = serde_json::to_string(&cfg).map_err(usage)?;
    let ordering_slack = 3.0 * (report.hollow_sq_se + report.debias_sq_se);
    let chain_target = 0.5 * report.row_var_exact - report.hollow_sq_mean;
    let chain_slack = 3.0 * (report.debias_sq_se + report.hollow_sq_se);
    Ok(vec![
        BenchRecord {
            check_name: "hollow-vs-debias-ordering".into(),
            config_json: config_json.clone(),
            x: cfg.n1 as f64,
            empirical: report.hollow_sq_mean,
            bound_or_reference: report.debias_sq_mean,
            slack: ordering_slack,
            verdict: verdict(report.hollow_sq_mean < report.debias_sq_mean + ordering_slack),
        },
        BenchRecord {
            check_name: "debias-chain-lower-bound".into(),
            config_json: config_json.clone(),
            x: cfg.n1 as f64,
            empirical: report.debias_sq_mean,
            bound_or_reference: chain_target,
            slack: chain_slack,
            verdict: verdict(report.debias_sq_mean >= chain_target - chain_slack),
        },
        BenchRecord {
            check_name: "row-variance-floor".into(),
            config_json,
            x: cfg.n1 as f64,
            empirical: report.row_var_exact,
            bound_or_reference: report.row_var_lower,
            slack: 0.0,
            verdict: verdict(report.row_var_exact >= report.row_var_lower),
        },
    ])
}

#[derive(Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct BinomialTailConfig {
    n_values: Vec<usize>,
    p_values: Vec<f64>,
    t_points: usize,
}

fn binomial_records(text: &str) -> Result<Vec<BenchRecord>, CliError> {
    let cfg: BinomialTailConfig = parse_config(text)?;
    let config_json = serde_json::to_string(&cfg).map_err(usage)?;
    let mut records = Vec::new();
    for &n in &cfg.n_values {
        for &p in &cfg.p_values {
            for j in 1..=cfg.t_points {
                let t =
                    n as f64 * p + (n as f64 - n as f64 * p) * j as f64 / (cfg.t_points + 1) as f64;
                let (exact, bound) = binomial_tail_lower(n, p, t).map_err(bench_error)?;
                records.push(BenchRecord {
                    check_name: format!("binomial-tail-n{n}-p{p}"),
                    config_json: config_json.clone(),
                    x: t,
                    empirical: exact,
                    bound_or_reference: bound,
                    slack: 0.0,
                    verdict: verdict(bound <= exact),
                });
            }
        }
    }
    Ok(records)
}

#[derive(Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct OracleImpossibilityConfig {
    n1_list: Vec<usize>,
    delta: f64,
    samples: usize,
    master_seed: u64,
    #[serde(default = "default_p_scale")]
    p_scale: f64,
}

fn default_p_scale() -> f64 {
    1.0
}

fn oracle_records(text: &str) -> Result<Vec<BenchRecord>, CliError> {
    let cfg: OracleImpossibilityConfig = parse_config(text)?;
    let points = oracle_impossibility_sweep(
        &cfg.n1_list,
        cfg.delta,
        cfg.samples,
        RngStream::new(cfg.master_seed, (0, 0)),
        cfg.p_scale,
    )
    .map_err(bench_error)?;
    let config_json = serde_json::to_string(&cfg).map_err(usage)?;
    Ok(points
        .iter()
        .map(|pt| BenchRecord {
            check_name: "oracle-impossibility".into(),
            config_json: config_json.clone(),
            x: pt.n1 as f64,
            empirical: pt.expected_misclassified,
            bound_or_reference: 0.0,
            slack: 3.0 * pt.std_error,
            verdict: verdict(pt.expected_misclassified - 3.0 * pt.std_error > 0.0),
        })
        .collect())
}

fn plot(args: PlotArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input).map_err(|e| io_err(&args.input, e))?;
    let spec = PlotSpec {
        x: args.x,
        y: args.y,
        series: args.series,
        facet: args.facet,
    };
    let svg = render_csv_chart(&text, &spec).map_err(usage)?;
    fs::write(&args.out, svg).map_err(|e| io_err(&args.out, e))?;
    println!("{}", serde_json::json!({ "out": args.out }));
    Ok(())
}
