//! `ooberr`: train forests, estimate the standard error of the out-of-bag
//! error, build confidence intervals for generalization error, and run
//! coverage experiments.
//!
//! Every file-writing command also writes a `manifest.json` with the
//! configuration echo, seed, and input/output digests. Errors print as
//! `error[<category>]: <message>` with a category-specific exit status.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::RunManifest;
use ooberr::io::{
    export_bundle, import_bundle, load_csv, read_records, write_records, write_report,
    write_sd_curve, MatrixBundle,
};
use ooberr::{
    build_interval, compute_se_report, coverage_report, run_simulation, sd_curve,
    train_forest, tree_prediction_matrix, ForestConfig, InfluenceVariant, Loss,
    Method, SeReport64, SimConfig, Task, Transform,
};

#[derive(Parser)]
#[command(
    name = "ooberr",
    version,
    about = "Out-of-bag error with resampling-based standard errors and confidence intervals"
)]
struct Cli {
    /// Bound internal parallelism (default: OOBERR_THREADS env var, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a CSV dataset; persist the model and matrix bundle.
    Fit(FitArgs),
    /// Compute the standard-error report from a model or a matrix bundle.
    Se(SeArgs),
    /// Build a confidence interval from an error estimate and standard errors.
    Ci(CiArgs),
    /// Run a replicated coverage experiment on synthetic data.
    Simulate(SimulateArgs),
    /// Aggregate simulation records into a coverage report.
    Coverage(CoverageArgs),
    /// Ratio of SE estimates to the empirical SD of the OOB error across tree counts.
    SdCurve(SdCurveArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Square,
    Abs,
    Deviance,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Loss {
        match l {
            LossArg::Square => Loss::SquareError,
            LossArg::Abs => Loss::AbsoluteError,
            LossArg::Deviance => Loss::BinomialDeviance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    SampleAverage,
    ExactMinusOne,
}

impl From<VariantArg> for InfluenceVariant {
    fn from(v: VariantArg) -> InfluenceVariant {
        match v {
            VariantArg::SampleAverage => InfluenceVariant::SampleAverage,
            VariantArg::ExactMinusOne => InfluenceVariant::ExactMinusOne,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Naive,
    Delta,
    DeltaPlus,
    Jab,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Naive => Method::Naive,
            MethodArg::Delta => Method::Delta,
            MethodArg::DeltaPlus => Method::DeltaPlus,
            MethodArg::Jab => Method::Jab,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransformArg {
    Identity,
    Log,
    Sqrt,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Transform {
        match t {
            TransformArg::Identity => Transform::Identity,
            TransformArg::Log => Transform::Log,
            TransformArg::Sqrt => Transform::Sqrt,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Training data CSV (headed, numeric).
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Number of trees.
    #[arg(long, default_value_t = 1000)]
    trees: usize,
    /// Features tried per split (default: p/3 regression, sqrt(p) classification).
    #[arg(long)]
    mtry: Option<usize>,
    /// Nodes at or below this size become leaves (default: 5 regression, 1 classification).
    #[arg(long)]
    min_node_size: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for model.json, bundle.csv/json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SeArgs {
    /// Model file written by `fit` (needs --data/--response to re-predict).
    #[arg(long, conflicts_with = "bundle")]
    model: Option<PathBuf>,
    /// Training data CSV, required with --model.
    #[arg(long, requires = "model")]
    data: Option<PathBuf>,
    /// Response column name, required with --model.
    #[arg(long, requires = "model")]
    response: Option<String>,
    /// Matrix bundle CSV (with its .json sidecar) from `fit` or other software.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Loss (default: square for regression, misclassification for classification).
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Inbag-count centering in the influence function.
    #[arg(long, value_enum, default_value = "sample-average")]
    variant: VariantArg,
    /// Output directory for se_report.json and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    /// SE report JSON written by `se`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Error point estimate (alternative to --report).
    #[arg(long, conflicts_with = "report")]
    err: Option<f64>,
    #[arg(long, conflicts_with = "report")]
    se_naive: Option<f64>,
    #[arg(long, conflicts_with = "report")]
    se_delta: Option<f64>,
    #[arg(long, conflicts_with = "report")]
    se_jab: Option<f64>,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "identity")]
    transform: TransformArg,
    /// Optional output directory for interval.json and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    snr: f64,
    /// Marginal P(y=1) for classification data.
    #[arg(long, default_value_t = 0.25)]
    base_rate: f64,
    #[arg(long, default_value_t = 1000)]
    trees: usize,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 11_000)]
    n_test: usize,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// Comma-separated transforms: identity, log, sqrt.
    #[arg(long, value_delimiter = ',', default_value = "identity")]
    transforms: Vec<TransformArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for records.csv, summary.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    /// Records CSV written by `simulate`.
    #[arg(long)]
    records: PathBuf,
    /// Output directory for report.csv, report.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SdCurveArgs {
    #[arg(long, value_enum, default_value = "regression")]
    task: TaskArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    snr: f64,
    #[arg(long, default_value_t = 0.25)]
    base_rate: f64,
    /// Comma-separated ascending tree counts.
    #[arg(long, value_delimiter = ',')]
    b_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, default_value_t = 11_000)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for sd_curve.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("OOBERR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error[config]: could not size the thread pool: {e}");
            return ExitCode::from(4);
        }
    }

    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err
                .downcast_ref::<ooberr::Error>()
                .map(ooberr::Error::category)
                .unwrap_or("internal");
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(exit_code(category))
        }
    }
}

fn exit_code(category: &str) -> u8 {
    match category {
        "input" => 3,
        "config" => 4,
        "insufficient-trees" => 5,
        "numeric" => 6,
        "transform" => 7,
        "non-differentiable-loss" => 8,
        "io" => 9,
        _ => 1,
    }
}

fn run(command: Command, threads: Option<usize>) -> anyhow::Result<()> {
    match command {
        Command::Fit(args) => cmd_fit(args, threads),
        Command::Se(args) => cmd_se(args, threads),
        Command::Ci(args) => cmd_ci(args, threads),
        Command::Simulate(args) => cmd_simulate(args, threads),
        Command::Coverage(args) => cmd_coverage(args, threads),
        Command::SdCurve(args) => cmd_sd_curve(args, threads),
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn cmd_fit(args: FitArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let task: Task = args.task.into();
    let data = load_csv(&args.data, &args.response, task)?;

    let mut cfg = ForestConfig::new(args.trees, args.seed);
    cfg.mtry = args.mtry;
    cfg.min_node_size = args.min_node_size;
    cfg.max_depth = args.max_depth;

    let model = train_forest(&data, &cfg)?;
    let predictions = tree_prediction_matrix(&model, data.x())?;
    let bundle = MatrixBundle::new(predictions, model.inbag.clone(), data.y().to_vec(), task)?;

    ensure_dir(&args.out)?;
    let model_path = args.out.join("model.json");
    ooberr::io::save_model(&model, &model_path)?;
    let bundle_path = args.out.join("bundle.csv");
    export_bundle(&bundle, &bundle_path)?;

    let mut manifest = RunManifest::new(
        "fit",
        Some(args.seed),
        threads,
        serde_json::json!({
            "data": args.data.display().to_string(),
            "response": args.response,
            "task": task,
            "config": cfg,
        }),
    );
    manifest.add_input(&args.data)?;
    manifest.add_output(&model_path)?;
    manifest.add_output(&bundle_path)?;
    manifest.add_output(&args.out.join("bundle.json"))?;
    manifest.write(&args.out)?;

    println!(
        "fit: n={} p={} trees={} task={} -> {}",
        data.n(),
        data.p(),
        model.b(),
        task,
        args.out.display()
    );
    Ok(())
}

fn load_bundle_for_se(args: &SeArgs) -> anyhow::Result<(MatrixBundle, Vec<PathBuf>)> {
    match (&args.model, &args.bundle) {
        (Some(model_path), None) => {
            let (Some(data_path), Some(response)) = (&args.data, &args.response) else {
                bail!(ooberr::Error::Input(
                    "--model needs --data and --response to re-predict the training rows".into()
                ));
            };
            let model = ooberr::io::load_model(model_path)?;
            let data = load_csv(data_path, response, model.task)?;
            if data.n() != model.inbag.n() {
                bail!(ooberr::Error::Input(format!(
                    "data has {} rows but the model was trained on {}",
                    data.n(),
                    model.inbag.n()
                )));
            }
            let predictions = tree_prediction_matrix(&model, data.x())?;
            let bundle = MatrixBundle::new(
                predictions,
                model.inbag.clone(),
                data.y().to_vec(),
                model.task,
            )?;
            Ok((bundle, vec![model_path.clone(), data_path.clone()]))
        }
        (None, Some(bundle_path)) => {
            let bundle = import_bundle(bundle_path)?;
            Ok((bundle, vec![bundle_path.clone()]))
        }
        (None, None) => bail!(ooberr::Error::Input(
            "provide either --model (with --data/--response) or --bundle".into()
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with prevents this"),
    }
}

fn cmd_se(args: SeArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let (bundle, inputs) = load_bundle_for_se(&args)?;
    let loss = args.loss.map(Loss::from);
    let variant: InfluenceVariant = args.variant.into();
    let report = compute_se_report(
        &bundle.predictions,
        &bundle.inbag,
        &bundle.y,
        bundle.task,
        loss,
        variant,
    )?;

    println!("err_oob      {:.6e}", report.err_oob);
    println!("se_naive     {:.6e}", report.se_naive);
    println!("se_delta     {:.6e}", report.se_delta);
    println!("se_delta_plus {:.6e}", report.se_delta_plus);
    println!("se_jab       {:.6e}", report.se_jab);
    if report.diagnostics.warn_degenerate {
        eprintln!(
            "warning: {} of {} ordered pairs had no jointly out-of-bag tree; \
             grow more trees for a stable jackknife",
            report.diagnostics.degenerate_pairs, report.diagnostics.total_pairs
        );
    }

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        let report_path = out.join("se_report.json");
        std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
        let mut manifest = RunManifest::new(
            "se",
            None,
            threads,
            serde_json::json!({
                "loss": loss,
                "variant": variant,
                "task": bundle.task,
            }),
        );
        for input in &inputs {
            manifest.add_input(input)?;
        }
        manifest.add_output(&report_path)?;
        manifest.write(out)?;
    }
    Ok(())
}

fn cmd_ci(args: CiArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let method: Method = args.method.into();
    let transform: Transform = args.transform.into();

    let (err, se) = if let Some(report_path) = &args.report {
        let raw = std::fs::read_to_string(report_path)
            .with_context(|| format!("reading {}", report_path.display()))?;
        let report: SeReport64 = serde_json::from_str(&raw).map_err(ooberr::Error::from)?;
        let se = match method {
            Method::Naive => report.se_naive,
            Method::Delta => report.se_delta,
            Method::DeltaPlus => report.se_delta_plus,
            Method::Jab => report.se_jab,
        };
        (report.err_oob, se)
    } else {
        let Some(err) = args.err else {
            bail!(ooberr::Error::Input(
                "provide --report or --err with the standard errors".into()
            ));
        };
        let need = |v: Option<f64>, flag: &str| -> anyhow::Result<f64> {
            v.ok_or_else(|| {
                ooberr::Error::Input(format!("method {method} needs {flag}")).into()
            })
        };
        let se = match method {
            Method::Naive => need(args.se_naive, "--se-naive")?,
            Method::Delta => need(args.se_delta, "--se-delta")?,
            Method::DeltaPlus => {
                let naive = need(args.se_naive, "--se-naive")?;
                let delta = need(args.se_delta, "--se-delta")?;
                ooberr::delta_plus_se(naive, delta)
            }
            Method::Jab => need(args.se_jab, "--se-jab")?,
        };
        (err, se)
    };

    let interval = build_interval(err, se, args.alpha, method, transform)?;
    let json = serde_json::to_string_pretty(&interval)?;
    println!("{json}");

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        let path = out.join("interval.json");
        std::fs::write(&path, &json)?;
        let mut manifest = RunManifest::new(
            "ci",
            None,
            threads,
            serde_json::json!({
                "err": err, "se": se, "alpha": args.alpha,
                "method": method, "transform": transform,
            }),
        );
        if let Some(report_path) = &args.report {
            manifest.add_input(report_path)?;
        }
        manifest.add_output(&path)?;
        manifest.write(out)?;
    }
    Ok(())
}

fn sim_config(args: &SimulateArgs) -> SimConfig {
    let mut cfg = SimConfig::new(args.task.into(), args.n, args.p, args.snr);
    cfg.base_rate = args.base_rate;
    cfg.trees = args.trees;
    cfg.replicates = args.replicates;
    cfg.n_test = args.n_test;
    cfg.alpha = args.alpha;
    cfg.transforms = args.transforms.iter().map(|&t| t.into()).collect();
    cfg.seed = args.seed;
    cfg
}

fn print_report(cells: &[ooberr::CoverageCell]) {
    println!(
        "{:<11} {:<9} {:>6} {:>8} {:>8} {:>8} {:>12}",
        "method", "transform", "reps", "miscov", "high", "low", "mean_width"
    );
    for cell in cells {
        println!(
            "{:<11} {:<9} {:>6} {:>7.1}% {:>7.1}% {:>7.1}% {:>12.5}",
            cell.method.to_string(),
            cell.transform.to_string(),
            cell.replicates,
            cell.miscoverage * 100.0,
            cell.miscoverage_high * 100.0,
            cell.miscoverage_low * 100.0,
            cell.mean_width
        );
    }
}

fn cmd_simulate(args: SimulateArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let cfg = sim_config(&args);
    let records = run_simulation(&cfg)?;
    let cells = coverage_report(&records)?;

    ensure_dir(&args.out)?;
    let records_path = args.out.join("records.csv");
    write_records(&records, &records_path)?;
    let summary_path = args.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&cells)?)?;

    let mut manifest = RunManifest::new(
        "simulate",
        Some(cfg.seed),
        threads,
        serde_json::to_value(&cfg)?,
    );
    manifest.add_output(&records_path)?;
    manifest.add_output(&summary_path)?;
    manifest.write(&args.out)?;

    println!(
        "simulate: task={} n={} p={} snr={} trees={} replicates={}",
        cfg.task, cfg.n, cfg.p, cfg.snr, cfg.trees, cfg.replicates
    );
    print_report(&cells);
    Ok(())
}

fn cmd_coverage(args: CoverageArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let records = read_records(&args.records)?;
    let cells = coverage_report(&records)?;

    ensure_dir(&args.out)?;
    let csv_path = args.out.join("report.csv");
    write_report(&cells, &csv_path)?;
    let json_path = args.out.join("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&cells)?)?;

    let mut manifest = RunManifest::new(
        "coverage",
        None,
        threads,
        serde_json::json!({ "records": args.records.display().to_string() }),
    );
    manifest.add_input(&args.records)?;
    manifest.add_output(&csv_path)?;
    manifest.add_output(&json_path)?;
    manifest.write(&args.out)?;

    print_report(&cells);
    Ok(())
}

fn cmd_sd_curve(args: SdCurveArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = SimConfig::new(args.task.into(), args.n, args.p, args.snr);
    cfg.base_rate = args.base_rate;
    cfg.replicates = args.replicates;
    cfg.n_test = args.n_test;
    cfg.seed = args.seed;

    let points = sd_curve(&cfg, &args.b_grid)?;

    ensure_dir(&args.out)?;
    let path = args.out.join("sd_curve.csv");
    write_sd_curve(&points, &path)?;
    let mut manifest = RunManifest::new(
        "sd-curve",
        Some(cfg.seed),
        threads,
        serde_json::json!({ "config": cfg, "b_grid": args.b_grid }),
    );
    manifest.add_output(&path)?;
    manifest.write(&args.out)?;

    println!("{:>7} {:>12} {:>12} {:>12}", "trees", "naive", "delta", "jab");
    for pt in &points {
        println!(
            "{:>7} {:>12.4} {:>12.4} {:>12.4}",
            pt.trees, pt.ratio_naive, pt.ratio_delta, pt.ratio_jab
        );
    }
    Ok(())
}
