//! `vigil`: run simulated deployments, re-derive reports from their
//! artifacts, evaluate classifiers, and query a finished run's record
//! store.
//!
//! Exit codes: 0 on success, 1 when the request itself is invalid, 2 when
//! a valid request fails while executing.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vigil_core::audit;
use vigil_core::cloud::{CloudError, RecordStore};
use vigil_core::fixtures;
use vigil_core::scenario::{
    render_report, recompute_report, run_scenario, Acceleration, RunOptions, ScenarioError,
    ScenarioSpec,
};
use vigil_core::status::StatusServer;
use vigil_core::vision::{
    evaluate, split_dataset, BaselineClassifier, Classifier, LabelScheme, LabeledDataset,
    OracleClassifier, VisionError,
};

#[derive(Parser)]
#[command(name = "vigil", version, about = "Desk-scale emulation of a heritage-monitoring sensor network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and persist its artifacts.
    Run(RunArgs),
    /// Re-derive a view of a finished run from its artifacts.
    #[command(subcommand)]
    Report(ReportView),
    /// Train a classifier on a labeled dataset and score the held-out split.
    Eval(EvalArgs),
    /// Query a finished run's record store.
    Query(QueryArgs),
    /// Write the bundled reference fixtures for experimenting.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Node and hub configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Scripted environment timeline (CSV).
    #[arg(long)]
    env: PathBuf,
    /// Simulated seconds to run.
    #[arg(long)]
    duration: u64,
    #[arg(long)]
    seed: u64,
    /// Simulated seconds per wall second, or "max" for no pacing.
    #[arg(long, default_value = "max")]
    accel: String,
    /// Serve GET /status and /ledger on this port while running.
    #[arg(long)]
    serve: Option<u16>,
    /// Directory to write run artifacts into.
    #[arg(long, default_value = "run_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ReportView {
    /// Per-node energy table.
    Power(RunDir),
    /// Ledger entry counts by category.
    Ledger(RunDir),
    /// Monthly cloud cost estimate.
    Cost(RunDir),
}

#[derive(Args)]
struct RunDir {
    /// A directory previously written by `vigil run`.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset directory holding labels.csv and image payloads.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    seed: u64,
    /// Score the header-reading oracle instead of the trainable baseline.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    run: RunDir,
    /// Table name: readings, events, image_labels, or quarantine.
    table: String,
    /// Equality filter, repeatable: --where field=value.
    #[arg(long = "where", value_name = "FIELD=VALUE")]
    filters: Vec<String>,
    /// Sort rows by this field before applying the limit.
    #[arg(long)]
    order_by: Option<String>,
    /// Keep at most this many rows.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Directory to write the fixture bundle into.
    #[arg(long, default_value = "fixtures_out")]
    out: PathBuf,
    /// Also generate a synthetic labeled dataset of this many images.
    #[arg(long)]
    images: Option<usize>,
    #[arg(long, value_enum, default_value = "binary")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Binary,
    Multimodal,
}

impl From<SchemeArg> for LabelScheme {
    fn from(arg: SchemeArg) -> Self {
        match arg {
            SchemeArg::Binary => LabelScheme::Binary,
            SchemeArg::Multimodal => LabelScheme::Multimodal,
        }
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn validation(msg: impl fmt::Display) -> Self {
        Failure::Validation(msg.to_string())
    }

    fn runtime(msg: impl fmt::Display) -> Self {
        Failure::Runtime(msg.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(err: ScenarioError) -> Self {
        if err.is_validation() {
            Failure::Validation(err.to_string())
        } else {
            Failure::Runtime(err.to_string())
        }
    }
}

impl From<VisionError> for Failure {
    fn from(err: VisionError) -> Self {
        match err {
            VisionError::Io { .. } => Failure::Runtime(err.to_string()),
            _ => Failure::Validation(err.to_string()),
        }
    }
}

impl From<CloudError> for Failure {
    fn from(err: CloudError) -> Self {
        match err {
            CloudError::UnknownTable(_) | CloudError::UnknownField { .. } => {
                Failure::Validation(err.to_string())
            }
            _ => Failure::Runtime(err.to_string()),
        }
    }
}

static STDOUT_GONE: AtomicBool = AtomicBool::new(false);

/// Write user-facing output, tolerating a reader that hung up early
/// (`vigil run | head`). The command keeps executing so artifacts and
/// the purge audit still complete; only the printing stops. Any other
/// stdout failure is fatal.
fn out(text: &str) {
    if STDOUT_GONE.load(Ordering::Relaxed) {
        return;
    }
    let mut stdout = io::stdout().lock();
    let result = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush());
    if let Err(err) = result {
        if err.kind() == io::ErrorKind::BrokenPipe {
            STDOUT_GONE.store(true, Ordering::Relaxed);
        } else {
            eprintln!("error: cannot write to stdout: {err}");
            std::process::exit(2);
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage_ok = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Report(view) => cmd_report(view),
        Command::Eval(args) => cmd_eval(args),
        Command::Query(args) => cmd_query(args),
        Command::Fixtures(args) => cmd_fixtures(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let acceleration = Acceleration::parse(&args.accel)?;
    let server = match args.serve {
        Some(port) => Some(StatusServer::bind(port).map_err(Failure::validation)?),
        None => None,
    };
    let spec = ScenarioSpec {
        config_path: args.config,
        env_path: args.env,
        duration_s: args.duration,
        seed: args.seed,
        acceleration,
    };
    let options = RunOptions {
        status_server: server.as_ref(),
        ..RunOptions::default()
    };
    let outcome = run_scenario(&spec, &args.out, &options)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    out(&render_report(&outcome.report));

    let audit = audit::scan_run_dir(&outcome.out_dir, &outcome.fingerprints)
        .map_err(Failure::runtime)?;
    out(&format!("{}\n", audit.summary()));
    if !audit.clean() {
        return Err(Failure::runtime("image bytes survived the purge"));
    }
    out(&format!("artifacts: {}\n", outcome.out_dir.display()));
    Ok(())
}

fn cmd_report(view: ReportView) -> Result<(), Failure> {
    match view {
        ReportView::Power(dir) => {
            let report = recompute_report(&dir.run)?;
            let mut text = String::new();
            for row in &report.node_power {
                text.push_str(&format!(
                    "node {:>3}  {:<14} {:<8} {:>10.3} mAh  {:>8.3} mAh/h\n",
                    row.node_id, row.model, row.kind, row.consumed_mah, row.mean_mah_per_h
                ));
            }
            emit(&dir.run, "report_power", &text, &report.node_power)
        }
        ReportView::Ledger(dir) => {
            let report = recompute_report(&dir.run)?;
            let mut text = format!("ledger entries: {}\n", report.total_entries);
            for category in vigil_core::Category::all() {
                text.push_str(&format!(
                    "  {:<16} {:>7}\n",
                    category.label(),
                    report.counts.get(category)
                ));
            }
            #[derive(Serialize)]
            struct LedgerView<'a> {
                total_entries: u64,
                counts: &'a vigil_core::hub::CategoryCounts,
            }
            let view = LedgerView {
                total_entries: report.total_entries,
                counts: &report.counts,
            };
            emit(&dir.run, "report_ledger", &text, &view)
        }
        ReportView::Cost(dir) => {
            let report = recompute_report(&dir.run)?;
            let mut text = format!("monthly cost estimate ({}):\n", report.cost.currency);
            for line in &report.cost.lines {
                text.push_str(&format!(
                    "  {:<16} used {:>8}, free {:>8}, billable {:>8} -> {} millipence\n",
                    line.meter, line.used, line.free, line.billable, line.cost_millipence
                ));
            }
            text.push_str(&format!("  total {}\n", report.cost.display_total()));
            emit(&dir.run, "report_cost", &text, &report.cost)
        }
    }
}

/// Print the text form and write the JSON form beside the run artifacts.
fn emit<T: Serialize>(run: &Path, name: &str, text: &str, value: &T) -> Result<(), Failure> {
    out(text);
    let path = run.join(format!("{name}.json"));
    let mut json = serde_json::to_string_pretty(value).expect("report views serialize");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let scheme = LabelScheme::from(args.scheme);
    let dataset = LabeledDataset::from_dir(&args.dataset)?;
    if dataset.scheme() != scheme {
        return Err(Failure::validation(format!(
            "dataset is labeled with the {} scheme, not {}",
            dataset.scheme().name(),
            scheme.name()
        )));
    }
    let (train, test) = split_dataset(&dataset, 0.8, args.seed)?;
    let mut classifier: Box<dyn Classifier> = if args.oracle {
        Box::new(OracleClassifier::new())
    } else {
        Box::new(BaselineClassifier::new())
    };
    let stats = classifier.train(&train)?;
    let outcome = evaluate(classifier.as_ref(), &test)?;

    out(&outcome.matrix.to_csv_string(scheme));
    out(&format!(
        "accuracy={},train_time_s={}\n",
        outcome.accuracy, stats.wall_time_s
    ));

    #[derive(Serialize)]
    struct EvalView<'a> {
        classifier: &'a str,
        scheme: &'a str,
        seed: u64,
        train_items: usize,
        test_items: u64,
        train_time_s: f64,
        accuracy: f64,
        matrix: &'a vigil_core::ConfusionMatrix,
    }
    let view = EvalView {
        classifier: classifier.name(),
        scheme: scheme.name(),
        seed: args.seed,
        train_items: stats.items,
        test_items: outcome.matrix.total(),
        train_time_s: stats.wall_time_s,
        accuracy: outcome.accuracy,
        matrix: &outcome.matrix,
    };
    let path = args.dataset.join("eval.json");
    let mut json = serde_json::to_string_pretty(&view).expect("eval view serializes");
    json.push('\n');
    fs::write(&path, json)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), Failure> {
    let mut filters = Vec::new();
    for raw in &args.filters {
        let (field, value) = raw.split_once('=').ok_or_else(|| {
            Failure::validation(format!("filter {raw:?} is not in FIELD=VALUE form"))
        })?;
        filters.push((field.to_string(), value.to_string()));
    }
    let cloud_dir = args.run.run.join("cloud");
    if !cloud_dir.is_dir() {
        return Err(Failure::validation(format!(
            "{} does not look like a run directory (no cloud store)",
            args.run.run.display()
        )));
    }
    let mut records = RecordStore::open(&cloud_dir)?;
    let rows = records.query(
        &args.table,
        &filters,
        args.order_by.as_deref(),
        args.limit,
    )?;

    let mut text = String::new();
    if let Some(first) = rows.first() {
        let fields: Vec<&str> = first.keys().map(String::as_str).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
        for row in &rows {
            let values: Vec<&str> = row.values().map(String::as_str).collect();
            text.push_str(&values.join(","));
            text.push('\n');
        }
    }
    out(&text);
    eprintln!("{} rows", rows.len());

    let path = args.run.run.join("query_result.json");
    let mut json = serde_json::to_string_pretty(&rows).expect("query rows serialize");
    json.push('\n');
    fs::write(&path, json)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn cmd_fixtures(args: FixturesArgs) -> Result<(), Failure> {
    fs::create_dir_all(&args.out)
        .and_then(|()| fixtures::write_all(&args.out))
        .map_err(|e| Failure::runtime(format!("cannot write fixtures: {e}")))?;
    if let Some(count) = args.images {
        let scheme = LabelScheme::from(args.scheme);
        let dataset = fixtures::synthetic_dataset(scheme, count, args.seed);
        let dir = args.out.join(format!("dataset_{}", scheme.name()));
        dataset.write_dir(&dir)?;
    }
    out(&format!("fixtures written to {}\n", args.out.display()));
    Ok(())
}
