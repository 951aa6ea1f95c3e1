//! `superlearner` command line: fit, predict, cv-risk, sim and bench.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 fit error.
//! Every failure prints one line to stderr of the form
//! `error[Identifier]: message`.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use superlearner::benchmark::{self, BenchConfig};
use superlearner::metrics::MetricTable;
use superlearner::report;
use superlearner::sim::{self, SimConfig};
use superlearner::{Error, Execution, MetaSolver, RngStream, SuperLearner, SuperLearnerModel};

use config::{one_line, Preset, RunConfig};

pub const THREADS_ENV: &str = "SUPERLEARNER_THREADS";

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "superlearner", version, about = "Super learner regression: cross-validated convex stacking")]
pub struct Cli {
    /// Worker threads; falls back to the config file, then SUPERLEARNER_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a super learner on a CSV file and save the model.
    Fit(FitArgs),
    /// Predict with a saved model; columns are matched by name.
    Predict(PredictArgs),
    /// Print the cross-validated risk table of a saved model.
    CvRisk(CvRiskArgs),
    /// Run the simulation study.
    Sim(SimArgs),
    /// Run the multi-dataset benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of cross-validation folds V.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_parser = parse_meta)]
    pub meta: Option<MetaSolver>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Columns to ignore; repeatable.
    #[arg(long = "drop")]
    pub drop_columns: Vec<String>,
    /// Model output path (default model.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the risk table here as CSV.
    #[arg(long)]
    pub risk_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Column whose values label the output rows; defaults to 1-based row numbers.
    #[arg(long)]
    pub id_column: Option<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvRiskArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simulation ids; repeatable.
    #[arg(long = "sim")]
    pub sim_ids: Vec<u8>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Comma-separated training sizes for a sample size study.
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Vec<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Also render an SVG chart.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Label of the reference learner (default ols).
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

fn parse_meta(s: &str) -> Result<MetaSolver, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown meta solver '{s}' (expected simplex_exact or nnls_normalize)"))
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub id: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: i32, err: Error) -> Self {
        CliError { code, id: err.id(), message: err.to_string() }
    }

    pub fn diagnostic(&self) -> String {
        format!("error[{}]: {}", self.id, one_line(&self.message))
    }
}

/// Exit code for an error raised outside configuration loading.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidHyperparameter { .. }
        | Error::InvalidLibrary(_)
        | Error::BadFoldCount { .. }
        | Error::BadSimId(_)
        | Error::MissingReference(_)
        | Error::Config(_) => EXIT_CONFIG,
        Error::NonFinite { .. }
        | Error::LengthMismatch(_)
        | Error::DimensionMismatch { .. }
        | Error::Empty(_)
        | Error::ParseError { .. }
        | Error::MissingCell { .. }
        | Error::TargetMissing(_)
        | Error::ShapeMismatch(_)
        | Error::ColumnMismatch(_)
        | Error::Serialization(_)
        | Error::Io(_) => EXIT_DATA,
        Error::FitFailure { .. }
        | Error::DegenerateInput(_)
        | Error::DegenerateResponse
        | Error::AllLearnersFailed(_)
        | Error::ZeroReference(_)
        | Error::NonPositive(_) => EXIT_FIT,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::new(exit_code(&err), err)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(err: Error) -> CliError {
    CliError::new(EXIT_CONFIG, err)
}

fn load_config(common: Option<&CommonArgs>) -> CliResult<RunConfig> {
    let mut cfg = match common.and_then(|c| c.config.as_deref()) {
        Some(p) => RunConfig::load(p).map_err(config_err)?,
        None => RunConfig::default(),
    };
    if let Some(c) = common {
        if c.preset.is_some() {
            cfg.preset = c.preset;
            cfg.library = None;
        }
        cfg.seed = c.seed.or(cfg.seed);
        cfg.v_folds = c.folds.or(cfg.v_folds);
        cfg.meta = c.meta.or(cfg.meta);
    }
    Ok(cfg)
}

fn thread_count(flag: Option<usize>, cfg: &RunConfig) -> CliResult<Option<usize>> {
    if let Some(n) = flag.or(cfg.threads) {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| config_err(Error::Config(format!("{THREADS_ENV}='{v}' is not a thread count")))),
        _ => Ok(None),
    }
}

fn execution(threads: Option<usize>) -> Execution {
    if threads == Some(1) {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(Error::Config(format!("thread pool: {e}"))))?
            .install(f),
        _ => f(),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::new(EXIT_DATA, Error::Io(format!("{}: {e}", dir.display()))))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::new(EXIT_DATA, Error::Io(format!("{}: {e}", path.display()))))
}

fn emit(path: Option<&Path>, contents: &str, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => out.write_all(contents.as_bytes()).map_err(|e| CliError::new(EXIT_DATA, Error::Io(e.to_string()))),
    }
}

fn cmd_fit(args: FitArgs, threads: Option<usize>, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(Some(&args.common))?;
    cfg.data = args.data.or(cfg.data);
    cfg.target = args.target.or(cfg.target);
    cfg.model = args.model.or(cfg.model);
    if !args.drop_columns.is_empty() {
        cfg.drop_columns = Some(args.drop_columns);
    }
    let library = cfg.library().map_err(config_err)?;
    let data_path = RunConfig::require(&cfg.data, "data").map_err(config_err)?;
    let target = RunConfig::require(&cfg.target, "target").map_err(config_err)?;
    let threads = thread_count(threads, &cfg)?;
    let mut sl = SuperLearner::new(library)
        .folds(cfg.v_folds.unwrap_or(superlearner::cv::DEFAULT_FOLDS))
        .meta(cfg.meta.unwrap_or_default())
        .execution(execution(threads));
    sl.loss = cfg.loss.unwrap_or_default();
    superlearner::cv::validate_library(&sl.library).map_err(config_err)?;
    let data = benchmark::load_csv(data_path, target, cfg.drop_columns.as_deref().unwrap_or(&[]))?;
    if sl.v_folds < 2 || sl.v_folds > data.n() {
        return Err(config_err(Error::BadFoldCount { v: sl.v_folds, n: data.n() }));
    }
    let seed = cfg.seed.unwrap_or(0);
    let model = with_pool(threads, || Ok(sl.fit(&data, &RngStream::new(seed))?))?;
    let model_path = cfg.model.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    write_file(&model_path, &model.to_json()?)?;
    let risk = report::risk_table_csv(&model.cv_risk_table())?;
    if let Some(p) = &args.risk_csv {
        write_file(p, &risk)?;
    }
    emit(None, &risk, out)
}

fn load_model(path: &Path) -> CliResult<SuperLearnerModel> {
    SuperLearnerModel::load(path).map_err(|e| CliError::new(EXIT_DATA, e))
}

fn cmd_predict(args: PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let (ids, x) = benchmark::load_features(&args.data, &model.feature_names, args.id_column.as_deref())?;
    let pred = model.predict(&x)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::new(EXIT_DATA, Error::Io(e.to_string()));
    w.write_record(["id", "prediction"]).map_err(io)?;
    for (id, p) in ids.iter().zip(&pred) {
        w.write_record([id.as_str(), &report::fmt_f64(*p)]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::new(EXIT_DATA, Error::Io(e.to_string())))?;
    emit(args.output.as_deref(), &String::from_utf8_lossy(&bytes), out)
}

fn cmd_cv_risk(args: CvRiskArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&args.model)?;
    emit(args.output.as_deref(), &report::risk_table_csv(&model.cv_risk_table())?, out)
}

fn cmd_sim(args: SimArgs, threads: Option<usize>, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(Some(&args.common))?;
    let section = cfg.sim.clone().unwrap_or_default();
    let library = cfg.library().map_err(config_err)?;
    let threads = thread_count(threads, &cfg)?;
    let sim_ids = if !args.sim_ids.is_empty() {
        args.sim_ids
    } else {
        section.sim_ids.clone().unwrap_or_else(|| vec![1, 2, 3, 4])
    };
    let train_sizes = if !args.train_sizes.is_empty() { Some(args.train_sizes) } else { section.train_sizes.clone() };
    let mut configs = Vec::new();
    for id in sim_ids {
        let mut sc = SimConfig::new(id, library.clone());
        sc.n_train = args.n_train.or(section.n_train).unwrap_or(sc.n_train);
        sc.n_test = args.n_test.or(section.n_test).unwrap_or(sc.n_test);
        sc.reps = args.reps.or(section.reps).unwrap_or(sc.reps);
        sc.train_sizes = train_sizes.clone();
        sc.v_folds = cfg.v_folds.unwrap_or(sc.v_folds);
        sc.master_seed = cfg.seed.unwrap_or(0);
        sc.meta = cfg.meta.unwrap_or_default();
        sc.execution = execution(threads);
        sc.validate().map_err(config_err)?;
        configs.push(sc);
    }
    let rows = with_pool(threads, || {
        let mut rows = Vec::new();
        for sc in &configs {
            let table =
                if sc.train_sizes.is_some() { sim::run_sample_size_study(sc)? } else { sim::run_sim_study(sc)? };
            rows.extend(table.rows);
        }
        Ok(rows)
    })?;
    let table = MetricTable::new("r_squared", rows);
    let rendered = report::render_sim_report(&table)?;
    let dir = args.output_dir.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("."));
    write_file(&dir.join("sim_results.csv"), &rendered.table_csv)?;
    write_file(&dir.join("sim_plot.csv"), &rendered.plot_csv)?;
    write_file(&dir.join("sim_results.json"), &rendered.json)?;
    if args.svg || cfg.svg.unwrap_or(false) {
        write_file(&dir.join("sim_plot.svg"), &rendered.svg)?;
    }
    emit(None, &rendered.plot_csv, out)
}

fn cmd_bench(args: BenchArgs, threads: Option<usize>, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(Some(&args.common))?;
    let section = cfg.bench.clone().unwrap_or_default();
    let library = match (&cfg.library, cfg.preset) {
        (None, None) => Preset::Benchmark.library(),
        _ => cfg.library().map_err(config_err)?,
    };
    let threads = thread_count(threads, &cfg)?;
    let manifest_path = args.manifest.or(section.manifest);
    let manifest_path = RunConfig::require(&manifest_path, "bench.manifest").map_err(config_err)?;
    let mut bc = BenchConfig::new(library);
    bc.v_folds = cfg.v_folds.unwrap_or(bc.v_folds);
    bc.master_seed = cfg.seed.unwrap_or(0);
    bc.meta = cfg.meta.unwrap_or_default();
    bc.execution = execution(threads);
    if let Some(r) = args.reference.or(section.reference) {
        bc.reference = r;
    }
    if bc.v_folds < 2 {
        return Err(config_err(Error::Config(format!("v_folds must be at least 2, got {}", bc.v_folds))));
    }
    superlearner::cv::validate_library(&bc.library).map_err(config_err)?;
    if !bc.library.iter().any(|s| s.label == bc.reference) {
        return Err(config_err(Error::MissingReference(bc.reference.clone())));
    }
    let manifest = benchmark::load_manifest(manifest_path).map_err(|e| match e {
        Error::Io(_) | Error::Serialization(_) | Error::Config(_) => config_err(e),
        other => other.into(),
    })?;
    let result = with_pool(threads, || Ok(benchmark::run_bench(&manifest, &bc)?))?;
    let rendered = report::render_bench_report(&result)?;
    let dir = args.output_dir.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("."));
    write_file(&dir.join("bench_results.csv"), &rendered.rows_csv)?;
    write_file(&dir.join("bench_summary.csv"), &rendered.summary_csv)?;
    write_file(&dir.join("bench_plot.csv"), &rendered.plot_csv)?;
    write_file(&dir.join("bench_results.json"), &rendered.json)?;
    if args.svg || cfg.svg.unwrap_or(false) {
        write_file(&dir.join("bench_plot.svg"), &rendered.svg)?;
    }
    emit(None, &rendered.summary_csv, out)
}

/// Run a parsed command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a, cli.threads, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::CvRisk(a) => cmd_cv_risk(a, out),
        Command::Sim(a) => cmd_sim(a, cli.threads, out),
        Command::Bench(a) => cmd_bench(a, cli.threads, out),
    }
}

/// Parse, run and report; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { EXIT_CONFIG } else { 0 };
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[Usage]: {}", one_line(first));
            return EXIT_CONFIG;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{}", e.diagnostic());
            e.code
        }
    }
}
