use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use emcmc_core::engine::RunReport;
use emcmc_core::io::{
    analyze, disconnection_demo, grid_instance, read_catalog, read_stream, write_catalog,
    write_stream, ConfigDoc, FormatError, InstanceDoc,
};
use emcmc_core::{ecmut_reachability, enumerate_feasible, run, EngineError, OracleError};

#[derive(Parser)]
#[command(
    name = "emcmc",
    version,
    about = "Sample contiguous balanced partitions of a spatial graph"
)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Shared {
    /// Instance document (JSON).
    #[arg(long, global = true)]
    instance: Option<PathBuf>,
    /// Config document (JSON). Missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Enumerate feasible groupings and write the catalog.
    Enumerate {
        /// Also report single-move reachability components.
        #[arg(long)]
        reachability: bool,
    },
    /// Run the sampler and write the sample stream plus a run manifest.
    Sample,
    /// Compare a sample stream with a catalog.
    Analyze {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        tv_threshold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Grid,
    DisconnectionDemo,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    /// Comma-separated unit weights in row-major order (grid only).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Zone count for the disconnection demo.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 1_000)]
    max_attempts: usize,
}

struct CliError {
    code: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn new(code: &'static str, exit: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            exit,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let code = match &e {
            FormatError::Io(_) => "IO_ERROR",
            FormatError::Json(_) | FormatError::Line { .. } => "PARSE_ERROR",
            FormatError::Instance(_) | FormatError::Graph(_) | FormatError::Partition(_) => {
                "INVALID_INSTANCE"
            }
            FormatError::Constraint(_) | FormatError::Energy(_) => "INVALID_CONFIG",
            FormatError::Oracle(OracleError::BudgetExceeded(_)) => "BUDGET_EXCEEDED",
            FormatError::Oracle(_) => "ORACLE_ERROR",
            FormatError::RetryCapExhausted(_) => "RETRY_CAP_EXHAUSTED",
            FormatError::UnknownIds { .. } => "ID_MISMATCH",
            FormatError::EmptyCatalog => "EMPTY_CATALOG",
        };
        CliError::new(code, 2, e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        FormatError::from(e).into()
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Config(_) | EngineError::Energy(_) => "INVALID_CONFIG",
            EngineError::Initialization { .. } | EngineError::InfeasibleInitialState { .. } => {
                "INIT_FAILED"
            }
        };
        CliError::new(code, 3, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("IO_ERROR", 2, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.message.replace('\n', " ");
            eprintln!("error {}: {message}", e.code);
            ExitCode::from(e.exit)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let shared = cli.shared;
    match cli.command {
        Command::Generate(args) => cmd_generate(&shared, &args),
        Command::Enumerate { reachability } => cmd_enumerate(&shared, reachability),
        Command::Sample => cmd_sample(&shared),
        Command::Analyze {
            stream,
            catalog,
            tv_threshold,
        } => cmd_analyze(&shared, &stream, &catalog, tv_threshold),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::new("MISSING_ARGUMENT", 64, format!("--{flag} is required")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::new("IO_ERROR", 2, format!("{}: {e}", path.display())))
}

fn load_instance(shared: &Shared) -> Result<(InstanceDoc, emcmc_core::SpatialGraph)> {
    let doc = InstanceDoc::from_json(&read_text(required(&shared.instance, "instance")?)?)?;
    let graph = doc.to_graph()?;
    Ok((doc, graph))
}

fn load_config(shared: &Shared) -> Result<ConfigDoc> {
    let mut config = match &shared.config {
        Some(path) => ConfigDoc::from_json(&read_text(path)?)?,
        None => ConfigDoc::default(),
    };
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(shared: &Shared) -> Result<PathBuf> {
    let dir = shared.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| CliError::new("IO_ERROR", 2, format!("{}: {e}", path.display())))
}

fn cmd_generate(shared: &Shared, args: &GenerateArgs) -> Result<()> {
    let dir = out_dir(shared)?;
    let instance_path = dir.join("instance.json");
    match args.kind {
        Kind::Grid => {
            let doc = grid_instance(args.rows, args.cols, args.weights.as_deref())?;
            write_file(&instance_path, &doc.to_json()?)?;
            println!("instance {}", instance_path.display());
            println!("units {}", doc.n);
            println!("edges {}", doc.edges.len());
        }
        Kind::DisconnectionDemo => {
            let seed = shared.seed.unwrap_or(0);
            let demo = disconnection_demo(args.rows, args.cols, args.k, seed, args.max_attempts)?;
            let config_path = dir.join("config.json");
            write_file(&instance_path, &demo.instance.to_json()?)?;
            write_file(&config_path, &demo.config.to_json()?)?;
            println!("instance {}", instance_path.display());
            println!("config {}", config_path.display());
            println!("feasible {}", demo.catalog.len());
            println!("components {}", demo.components.len());
            for (i, c) in demo.components.iter().enumerate() {
                println!("component {i} size {}", c.len());
            }
        }
    }
    Ok(())
}

fn cmd_enumerate(shared: &Shared, reachability: bool) -> Result<()> {
    let (_, graph) = load_instance(shared)?;
    let config = load_config(shared)?;
    let constraints = config.constraints()?;
    let catalog = enumerate_feasible(&graph, &constraints, config.budget)?;
    let dir = out_dir(shared)?;
    let catalog_path = dir.join("catalog.txt");
    let mut out = BufWriter::new(File::create(&catalog_path)?);
    write_catalog(&mut out, &catalog)?;
    out.flush()?;
    let (labeled_contiguous, labeled_feasible) = catalog.labeled_counts(config.k);
    println!("catalog {}", catalog_path.display());
    println!("unconstrained {}", catalog.counts.unconstrained);
    println!("contiguous {}", catalog.counts.contiguous);
    println!("feasible {}", catalog.counts.feasible);
    println!("labeled_contiguous {labeled_contiguous}");
    println!("labeled_feasible {labeled_feasible}");
    if reachability {
        let components = ecmut_reachability(&catalog, &graph, &constraints);
        let path = dir.join("components.txt");
        let mut out = BufWriter::new(File::create(&path)?);
        for (i, c) in components.iter().enumerate() {
            for &idx in c {
                writeln!(out, "{i} {}", catalog.ids[idx])?;
            }
        }
        out.flush()?;
        println!("components {}", components.len());
        println!("components_file {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    ecmut_attempts: u64,
    ecmut_accepts: u64,
    ecmut_acceptance_rate: f64,
    prcrx_attempts: u64,
    prcrx_accepts: u64,
    prcrx_acceptance_rate: f64,
    prcrx_dead_ends: u64,
    prcrx_no_feasible: u64,
    unique_states: usize,
}

#[derive(Serialize)]
struct RunManifest {
    version: &'static str,
    config: ConfigDoc,
    instance_path: String,
    instance_checksum: String,
    seed: u64,
    workers: usize,
    started_at: DateTime<Utc>,
    finished_at: DateTime<Utc>,
    chains: usize,
    records: usize,
    unique_states: usize,
    throughput_states_per_second: f64,
    per_chain: Vec<ChainSummary>,
}

fn chain_summaries(report: &RunReport) -> Vec<ChainSummary> {
    report
        .per_chain
        .iter()
        .enumerate()
        .map(|(chain, s)| ChainSummary {
            chain,
            ecmut_attempts: s.ecmut_attempts,
            ecmut_accepts: s.ecmut_accepts,
            ecmut_acceptance_rate: s.ecmut_rate(),
            prcrx_attempts: s.prcrx_attempts,
            prcrx_accepts: s.prcrx_accepts,
            prcrx_acceptance_rate: s.prcrx_rate(),
            prcrx_dead_ends: s.prcrx_dead_ends,
            prcrx_no_feasible: s.prcrx_no_feasible,
            unique_states: report.unique_states_per_chain[chain],
        })
        .collect()
}

fn cmd_sample(shared: &Shared) -> Result<()> {
    let (doc, graph) = load_instance(shared)?;
    let config = load_config(shared)?;
    let constraints = config.constraints()?;
    let energy = config.energy()?;
    let engine = config.engine(shared.workers);
    let dir = out_dir(shared)?;

    let started_at = Utc::now();
    let output = run(&graph, &engine, &constraints, &energy)?;
    let finished_at = Utc::now();

    let stream_path = dir.join("stream.csv");
    let mut out = BufWriter::new(File::create(&stream_path)?);
    write_stream(&mut out, &output.records)?;
    out.flush()?;

    let report = &output.report;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        instance_path: required(&shared.instance, "instance")?
            .display()
            .to_string(),
        instance_checksum: doc.checksum()?,
        workers: shared.workers,
        started_at,
        finished_at,
        chains: report.chains,
        records: report.records,
        unique_states: report.unique_states,
        throughput_states_per_second: report.throughput,
        per_chain: chain_summaries(report),
        config,
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::new("IO_ERROR", 2, e.to_string()))?;
    write_file(&manifest_path, &json)?;
    println!("stream {}", stream_path.display());
    println!("manifest {}", manifest_path.display());
    println!("records {}", report.records);
    println!("unique_states {}", report.unique_states);
    Ok(())
}

fn cmd_analyze(shared: &Shared, stream: &Path, catalog: &Path, threshold: f64) -> Result<()> {
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| CliError::new("IO_ERROR", 2, format!("{}: {e}", p.display())))
    };
    let records = read_stream(open(stream)?)?;
    let catalog = read_catalog(open(catalog)?)?;
    let graph = match &shared.instance {
        Some(_) => Some(load_instance(shared)?.1),
        None => None,
    };
    let analysis = analyze(&records, &catalog, graph.as_ref(), threshold)?;
    let text = analysis.render();
    if let Some(dir) = &shared.out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("analysis.txt"), &text)?;
    }
    print!("{text}");
    Ok(())
}
