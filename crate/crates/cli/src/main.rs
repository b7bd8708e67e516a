//! `pclpgm`: simulate benchmark data, learn skeletons, score them and run
//! Monte Carlo benchmarks.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pclpgm_core::bench::{parse_scenarios, run_scenario, write_csv};
use pclpgm_core::graph::read_edges;
use pclpgm_core::preprocess::{preprocess, read_real_tsv, PreprocessOptions};
use pclpgm_core::sim::{self, SimConfig, Topology, TopologySpec};
use pclpgm_core::{
    confusion, learn_skeleton, CountFamily, CountMatrix, Error, Execution, FitOptions,
    SkeletonOptions, UndirectedGraph,
};
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "pclpgm", version, about = "Skeleton learning for count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a truth graph and a count matrix from the shared-latent model.
    Simulate(SimulateArgs),
    /// Learn a skeleton from a count matrix.
    Learn(LearnArgs),
    /// Score an estimated edge list against a truth edge list.
    Eval(EvalArgs),
    /// Run a Monte Carlo benchmark described by a scenario file.
    Bench(BenchArgs),
    /// Turn raw sequencing counts into a learnable count matrix.
    Preprocess(PreprocessArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TopologyArg {
    ScaleFree,
    Hub,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Truncated,
    Poisson,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ExecutionArg {
    Sequential,
    LevelParallel,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    topology: TopologyArg,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n: usize,
    /// Number of hubs (hub topology).
    #[arg(long, default_value_t = 2)]
    hubs: usize,
    /// Edge probability (random topology).
    #[arg(long, default_value_t = 0.2)]
    edge_prob: f64,
    /// Attachment exponent (scale-free topology); 1 is linear.
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_true: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LearnArgs {
    /// Count matrix (TSV with a header row).
    #[arg(long)]
    counts: PathBuf,
    #[arg(long, env = "PCLPGM_ALPHA", default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Truncated)]
    family: FamilyArg,
    /// Truncation point; defaults to the largest count in the matrix.
    #[arg(long = "r", env = "PCLPGM_TRUNCATION")]
    truncation: Option<u32>,
    /// Largest conditioning-set size.
    #[arg(long)]
    m: Option<usize>,
    /// Fit a per-node intercept.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    intercept: bool,
    /// Box bound on every coefficient.
    #[arg(long, env = "PCLPGM_BOX_BOUND", default_value_t = 30.0)]
    box_bound: f64,
    #[arg(long, value_enum, default_value_t = ExecutionArg::LevelParallel)]
    execution: ExecutionArg,
    /// Multiply the statistic by an extra sqrt(n).
    #[arg(long)]
    wald_literal: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// Vertex count; defaults to one more than the largest index seen.
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Scenario file, one `key=value` scenario per line.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PreprocessArgs {
    /// Raw matrix: TSV of nonnegative reals, samples in rows.
    #[arg(long)]
    input: PathBuf,
    /// Fraction of most variable columns to keep.
    #[arg(long, default_value_t = 0.25)]
    fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Format { .. } | Error::Usage(_) => 2,
            Error::Data { .. }
            | Error::InvalidData(_)
            | Error::Domain(_)
            | Error::Optimization(_) => 3,
            Error::Io(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 4,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: 4,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn create_output(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure {
            code: 4,
            message: format!("cannot write {}: {e}", path.display()),
        })
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: 4,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Failure {
            code: 4,
            message: format!("cannot start worker pool: {e}"),
        })?;
    Ok(pool.install(f))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    options: &impl Serialize,
    extra: serde_json::Value,
    started: Instant,
) -> CliResult<()> {
    let manifest = json!({
        "command": command,
        "options": options,
        "details": extra,
        "version": env!("CARGO_PKG_VERSION"),
        "duration_seconds": started.elapsed().as_secs_f64(),
    });
    let mut w = create_output(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let started = Instant::now();
    let kind = match args.topology {
        TopologyArg::ScaleFree => Topology::ScaleFree { power: args.power },
        TopologyArg::Hub => Topology::Hub { n_hubs: args.hubs },
        TopologyArg::Random => Topology::Random {
            edge_prob: args.edge_prob,
        },
    };
    let config = SimConfig {
        topology: TopologySpec { kind, p: args.p },
        n: args.n,
        lambda_true: args.lambda_true,
        lambda_noise: args.lambda_noise,
        seed: args.seed,
    };
    let (truth, counts) = sim::simulate(&config)?;
    prepare_dir(&args.out)?;
    let mut w = create_output(&args.out, "counts.tsv")?;
    counts.write_tsv(&mut w)?;
    w.flush()?;
    let mut w = create_output(&args.out, "truth.edges")?;
    truth.write_edges(&mut w)?;
    w.flush()?;
    write_manifest(
        &args.out,
        "simulate",
        args,
        json!({
            "config": config,
            "graph_stream": 0,
            "data_stream": 1,
            "outputs": ["counts.tsv", "truth.edges"],
            "truth_edges": truth.edge_count(),
        }),
        started,
    )
}

fn learn(args: &LearnArgs) -> CliResult<()> {
    let started = Instant::now();
    let data = CountMatrix::read_tsv(open_input(&args.counts)?)?;
    let family = match args.family {
        FamilyArg::Poisson => CountFamily::Poisson,
        FamilyArg::Truncated => {
            CountFamily::truncated(args.truncation.unwrap_or(data.max_value().max(1)))?
        }
    };
    let options = SkeletonOptions {
        alpha: args.alpha,
        max_cond_size: args.m,
        family,
        include_intercept: args.intercept,
        execution: match args.execution {
            ExecutionArg::Sequential => Execution::Sequential,
            ExecutionArg::LevelParallel => Execution::LevelParallel,
        },
        wald_literal: args.wald_literal,
        fit: FitOptions {
            box_bound: args.box_bound,
            ..FitOptions::default()
        },
    };
    let result = with_pool(args.threads, || learn_skeleton(&data, &options))??;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    prepare_dir(&args.out)?;
    let mut w = create_output(&args.out, "estimate.edges")?;
    result.graph.write_edges(&mut w)?;
    w.flush()?;
    let mut w = create_output(&args.out, "trace.jsonl")?;
    for o in &result.trace {
        serde_json::to_writer(&mut w, o)?;
        writeln!(w)?;
    }
    w.flush()?;
    write_manifest(
        &args.out,
        "learn",
        args,
        json!({
            "resolved_options": options,
            "input": args.counts,
            "rows": data.nrows(),
            "columns": data.ncols(),
            "outputs": ["estimate.edges", "trace.jsonl"],
            "edges": result.graph.edge_count(),
            "tests_performed": result.tests_performed,
            "levels_completed": result.levels_completed,
            "warnings": result.warnings,
        }),
        started,
    )
}

fn eval(args: &EvalArgs) -> CliResult<()> {
    let truth = read_edges(open_input(&args.truth)?)?;
    let estimate = read_edges(open_input(&args.estimate)?)?;
    let seen = truth
        .iter()
        .chain(&estimate)
        .map(|&(_, v)| v + 1)
        .max()
        .unwrap_or(0);
    let p = match args.p {
        Some(p) if p < seen => {
            return Err(
                Error::Usage(format!("--p {p} is smaller than vertex index {}", seen - 1)).into(),
            )
        }
        Some(p) => p,
        None => seen.max(2),
    };
    let t = UndirectedGraph::from_edges(p, &truth)?;
    let e = UndirectedGraph::from_edges(p, &estimate)?;
    let c = confusion(&t, &e)?;
    let report = json!({
        "p": p,
        "tp": c.tp,
        "fp": c.fp,
        "fn": c.fn_,
        "ppv": c.ppv,
        "se": c.se,
        "hamming": c.fp + c.fn_,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn bench(args: &BenchArgs) -> CliResult<()> {
    let started = Instant::now();
    let text = fs::read_to_string(&args.spec).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", args.spec.display()),
    })?;
    let scenarios = parse_scenarios(&text)?;
    let results = with_pool(args.threads, || {
        scenarios
            .iter()
            .map(|s| run_scenario(s, args.replicates, args.seed))
            .collect::<pclpgm_core::Result<Vec<_>>>()
    })??;
    prepare_dir(&args.out)?;
    let mut w = create_output(&args.out, "summary.csv")?;
    write_csv(&results, &mut w)?;
    w.flush()?;
    let mut w = create_output(&args.out, "replicates.jsonl")?;
    for (k, r) in results.iter().enumerate() {
        for rep in &r.replicates {
            serde_json::to_writer(
                &mut w,
                &json!({ "scenario": k, "line": r.scenario.line, "result": rep }),
            )?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    let scenario_echo: Vec<_> = results
        .iter()
        .map(|r| json!({ "scenario": r.scenario, "truth_edges": r.truth_edges }))
        .collect();
    write_manifest(
        &args.out,
        "bench",
        args,
        json!({
            "seed": args.seed,
            "replicate_streams": format!("0..{}", args.replicates),
            "scenarios": scenario_echo,
            "outputs": ["summary.csv", "replicates.jsonl"],
        }),
        started,
    )
}

fn run_preprocess(args: &PreprocessArgs) -> CliResult<()> {
    let started = Instant::now();
    let (names, raw) = read_real_tsv(open_input(&args.input)?)?;
    let (counts, report) = preprocess(
        &names,
        &raw,
        &PreprocessOptions {
            fraction: args.fraction,
        },
    )?;
    prepare_dir(&args.out)?;
    let mut w = create_output(&args.out, "counts.tsv")?;
    counts.write_tsv(&mut w)?;
    w.flush()?;
    let mut w = create_output(&args.out, "report.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    write_manifest(
        &args.out,
        "preprocess",
        args,
        json!({ "outputs": ["counts.tsv", "report.json"], "kept": counts.ncols() }),
        started,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Learn(a) => learn(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Preprocess(a) => run_preprocess(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
