//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or model errors
//! (the error name is printed on stderr).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::decoding::{posterior_decode, viterbi_decode};
use crate::error::{HmtError, Result};
use crate::inference::{forest_log_likelihoods, Posteriors};
use crate::io;
use crate::learning::{self, FitConfig, InitStrategy};
use crate::oracle;
use crate::selfcheck::{self, self_consistency_report};
use crate::simulate::{sample_forest, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "hmt",
    version,
    about = "Hidden Markov models on trees with coupled branches"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HMT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a forest of full trees from a model.
    Simulate(SimulateArgs),
    /// Per-tree log-likelihood of a forest.
    Likelihood(LikelihoodArgs),
    /// Hidden-state reconstruction.
    Decode(DecodeArgs),
    /// Fit a model by expectation-maximization.
    Learn(LearnArgs),
    /// Compare lineage correlations of data with data simulated from a model.
    Selfcheck(SelfcheckArgs),
    /// Brute-force enumeration over all hidden assignments (small trees only).
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trees: usize,
    /// Number of node levels.
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write `<out>.hidden.csv` with the sampled states.
    #[arg(long)]
    emit_hidden: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LikelihoodArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Criterion {
    Map,
    Posterior,
}

#[derive(Args, Debug, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Criterion::Map)]
    criterion: Criterion,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum InitArg {
    Kmeans,
    File(PathBuf),
}

fn parse_init(s: &str) -> std::result::Result<InitArg, String> {
    if s == "kmeans" {
        Ok(InitArg::Kmeans)
    } else if let Some(path) = s.strip_prefix("file:") {
        Ok(InitArg::File(PathBuf::from(path)))
    } else {
        Err(format!("expected `kmeans` or `file:PATH`, got `{s}`"))
    }
}

#[derive(Args, Debug, Serialize)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    states: usize,
    #[arg(long, default_value_t = learning::DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    #[arg(long, default_value_t = learning::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_init, default_value = "kmeans")]
    init: InitArg,
    #[arg(long, default_value_t = learning::DEFAULT_MIN_STD)]
    min_std: f64,
    /// Output directory for model.json, trace.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SelfcheckArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = selfcheck::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = selfcheck::DEFAULT_MAX_DISTANCE)]
    max_distance: usize,
    /// Simulated forests pooled on the model side.
    #[arg(long, default_value_t = selfcheck::DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = oracle::DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Serialize)]
pub struct RunManifest<'a, F: Serialize> {
    pub subcommand: &'a str,
    pub flags: &'a F,
    /// Input path to sha256 hex digest.
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub version: &'a str,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| HmtError::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        }))
}

fn write_manifest<F: Serialize>(
    path: &Path,
    subcommand: &str,
    flags: &F,
    inputs: &[&Path],
    seed: Option<u64>,
) -> Result<()> {
    let manifest = RunManifest {
        subcommand,
        flags,
        inputs: inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
            .collect::<Result<_>>()?,
        seed,
        version: env!("CARGO_PKG_VERSION"),
    };
    io::write_text(path, &serde_json::to_string_pretty(&manifest)?)
}

/// `forest.json` → `forest.<suffix>`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let config = SimConfig {
        tree_count: args.trees,
        depth: args.depth,
        branching: args.branching,
        seed: args.seed,
        emit_hidden: args.emit_hidden,
    };
    let sim = sample_forest(&model, &config)?;
    io::write_forest(&args.out, &sim.forest)?;
    if args.emit_hidden {
        io::write_text(
            &sidecar(&args.out, "hidden.csv"),
            &io::hidden_states_csv(&sim.hidden),
        )?;
    }
    write_manifest(
        &sidecar(&args.out, "manifest.json"),
        "simulate",
        args,
        &[&args.model],
        Some(args.seed),
    )
}

fn likelihood(args: &LikelihoodArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let forest = io::read_forest(&args.data)?;
    let lls = forest_log_likelihoods(&model, &forest)?;
    let mut out = String::from("tree_index,log_likelihood\n");
    for (t, ll) in lls.iter().enumerate() {
        writeln!(out, "{t},{ll}").unwrap();
    }
    writeln!(out, "total,{}", lls.iter().sum::<f64>()).unwrap();
    emit(args.out.as_deref(), &out)?;
    if let Some(path) = &args.out {
        write_manifest(
            &sidecar(path, "manifest.json"),
            "likelihood",
            args,
            &[&args.model, &args.data],
            None,
        )?;
    }
    Ok(())
}

fn decode(args: &DecodeArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let forest = io::read_forest(&args.data)?;
    let mut out = String::from("tree,node,state\n");
    for (t, tree) in forest.trees().iter().enumerate() {
        let states = match args.criterion {
            Criterion::Map => viterbi_decode(&model, &tree.tree, &tree.observations)?.states,
            Criterion::Posterior => posterior_decode(
                &Posteriors::compute(&model, &tree.tree, &tree.observations)?.gamma,
            ),
        };
        for (c, s) in states.iter().enumerate() {
            writeln!(out, "{t},{c},{s}").unwrap();
        }
    }
    emit(args.out.as_deref(), &out)?;
    if let Some(path) = &args.out {
        write_manifest(
            &sidecar(path, "manifest.json"),
            "decode",
            args,
            &[&args.model, &args.data],
            None,
        )?;
    }
    Ok(())
}

fn learn(args: &LearnArgs) -> Result<()> {
    let forest = io::read_forest(&args.data)?;
    let mut inputs: Vec<&Path> = vec![&args.data];
    let init = match &args.init {
        InitArg::Kmeans => InitStrategy::KMeans,
        InitArg::File(path) => {
            inputs.push(path);
            InitStrategy::Model(io::read_model(path)?)
        }
    };
    let config = FitConfig {
        max_iterations: args.max_iters,
        tolerance: args.tol,
        seed: args.seed,
        init,
        min_std: args.min_std,
        ..FitConfig::new(args.states)
    };
    let trace = learning::fit(&forest, &config)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| HmtError::Io(format!("{}: {e}", args.out.display())))?;
    io::write_model(&args.out.join("model.json"), &trace.model)?;
    let mut csv = String::from("iteration,log_likelihood,param_name,value\n");
    for record in &trace.iterations {
        for (name, value) in record.model.named_parameters() {
            writeln!(
                csv,
                "{},{},{},{}",
                record.iteration, record.log_likelihood, name, value
            )
            .unwrap();
        }
    }
    io::write_text(&args.out.join("trace.csv"), &csv)?;
    write_manifest(
        &args.out.join("manifest.json"),
        "learn",
        args,
        &inputs,
        Some(args.seed),
    )?;
    for w in &trace.warnings {
        eprintln!("warning: {w:?}");
    }
    println!(
        "updates={} log_likelihood={} convergence={:?}",
        trace.updates(),
        trace.log_likelihood,
        trace.convergence
    );
    Ok(())
}

fn selfcheck(args: &SelfcheckArgs) -> Result<()> {
    let forest = io::read_forest(&args.data)?;
    let model = io::read_model(&args.model)?;
    let report = self_consistency_report(
        &forest,
        &model,
        args.seed,
        args.max_distance,
        args.threshold,
        args.replicates,
    )?;
    let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut csv = String::from("m,n,pair_count,r_data,r_sim,abs_diff\n");
    for b in &report.bins {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            b.m,
            b.n,
            b.pairs_data,
            fmt(b.r_data),
            fmt(b.r_sim),
            fmt(b.abs_diff)
        )
        .unwrap();
    }
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    match &args.out {
        Some(path) => {
            io::write_text(path, &csv)?;
            write_manifest(
                &sidecar(path, "manifest.json"),
                "selfcheck",
                args,
                &[&args.data, &args.model],
                Some(args.seed),
            )?;
        }
        None => print!("{csv}"),
    }
    println!("{verdict}");
    Ok(())
}

fn run_oracle(args: &OracleArgs) -> Result<()> {
    let model = io::read_model(&args.model)?;
    let forest = io::read_forest(&args.data)?;
    let mut out = String::from("tree,likelihood,map_score,map_assignment\n");
    for (t, tree) in forest.trees().iter().enumerate() {
        let r = oracle::enumerate(&model, &tree.tree, &tree.observations, args.budget)?;
        let states: Vec<String> = r.map_assignment.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{t},{},{},{}",
            r.likelihood,
            r.map_score,
            states.join(" ")
        )
        .unwrap();
    }
    print!("{out}");
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Likelihood(a) => likelihood(a),
        Command::Decode(a) => decode(a),
        Command::Learn(a) => learn(a),
        Command::Selfcheck(a) => selfcheck(a),
        Command::Oracle(a) => run_oracle(a),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            EXIT_DATA
        }
    }
}
