//! `chandis`: experiment harness for binary channel discrimination.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "chandis", version, about = "Discriminate binary quantum channels")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV outputs and the manifest.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Write 0 in every seconds column so outputs are byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a variational strategy on one channel pair.
    Discriminate(DiscriminateArgs),
    /// Train on depolarizing pairs in sweep order with warm starts.
    Sweep(SweepArgs),
    /// Estimate the diamond distance of two channels.
    Diamond(DiamondArgs),
    /// Variational binary classifier over an α grid.
    ClassifyVar(ClassifyVarArgs),
    /// Kernel classifier on interval-labelled depolarized states.
    ClassifyKernel(ClassifyKernelArgs),
    /// Trace-product and diamond maps, optionally the layer correlation study.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Default)]
struct StrategyArgs {
    /// parallel or sequential.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<chandis::vardisc::Strategy>,
    /// Channel uses.
    #[arg(long)]
    p: Option<usize>,
    /// Ancilla qubits.
    #[arg(long)]
    r: Option<usize>,
    /// Layers per unitary block.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct DiscriminateArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Channel spec: eb-a, eb-b, dep:<α>, identity:<d>, or a JSON/TOML file.
    #[arg(long)]
    channel_a: Option<String>,
    #[arg(long)]
    channel_b: Option<String>,
    /// Shorthand for `--channel-a dep:<α>`.
    #[arg(long)]
    alpha0: Option<f64>,
    /// Shorthand for `--channel-b dep:<α>`.
    #[arg(long)]
    alpha1: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    strategy: StrategyArgs,
    /// forward, backward or both.
    #[arg(long)]
    pass: Option<String>,
    /// Start every pair from random parameters.
    #[arg(long)]
    cold: bool,
    /// Restarts for the diamond baseline of each pair.
    #[arg(long)]
    diamond_restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct DiamondArgs {
    #[arg(long)]
    channel_a: Option<String>,
    #[arg(long)]
    channel_b: Option<String>,
    /// Parallel channel uses.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct ClassifyVarArgs {
    /// u1, u2, u3 or all.
    #[arg(long)]
    ansatz: Option<String>,
    /// Grid of α values, comma separated.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Single cell instead of a grid; needs `--alpha1` too.
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args, Debug)]
struct ClassifyKernelArgs {
    /// Preset interval set i1..i4.
    #[arg(long)]
    intervals: Option<String>,
    /// Explicit label −1 intervals as lo:hi, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_bounds)]
    neg: Option<Vec<[f64; 2]>>,
    /// Explicit label +1 intervals as lo:hi, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_bounds)]
    pos: Option<Vec<[f64; 2]>>,
    /// plus or random-mixed.
    #[arg(long, value_parser = parse_input)]
    input: Option<chandis::ksvm::InputPolicy>,
    /// Copies n in the kernel Tr(ρσ)^n.
    #[arg(long)]
    n_copies: Option<u32>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Box constraint; `inf` for a hard margin.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Grid of α values, comma separated.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Parallel channel uses for the diamond map.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    diamond_restarts: Option<usize>,
    /// Layer counts for the correlation study; omitted means no study.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Training runs averaged per pair.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<chandis::vardisc::Strategy>,
    #[arg(long)]
    r: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<chandis::vardisc::Strategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "parallel" | "par" => Ok(chandis::vardisc::Strategy::Parallel),
        "sequential" | "seq" => Ok(chandis::vardisc::Strategy::Sequential),
        _ => Err(format!("unknown strategy '{s}' (parallel, sequential)")),
    }
}

fn parse_input(s: &str) -> Result<chandis::ksvm::InputPolicy, String> {
    match s.to_ascii_lowercase().as_str() {
        "plus" => Ok(chandis::ksvm::InputPolicy::Plus),
        "random-mixed" | "random" => Ok(chandis::ksvm::InputPolicy::RandomMixed),
        _ => Err(format!("unknown input policy '{s}' (plus, random-mixed)")),
    }
}

fn parse_bounds(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    Ok([p(lo)?, p(hi)?])
}

impl Cli {
    fn flags(&self) -> RunConfig {
        let mut c = RunConfig {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            no_timing: self.no_timing.then_some(true),
            ..Default::default()
        };
        let strat = |c: &mut RunConfig, s: &StrategyArgs| {
            c.strategy = s.strategy;
            c.p = s.p;
            c.r = s.r;
            c.l = s.l;
            c.restarts = s.restarts;
        };
        let name = match &self.command {
            Command::Discriminate(a) => {
                strat(&mut c, &a.strategy);
                c.channel_a = a.channel_a.clone();
                c.channel_b = a.channel_b.clone();
                c.alpha0 = a.alpha0;
                c.alpha1 = a.alpha1;
                "discriminate"
            }
            Command::Sweep(a) => {
                strat(&mut c, &a.strategy);
                c.pass = a.pass.clone();
                c.warm_start = a.cold.then_some(false);
                c.diamond_restarts = a.diamond_restarts;
                "sweep"
            }
            Command::Diamond(a) => {
                c.channel_a = a.channel_a.clone();
                c.channel_b = a.channel_b.clone();
                c.p = a.p;
                c.restarts = a.restarts;
                "diamond"
            }
            Command::ClassifyVar(a) => {
                c.ansatz = a.ansatz.clone();
                c.alphas = a.alphas.clone();
                c.alpha0 = a.alpha0;
                c.alpha1 = a.alpha1;
                c.n_train = a.n_train;
                c.n_test = a.n_test;
                c.restarts = a.restarts;
                "classify-var"
            }
            Command::ClassifyKernel(a) => {
                c.intervals = a.intervals.clone();
                c.neg = a.neg.clone();
                c.pos = a.pos.clone();
                c.input = a.input;
                c.n_copies = a.n_copies;
                c.n_train = a.n_train;
                c.n_test = a.n_test;
                c.c = a.c;
                "classify-kernel"
            }
            Command::Analyze(a) => {
                c.alphas = a.alphas.clone();
                c.p = a.p;
                c.diamond_restarts = a.diamond_restarts;
                c.layers = a.layers.clone();
                c.runs = a.runs;
                c.strategy = a.strategy;
                c.r = a.r;
                "analyze"
            }
        };
        c.subcommand = Some(name.to_string());
        c
    }
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CHANDIS_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("CHANDIS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(CliError::Usage)?;
    threads_from_env()?;
    let flags = cli.flags();
    let file = match &cli.config {
        Some(path) => config::load_config(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let (Some(a), Some(b)) = (&file.subcommand, &flags.subcommand) {
        if a != b {
            return Err(CliError::Config(format!("config file is for '{a}', not '{b}'")));
        }
    }
    commands::execute(file.overlay(&flags))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
