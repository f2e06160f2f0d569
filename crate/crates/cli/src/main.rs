//! `cpdtv`: phantom generation, CPD-TV solves, metrics, rank sweeps and
//! slice export over CT3 files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpdtv::io::sidecar_path;
use cpdtv::phantom::phantom_pair;
use cpdtv::{
    export_slice, nrmse, psnr, rank_sweep, read_ct3, read_sidecar, solve_cpdtv, write_ct3, write_sidecar, Config,
    Error, Grid, PhantomConfig, Sidecar, Tensor3, TvVariant, Window,
};

#[derive(Parser)]
#[command(name = "cpdtv", version, about = "TV-regularized CP decomposition of multi-echo, motion-resolved images")]
struct Cli {
    /// Worker threads for the solver (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a phantom and its undersampled observation.
    Phantom(PhantomArgs),
    /// Fit a CPD-TV model to an input tensor.
    Solve(SolveArgs),
    /// Compare a tensor against a reference.
    Metrics(MetricsArgs),
    /// Solve over a grid of ranks and weights and tabulate the errors.
    Sweep(SweepArgs),
    /// Write the central magnitude slice of one volume as a 16-bit PGM.
    Export(ExportArgs),
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth_out: PathBuf,
    /// Voxel grid as nx,ny,nz.
    #[arg(long, default_value = "32,32,8")]
    grid: GridArg,
    #[arg(long, default_value_t = 6)]
    echoes: usize,
    #[arg(long, default_value_t = 6)]
    states: usize,
    #[arg(long, default_value_t = 6.0)]
    accel: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Peak superior-inferior displacement in voxels.
    #[arg(long, default_value_t = 2.0)]
    motion_amp: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Smoothed,
    Paper,
}

impl From<VariantArg> for TvVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Smoothed => TvVariant::SmoothedL1,
            VariantArg::Paper => TvVariant::Paper,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "smoothed")]
    variant: VariantArg,
    /// TV smoothing; defaults to 1e-8 times the mean input magnitude.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> Config {
        Config {
            tv_variant: self.variant.into(),
            epsilon: self.epsilon,
            max_outer_iters: self.max_iters,
            rel_tol: self.tol,
            n_restarts: self.restarts,
            seed: self.seed,
            ..Config::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 13)]
    rank: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda_e: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda_t: f64,
    /// Write the objective per outer iteration as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Weight that works well on the default phantom at acceleration 6.
const DEFAULT_LAMBDA: f64 = 0.07;

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    test: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Comma-separated ranks.
    #[arg(long, default_value = "5,10,13,20,30")]
    ranks: String,
    /// Comma-separated echo weights; crossed with --lambda-t.
    #[arg(long, default_value = "0.07")]
    lambda_e: String,
    #[arg(long, default_value = "0.07")]
    lambda_t: String,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    echo: usize,
    #[arg(long, default_value_t = 0)]
    state: usize,
    #[arg(long)]
    out: PathBuf,
    /// `auto` or `lo,hi`.
    #[arg(long, default_value = "auto")]
    window: WindowArg,
}

#[derive(Clone, Copy)]
struct GridArg(Grid);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<usize> = parse_list(s)?;
        match v[..] {
            [nx, ny, nz] => Grid::new(nx, ny, nz).map(GridArg).map_err(|e| e.to_string()),
            _ => Err(format!("expected nx,ny,nz, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy)]
struct WindowArg(Window);

impl FromStr for WindowArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(WindowArg(Window::Auto));
        }
        let v: Vec<f64> = parse_list(s)?;
        match v[..] {
            [lo, hi] if hi > lo => Ok(WindowArg(Window::Range { lo, hi })),
            _ => Err(format!("expected auto or lo,hi with lo < hi, got {s:?}")),
        }
    }
}

fn parse_list<V: FromStr>(s: &str) -> Result<Vec<V>, String> {
    let items: Result<Vec<V>, _> = s.split(',').map(|p| p.trim().parse::<V>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("cannot parse list {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch(_) => Failure::Usage(msg),
            Error::Format { .. } | Error::Io { .. } => Failure::Io(msg),
            Error::NumericalFailure { .. } => Failure::Numerical(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Io(format!("i/o error on {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Tensor3, Failure> {
    Ok(read_ct3(path)?)
}

fn cmd_phantom(a: PhantomArgs) -> Outcome {
    let cfg = PhantomConfig {
        grid: a.grid.0,
        echoes: a.echoes,
        states: a.states,
        motion_amplitude: a.motion_amp,
        acceleration: a.accel,
        seed: a.seed,
        ..PhantomConfig::default()
    };
    let (y, truth) = phantom_pair::<f64>(&cfg)?;
    let meta = Sidecar {
        grid: cfg.grid,
        te_first: cfg.te_first,
        delta_te: cfg.delta_te,
        acceleration: cfg.acceleration,
        seed: cfg.seed,
    };
    for (x, path) in [(&y, &a.out), (&truth, &a.truth_out)] {
        write_ct3(x, path)?;
        write_sidecar(&meta, path)?;
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Outcome {
    let y = load(&a.input)?;
    let cfg = Config { rank: a.rank, lambda_e: a.lambda_e, lambda_t: a.lambda_t, ..a.solver.config() };
    let sol = solve_cpdtv(&y, &cfg)?;
    write_ct3(&sol.estimate, &a.out)?;
    if sidecar_path(&a.input).exists() {
        write_sidecar(&read_sidecar(&a.input)?, &a.out)?;
    }
    if let Some(path) = &a.trace_out {
        let d = &sol.diagnostics;
        let mut csv = format!("iteration,objective\n0,{:e}\n", d.initial_objective);
        for (it, f) in d.objective_trace.iter().enumerate() {
            let _ = writeln!(csv, "{},{:e}", it + 1, f);
        }
        write_text(path, &csv)?;
    }
    Ok(())
}

fn format_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn cmd_metrics(a: MetricsArgs) -> Outcome {
    let test = load(&a.test)?;
    let reference = load(&a.reference)?;
    let n = nrmse(&test, &reference)?;
    let p = psnr(&test, &reference)?;
    println!("nrmse={} psnr={}", format_value(n), format_value(p));
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let ranks: Vec<usize> = parse_list(&a.ranks).map_err(Failure::Usage)?;
    let le: Vec<f64> = parse_list(&a.lambda_e).map_err(Failure::Usage)?;
    let lt: Vec<f64> = parse_list(&a.lambda_t).map_err(Failure::Usage)?;
    let lambdas: Vec<(f64, f64)> = le.iter().flat_map(|&e| lt.iter().map(move |&t| (e, t))).collect();
    let y = load(&a.input)?;
    let truth = load(&a.truth)?;
    let table = rank_sweep(&y, &truth, &ranks, &lambdas, &a.solver.config())?.to_csv();
    match &a.out {
        Some(path) => write_text(path, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn cmd_export(a: ExportArgs) -> Outcome {
    let x = load(&a.input)?;
    let meta = read_sidecar(&a.input)?;
    export_slice(&x, meta.grid, a.echo, a.state, &a.out, a.window.0)?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            eprintln!("ok");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => {
            eprintln!("ok");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
