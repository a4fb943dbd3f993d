//! `codcov`: center-outward distance covariance independence tests.

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use codcov::assignment::{Solver, DEFAULT_SCALE};
use codcov::grid::DirectionMode;
use codcov::testkit::Method;

#[derive(Parser, Debug)]
#[command(name = "codcov", version, about = "Distribution-free tests of independence between random vectors")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test independence of paired samples read from CSV.
    Test(TestArgs),
    /// Critical values of the limiting null law.
    CriticalValues(CriticalArgs),
    /// Empirical size and power on the Gaussian and Cauchy examples.
    Simulate(SimulateArgs),
    /// Time the assignment solvers on center-outward problems.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    HallinTheoretical,
    HallinMontecarlo,
    RdcovPermutation,
    DcovPermutation,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::HallinTheoretical => vec![Method::HallinTheoretical],
            MethodArg::HallinMontecarlo => vec![Method::HallinMonteCarlo],
            MethodArg::RdcovPermutation => vec![Method::RdcovPermutation],
            MethodArg::DcovPermutation => vec![Method::DcovPermutation],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Hungarian,
    GabowTarjan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Deterministic,
    Randomized,
    Isotropic,
}

impl ModeArg {
    fn mode(self) -> Option<DirectionMode> {
        match self {
            ModeArg::Auto => None,
            ModeArg::Deterministic => Some(DirectionMode::Deterministic),
            ModeArg::Randomized => Some(DirectionMode::Randomized),
            ModeArg::Isotropic => Some(DirectionMode::Isotropic),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SolverOpts {
    /// Assignment solver used for the center-outward ranks.
    #[arg(long, value_enum, default_value = "hungarian")]
    solver: SolverArg,
    /// Quantization scale for integer costs (gabow-tarjan only).
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: u64,
}

impl SolverOpts {
    fn solver(&self) -> Solver {
        match self.solver {
            SolverArg::Hungarian => Solver::Hungarian,
            SolverArg::GabowTarjan => Solver::GabowTarjan { scale: self.scale },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SpectrumOpts {
    /// Radii of the grid discretizing the limiting kernel.
    #[arg(long = "m-r", default_value_t = 60)]
    m_r: usize,
    /// Directions of the grid discretizing the limiting kernel.
    #[arg(long = "m-s", default_value_t = 60)]
    m_s: usize,
    /// Number of product weights kept explicitly.
    #[arg(long, default_value_t = 100_000)]
    truncation: usize,
    /// Line-delimited JSON store of computed critical values.
    #[arg(long, env = "CODCOV_CACHE")]
    cache: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct OutputOpts {
    /// Emit JSON instead of the default text/CSV output.
    #[arg(long)]
    json: bool,
    /// Write output to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV with the X sample (or both samples together with --px).
    #[arg(long)]
    x: PathBuf,
    /// CSV with the Y sample, row-aligned with X.
    #[arg(long)]
    y: Option<PathBuf>,
    /// In single-file mode, the number of leading columns forming X.
    #[arg(long)]
    px: Option<usize>,
    /// Skip the first line of each file.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long, value_enum, default_value = "hallin-theoretical")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permutations for the permutation tests (default: n).
    #[arg(long)]
    permutations: Option<usize>,
    /// Null replicates for hallin-montecarlo.
    #[arg(long, default_value_t = codcov::testkit::DEFAULT_MC_REPS)]
    mc_reps: usize,
    #[arg(long, value_enum, default_value = "auto")]
    direction_mode: ModeArg,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    spectrum: SpectrumOpts,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    /// Dimensions of X (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<usize>,
    /// Dimensions of Y (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.01])]
    alpha: Vec<f64>,
    /// Compare against the bundled reference table and fail if any value
    /// deviates by more than --tolerance.
    #[arg(long)]
    verify_reference: bool,
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    #[command(flatten)]
    spectrum: SpectrumOpts,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// 1a/1b/1c: Gaussian margins, 2a/2b/2c: Cauchy margins; a/b/c select
    /// within-block correlation 0, 0.5, 0.9.
    #[arg(long, default_value = "1a")]
    example: String,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 216)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.15])]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::All])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long, default_value_t = codcov::testkit::DEFAULT_MC_REPS)]
    mc_reps: usize,
    #[arg(long, value_enum, default_value = "auto")]
    direction_mode: ModeArg,
    #[command(flatten)]
    solver: SolverOpts,
    #[command(flatten)]
    spectrum: SpectrumOpts,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverArg::Hungarian, SolverArg::GabowTarjan])]
    solvers: Vec<SolverArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [54, 108, 216, 432])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Timed repetitions per (solver, n); the median is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: u64,
    #[command(flatten)]
    out: OutputOpts,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Test(a) => commands::test(a),
        Command::CriticalValues(a) => commands::critical_values(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
