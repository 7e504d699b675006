use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wpaco::instance_io::BlockLayout;
use wpaco::pheromone::EvictionRule;
use wpaco::{Algorithm, ConstructionPolicy, Heuristic, Rule, SolverConfig};

/// Ant colony solvers and experiment harness for single-machine total
/// weighted tardiness.
#[derive(Debug, Parser)]
#[command(name = "wpaco", version)]
pub struct Cli {
    /// Key-value file (`key = value` per line) supplying defaults for any
    /// flag of the chosen subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate instances with the TF/RDD due-date generator.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Solve instances and write results.jsonl plus per-run trace CSVs.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Full-factorial sweep over q0, tau_max and k.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Tune alpha and beta per instance with a racing random search.
    #[command(args_override_self = true)]
    Tune(TuneArgs),
    /// Position-change statistics from recorded iteration-best schedules.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Compare results against reference values.
    #[command(args_override_self = true)]
    Report(ReportArgs),
    /// Re-run recorded solve or sweep rows and compare them.
    #[command(args_override_self = true)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoChoice {
    Aco,
    Paco,
    Wpaco,
    Both,
}

impl AlgoChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            Self::Aco => vec![Algorithm::Aco],
            Self::Paco => vec![Algorithm::Paco],
            Self::Wpaco => vec![Algorithm::Wpaco],
            Self::Both => vec![Algorithm::Paco, Algorithm::Wpaco],
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generate 25 TF x RDD combinations with --per-combo instances each.
    #[arg(long)]
    pub full_set: bool,
    #[arg(long, default_value_t = 5)]
    pub per_combo: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tardiness factor, one of 0.2 0.4 0.6 0.8 1.0.
    #[arg(long, required_unless_present = "full_set")]
    pub tf: Option<f64>,
    /// Relative range of due dates, one of 0.2 0.4 0.6 0.8 1.0.
    #[arg(long, required_unless_present = "full_set")]
    pub rdd: Option<f64>,
    /// Accept TF/RDD values in (0, 1] outside the grid.
    #[arg(long)]
    pub allow_offgrid: bool,
    /// Output directory; receives one file per instance and manifest.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Instance files, or directories of them (a manifest.csv there fixes ids
    /// and order).
    #[arg(required = true, value_name = "INSTANCE")]
    pub instances: Vec<PathBuf>,
    /// Jobs per instance; lets one file hold several instances.
    #[arg(long)]
    pub n: Option<usize>,
    /// Order of the three blocks in an instance file.
    #[arg(long, default_value = "pwd")]
    pub layout: BlockLayout,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 10)]
    pub ants: usize,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    /// Pheromone exponent.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Heuristic exponent.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Evaporation rate (aco only).
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Heuristic information: edd or mdd.
    #[arg(long, default_value = "mdd")]
    pub heuristic: Heuristic,
    /// Pheromone evaluation: plain or summation.
    #[arg(long, default_value = "summation")]
    pub rule: Rule,
    /// WPACO eviction: overflow or strict-text.
    #[arg(long, default_value = "overflow")]
    pub eviction: EvictionRule,
    /// Start the population filled with the EDD schedule.
    #[arg(long)]
    pub seed_population: bool,
    /// Master seed; per-run seeds are derived from it and recorded.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl RunArgs {
    pub fn base(&self, algorithm: Algorithm) -> SolverConfig {
        let mut cfg = SolverConfig::new(algorithm, self.seed).with_iterations(self.iterations);
        cfg.ants = self.ants;
        cfg.rho = self.rho;
        cfg.eviction = self.eviction;
        cfg.seed_population = self.seed_population;
        cfg.policy = ConstructionPolicy {
            rule: self.rule,
            heuristic: self.heuristic,
            alpha: self.alpha,
            beta: self.beta,
            ..ConstructionPolicy::default()
        };
        cfg
    }
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Exploitation probability.
    #[arg(long, default_value_t = 0.1)]
    pub q0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau_max: f64,
    /// Population size [default: 5 for paco, 50 for wpaco].
    #[arg(long)]
    pub k: Option<usize>,
}

impl PointArgs {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        cfg.policy.q0 = self.q0;
        cfg.tau_max = self.tau_max;
        if let Some(k) = self.k {
            cfg.k = k;
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "wpaco")]
    pub algo: AlgoChoice,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub point: PointArgs,
    /// Runs per instance.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Method name stored with each result [default: the algorithm].
    #[arg(long)]
    pub label: Option<String>,
    /// Tune CSV whose alpha/beta override --alpha/--beta per instance.
    #[arg(long, value_name = "FILE")]
    pub tune: Option<PathBuf>,
    /// Keep iteration-best schedules in traces (needed by analyze).
    #[arg(long)]
    pub record_schedules: bool,
    /// Store wall_ms as 0 so outputs are byte-identical across runs.
    #[arg(long)]
    pub no_timestamp: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub algo: AlgoChoice,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    pub q0_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    pub tau_max_grid: Vec<f64>,
    /// [default: 1,5,25 for paco, 10,50,100 for wpaco]
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Leave wall_ms empty.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Directory for sweep.csv, sweep_summary.csv, sweep_marginals.csv and
    /// sweep_config.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "paco")]
    pub algo: AlgoChoice,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub point: PointArgs,
    /// Solver runs per instance.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 32)]
    pub candidates: usize,
    #[arg(long, default_value_t = 2)]
    pub races: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value = "tune.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// results.jsonl files written by `solve --record-schedules`.
    #[arg(long = "results", required = true, value_name = "FILE")]
    pub results: Vec<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    /// Transitions per window of the change series.
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// results.jsonl files from `solve`; the label of each record names its method.
    #[arg(long = "results", required = true, value_name = "FILE")]
    pub results: Vec<PathBuf>,
    /// CSV of `id,best_twt`.
    #[arg(long)]
    pub reference: PathBuf,
    /// manifest.csv giving the TF/RDD group of each instance.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Drop instances with this TF from the report (repeatable).
    #[arg(long)]
    pub exclude_tf: Vec<f64>,
    /// Drop instances with this RDD from the report (repeatable).
    #[arg(long)]
    pub exclude_rdd: Vec<f64>,
    /// Directory for methods.csv and groups.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// results.jsonl from `solve`.
    #[arg(long, conflicts_with = "sweep")]
    pub results: Option<PathBuf>,
    /// Output directory of `sweep`.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Only replay this 0-based record or row.
    #[arg(long)]
    pub row: Option<usize>,
}
