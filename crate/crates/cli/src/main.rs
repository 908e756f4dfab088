mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Covariate selection with Gaussian-covariate P-values.
#[derive(Debug, Parser)]
#[command(name = "covsel", version, about)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "COVSEL_THREADS")]
    pub threads: Option<usize>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,

    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    /// Graphviz, `graph` only.
    Dot,
    /// Tab-separated edges, `graph` only.
    EdgeList,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stepwise (f1st), repeated (f2st) or leave-one-out repeated (f3st) selection.
    Select(SelectArgs),
    /// All-subsets selection.
    Subsets(SubsetsArgs),
    /// Approximation region and per-coefficient intervals for a subset.
    Region(RegionArgs),
    /// False-positive distribution under the null, simulated or interpolated.
    Fnfp(FnfpArgs),
    /// Regenerate the interpolation table used by `fnfp --lookup`.
    FpTable(FpTableArgs),
    /// Dependency graph from per-node stepwise regressions.
    Graph(GraphArgs),
    /// Simulation scenarios with known truth.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row (whitespace-delimited also accepted).
    pub file: PathBuf,
    /// Response column, by name or 1-based number.
    #[arg(long = "y", default_value = "1")]
    pub y: String,
    /// Fit without an intercept.
    #[arg(long)]
    pub no_intercept: bool,
    /// Fail on missing values instead of dropping incomplete rows.
    #[arg(long)]
    pub strict: bool,
    /// Scale every covariate to mean 0 and variance 1.
    #[arg(long)]
    pub standardize: bool,
    /// Treat the file as time series and regress the `--y` series on
    /// lags 1..=L of every series.
    #[arg(long, value_name = "L")]
    pub lags: Option<usize>,
    /// Series used as lagged covariates (default: target first, then all others).
    #[arg(long, value_delimiter = ',')]
    pub lag_series: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    F1st,
    F2st,
    F3st,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Ls,
    Huber,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OuterLawArg {
    Pool,
    PoolPlusOne,
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    /// Leading steps accepted regardless of P-value.
    #[arg(long, default_value_t = 10)]
    pub kmn: usize,
    /// Maximum subset size.
    #[arg(long)]
    pub kmx: Option<usize>,
    /// Skip the all-subsets pass over the stepwise selection.
    #[arg(long)]
    pub no_final_pass: bool,
    #[arg(long, default_value_t = 20)]
    pub final_pass_limit: usize,
    #[arg(long, value_enum, default_value = "pool")]
    pub outer_law: OuterLawArg,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[arg(long, value_enum, default_value = "f1st")]
    pub method: Method,
    /// Exclusion depth for f3st.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "ls")]
    pub loss: Loss,
    /// Huber tuning constant.
    #[arg(long, default_value_t = 1.0)]
    pub huber_c: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SubsetsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Columns (1-based) to enumerate over.
    #[arg(long, value_delimiter = ',', conflicts_with = "pool")]
    pub universe: Option<Vec<usize>>,
    /// Enumerate over the first K stepwise covariates.
    #[arg(long, value_name = "K")]
    pub pool: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Columns (1-based) of the subset.
    #[arg(long, value_delimiter = ',', required = true)]
    pub subset: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Reduced,
    Direct,
}

#[derive(Debug, Clone, Args)]
pub struct FnfpArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// One or more order ranks.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub nu: Vec<usize>,
    /// Interpolate the shipped table instead of simulating.
    #[arg(long)]
    pub lookup: bool,
    #[arg(long, default_value_t = 2000)]
    pub nsim: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "reduced")]
    pub engine: EngineArg,
    /// Report false positives per covariate.
    #[arg(long)]
    pub per_covariate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FpTableArgs {
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// CSV file whose columns are the nodes.
    pub file: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "f1st")]
    pub method: Method,
    /// Use α itself rather than α/q for each regression.
    #[arg(long)]
    pub no_bonferroni: bool,
    /// Emit undirected edges.
    #[arg(long)]
    pub undirected: bool,
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Tutorial1,
    Null,
    Consistency,
    Randomgraph,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    /// Forced steps; defaults to 10 for tutorial1 and 0 otherwise.
    #[arg(long)]
    pub kmn: Option<usize>,
    /// Orthonormal design (null and consistency).
    #[arg(long)]
    pub orthonormal: bool,
    #[arg(long, default_value_t = 5)]
    pub kstar: usize,
    #[arg(long, default_value_t = 3.0)]
    pub tau: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    covsel::par::init_threads(cli.threads);
    match commands::run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
