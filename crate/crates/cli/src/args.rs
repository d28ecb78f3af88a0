use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(name = "csuv", version, about = "Ensemble variable selection with selection-uncertainty plots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit the ensemble on a CSV dataset and write the plot bundle.
    Fit(FitArgs),
    /// Run a simulation study from a TOML experiment file.
    Simulate(SimulateArgs),
    /// Write one simulated dataset as CSV.
    Generate(GenerateArgs),
    /// Serve a bundle and the plot's static files on localhost.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV: header row, numeric cells, no missing values.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Constituent methods.
    #[arg(long, value_delimiter = ',', default_value = "lasso,mcp,scad")]
    pub methods: Vec<String>,
    /// Subsample repetitions.
    #[arg(long = "B", default_value_t = 100)]
    pub repetitions: usize,
    /// Percentage of ranked models kept per repetition.
    #[arg(long = "q", default_value_t = 0.0)]
    pub retention_pct: f64,
    /// Percentage of rows used for fitting in each repetition.
    #[arg(long = "w", default_value_t = 50.0)]
    pub train_pct: f64,
    /// Same-sign frequency threshold.
    #[arg(long = "t", default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Whisker percentiles.
    #[arg(long, value_delimiter = ',', default_value = "5,95")]
    pub whiskers: Vec<f64>,
    /// Coefficients of outside fits, long format `label,covariate,coefficient`
    /// in the data's original units.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Add the cross-validated fit of each constituent as a comparison.
    #[arg(long)]
    pub with_constituents: bool,
    /// Bundle JSON output.
    #[arg(long, default_value = "bundle.json")]
    pub out: PathBuf,
    /// Also write the text report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Leave the `generated_at` timestamp out of the bundle.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Results directory; overrides `output_dir` of the experiment file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    M1,
    M2,
    M3,
    M4,
    M5,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// rho for m2 and m5, block correlation for m3, factor count for m4.
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    /// Dataset CSV (covariates `x1..xp`, then `y`).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the true coefficients as `covariate,beta`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Bundle written by `csuv fit`.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the plot's built static files; a placeholder page is
    /// served at `/` without it.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}
