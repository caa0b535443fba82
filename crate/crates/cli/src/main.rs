use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qgarch_cli::{nic_to_file, run, simulate_to_file, CliError, InputKind, NicGrid, RunManifest};
use qgarch_core::data::Column;
use qgarch_core::model::{ModelKind, ModelParams};
use qgarch_core::sampler::{ChainConfig, Sigma1Policy};

#[derive(Parser)]
#[command(name = "qgarch", version, about = "Adaptive Metropolis-Hastings estimation of GARCH/QGARCH models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior of a price or return series and write reports.
    Run(RunArgs),
    /// Write a synthetic QGARCH return series.
    Simulate(SimulateArgs),
    /// Write the news impact curve of fixed parameters.
    Nic(NicArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKindArg {
    Prices,
    Returns,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Garch,
    Qgarch,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Garch => ModelKind::Garch,
            ModelArg::Qgarch => ModelKind::Qgarch,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    nic_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    nic_max: f64,
    #[arg(long, default_value_t = 201)]
    nic_points: usize,
}

impl From<&GridArgs> for NicGrid {
    fn from(g: &GridArgs) -> Self {
        NicGrid {
            min: g.nic_min,
            max: g.nic_max,
            points: g.nic_points,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputKindArg::Prices)]
    input_kind: InputKindArg,
    /// Column index or header name.
    #[arg(long, default_value = "0")]
    column: String,
    #[arg(long, value_enum, default_value_t = ModelArg::Qgarch)]
    model: ModelArg,
    #[arg(long, default_value_t = 10.0)]
    nu: f64,
    #[arg(long, default_value_t = 5000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    initial_pool: usize,
    #[arg(long, default_value_t = 1000)]
    update_interval: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop re-fitting the proposal after this many samples.
    #[arg(long)]
    freeze_after: Option<usize>,
    /// Initial conditional variance; defaults to the sample variance.
    #[arg(long)]
    sigma1_sq: Option<f64>,
    #[arg(long, default_value_t = qgarch_core::diagnostics::DEFAULT_JACKKNIFE_BLOCKS)]
    jackknife_blocks: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    omega: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma: f64,
}

impl From<&ParamArgs> for ModelParams {
    fn from(p: &ParamArgs) -> Self {
        ModelParams::qgarch(p.omega, p.alpha, p.beta, p.gamma)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    n: usize,
    /// Initial conditional variance; defaults to the unconditional variance.
    #[arg(long)]
    sigma1_sq: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NicArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let chain = ChainConfig {
                burn_in: a.burn_in,
                initial_pool: a.initial_pool,
                update_interval: a.update_interval,
                total_samples: a.samples,
                nu: a.nu,
                freeze_after: a.freeze_after,
                sigma1_sq: a.sigma1_sq.map_or(Sigma1Policy::SampleVariance, Sigma1Policy::Explicit),
                ..ChainConfig::new(a.model.into(), a.seed)
            };
            let manifest = RunManifest {
                input_kind: match a.input_kind {
                    InputKindArg::Prices => InputKind::Prices,
                    InputKindArg::Returns => InputKind::Returns,
                },
                column: a.column.parse::<Column>().expect("infallible"),
                nic_grid: (&a.grid).into(),
                jackknife_blocks: a.jackknife_blocks,
                ..RunManifest::new(a.input, a.out_dir, chain)
            };
            let out = run(&manifest)?;
            print!("{}", out.summary.to_table());
            Ok(())
        }
        Command::Simulate(a) => {
            let params = ModelParams::from(&a.params);
            params.check_support()?;
            let sigma1_sq = match a.sigma1_sq {
                Some(v) => v,
                None => qgarch_core::unconditional_variance(&params)?,
            };
            let series = simulate_to_file(&params, a.n, sigma1_sq, a.seed, &a.out)?;
            eprintln!("wrote {} returns to {}", series.len(), a.out.display());
            Ok(())
        }
        Command::Nic(a) => nic_to_file(&ModelParams::from(&a.params), &(&a.grid).into(), &a.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
