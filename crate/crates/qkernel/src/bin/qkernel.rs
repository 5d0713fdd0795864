use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qkernel::cli::{
    cmd_baselines, cmd_convergence, cmd_fixed_kernel, cmd_metric_ablation, cmd_search,
    read_circuit_arg, RunConfig,
};
use qkernel::Error;

/// Data-adapted quantum kernels for support vector machines.
#[derive(Parser)]
#[command(name = "qkernel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; the flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for data generation, splitting, and the search.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory the JSON/CSV reports are written to.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also dump the final model's training Gram matrix as CSV.
    #[arg(long)]
    dump_gram: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a quantum kernel with the BIC-ranked beam search.
    Search(CommonArgs),
    /// Tune the four classical kernel baselines on the same split.
    Baselines(CommonArgs),
    /// Sweep the search hyperparameters K and M.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Beam widths; a single value pairs with every M.
        #[arg(long, value_delimiter = ',', required = true)]
        k_list: Vec<usize>,
        /// Numbers of parameter-optimized circuits.
        #[arg(long, value_delimiter = ',', required = true)]
        m_list: Vec<usize>,
    },
    /// Compare BIC, accuracy, and F1 as beam selection metrics.
    MetricAblation(CommonArgs),
    /// Retrain one fixed circuit's kernel at growing training sizes.
    FixedKernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Descriptor file path, or inline rows separated by '/'.
        #[arg(long)]
        circuit: String,
        /// Training set sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        train_sizes: Vec<usize>,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(threads) = common.threads {
        config.threads = Some(threads);
    }
    if let Some(out_dir) = &common.out_dir {
        config.out_dir = out_dir.clone();
    }
    if common.dump_gram {
        config.dump_gram = true;
    }
    Ok(config)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Search(common) => {
            cmd_search(&load_config(common)?)?;
        }
        Command::Baselines(common) => {
            cmd_baselines(&load_config(common)?)?;
        }
        Command::Convergence {
            common,
            k_list,
            m_list,
        } => {
            cmd_convergence(&load_config(common)?, k_list, m_list)?;
        }
        Command::MetricAblation(common) => {
            cmd_metric_ablation(&load_config(common)?)?;
        }
        Command::FixedKernel {
            common,
            circuit,
            train_sizes,
        } => {
            let descriptor = read_circuit_arg(circuit)?;
            cmd_fixed_kernel(&load_config(common)?, &descriptor, train_sizes)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
