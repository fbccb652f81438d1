//! `sepspec`: white-noise tests, limiting spectral densities, CLT
//! parameters and simulation tables from the command line.

mod commands;
mod config;
mod error;
mod input;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{TableFormat, TestOptions};
use error::CliError;
use sepspec::whitenoise::Centering;

#[derive(Debug, Parser)]
#[command(name = "sepspec", version, about = "Spectral tools for separable sample covariance matrices")]
struct Cli {
    /// Base seed for anything random.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SEPSPEC_THREADS")]
    threads: Option<usize>,
    /// Test level.
    #[arg(long, global = true)]
    level: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CenteringArg {
    FiniteN,
    Asymptotic,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test a p x n CSV series (rows = variables, columns = time) for white noise.
    Test {
        input: PathBuf,
        /// Largest lag; lags 1..=q are combined by Bonferroni.
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Skip the first line of the file.
        #[arg(long)]
        header: bool,
        /// The file has time in rows and variables in columns.
        #[arg(long)]
        transpose: bool,
        /// Known ∫x dH1; without --m1/--m2 the moments are estimated.
        #[arg(long, requires = "m2")]
        m1: Option<f64>,
        /// Known ∫x² dH1.
        #[arg(long, requires = "m1")]
        m2: Option<f64>,
        #[arg(long, value_enum, default_value_t = CenteringArg::FiniteN)]
        centering: CenteringArg,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        kappa: f64,
    },
    /// Limiting spectral density of a model on a grid, as CSV.
    Lsd {
        config: PathBuf,
        /// lo:hi:count (default: 201 points across the support estimate).
        #[arg(long)]
        grid: Option<String>,
        /// Distance from the real axis at which Im m is read off.
        #[arg(long, default_value_t = 1e-5)]
        vmin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CLT mean and variance of a polynomial linear spectral statistic, as JSON.
    CltParams {
        config: PathBuf,
        #[arg(long = "f", default_value = "x^2")]
        f: String,
        /// Quadrature nodes per rectangle side.
        #[arg(long, default_value_t = sepspec::clt::NODES_PER_SIDE)]
        nodes: usize,
        /// Half-height of the inner contour.
        #[arg(long, default_value_t = sepspec::clt::DEFAULT_V0)]
        v0: f64,
    },
    /// Run a simulation plan and write the size/power table.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Test { input, q, header, transpose, m1, m2, centering, alpha, kappa } => {
            let opts = TestOptions {
                q,
                level: cli.level.unwrap_or(0.05),
                header,
                transpose,
                m1,
                m2,
                centering: match centering {
                    CenteringArg::FiniteN => Centering::FiniteN,
                    CenteringArg::Asymptotic => Centering::Asymptotic,
                },
                alpha_x: alpha,
                kappa_x: kappa,
            };
            commands::cmd_test(&input, &opts, seed)
        }
        Command::Lsd { config, grid, vmin, out } => commands::cmd_lsd(&config, grid.as_deref(), vmin, out.as_deref(), seed),
        Command::CltParams { config, f, nodes, v0 } => commands::cmd_clt_params(&config, &f, nodes, v0, seed),
        Command::Simulate { config, out, format } => commands::cmd_simulate(&config, out.as_ref(), format, cli.seed, cli.level),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sepspec: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
