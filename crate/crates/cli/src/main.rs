mod commands;
mod report;
mod validate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expfun::exec::Execution;
use expfun::mc::{Integrator, SimulationConfig};
use expfun::spec::SpecDocument;
use expfun::Error;

use report::{Format, RunReport};

#[derive(Debug, Parser)]
#[command(
    name = "expfun",
    version,
    about = "Moments and transforms of exponential functionals I_t = int_0^t exp(-X_s) ds"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, env = "EXPFUN_FORMAT", default_value = "table")]
    format: Format,
    /// Seed for Monte Carlo runs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Closed,
    Ode,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Auto,
    Grid,
    Exact,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Number of simulated paths.
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Grid width.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Small-jump cutoff for infinite-activity kernels.
    #[arg(long, default_value_t = 1e-3)]
    pub cutoff: f64,
    /// Replace dropped small jumps by a variance-matched Gaussian.
    #[arg(long)]
    pub gaussian_compensation: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub integrator: IntegratorArg,
    /// Run paths on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl McArgs {
    pub fn config(&self, seed: u64, horizon: f64) -> SimulationConfig {
        SimulationConfig {
            n_paths: self.paths,
            time_step: self.dt,
            horizon,
            small_jump_cutoff: self.cutoff,
            seed,
            gaussian_compensation: self.gaussian_compensation,
            integrator: match self.integrator {
                IntegratorArg::Auto => Integrator::Auto,
                IntegratorArg::Grid => Integrator::Grid,
                IntegratorArg::Exact => Integrator::Exact,
            },
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::default()
            },
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finite-horizon moments E(I_t^k), k = 1..n.
    Moments {
        spec: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Infinite-horizon moments E(I_inf^k), k = 1..n.
    InfMoments {
        spec: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Positive threshold alpha0, negative bound beta and per-order verdicts.
    Finiteness {
        spec: PathBuf,
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value = "both")]
        sign: SignArg,
    },
    /// Laplace transform E exp(-beta I_inf) by its moment series.
    Laplace {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_terms: usize,
    },
    /// Laplace-Carson transforms of t -> E(I_t^k), k = 1..n.
    LaplaceCarson {
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<f64>,
        #[arg(long)]
        n: u32,
    },
    /// E(I_inf^-k) / E(I_inf^-1), k = 1..n.
    NegRatio {
        spec: PathBuf,
        #[arg(long)]
        n: u32,
    },
    /// Monte Carlo estimates.
    Mc {
        #[command(subcommand)]
        command: McCommand,
    },
    /// Cross-checks every applicable method against the others.
    Validate {
        spec: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[command(flatten)]
        mc: McArgs,
    },
}

#[derive(Debug, Subcommand)]
enum McCommand {
    /// E(I_t^alpha) for each alpha.
    Moment {
        spec: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "1", allow_negative_numbers = true)]
        alpha: Vec<f64>,
        /// Write per-path I_t to this CSV file.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// E(I_inf^alpha) or E exp(-beta I_inf), truncated at the horizon.
    Inf {
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, conflicts_with = "alpha")]
        beta_laplace: Option<f64>,
        #[arg(long, default_value_t = 40.0)]
        horizon: f64,
        /// Run even when Phi(1) <= 0.
        #[arg(long)]
        allow_nonpositive: bool,
        #[command(flatten)]
        mc: McArgs,
    },
    /// E(I_t^alpha) through the time-reversed process.
    Reversed {
        spec: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        n: f64,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Direct against reversed estimator, and against the analytic ladder.
    Validate {
        spec: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[command(flatten)]
        mc: McArgs,
    },
}

impl Command {
    fn spec_path(&self) -> &PathBuf {
        match self {
            Command::Moments { spec, .. }
            | Command::InfMoments { spec, .. }
            | Command::Finiteness { spec, .. }
            | Command::Laplace { spec, .. }
            | Command::LaplaceCarson { spec, .. }
            | Command::NegRatio { spec, .. }
            | Command::Validate { spec, .. } => spec,
            Command::Mc { command } => match command {
                McCommand::Moment { spec, .. }
                | McCommand::Inf { spec, .. }
                | McCommand::Reversed { spec, .. }
                | McCommand::Validate { spec, .. } => spec,
            },
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Spec(_) | Error::InvalidParameter(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let started = Instant::now();
    let doc = match SpecDocument::load(cli.command.spec_path()) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let process = match doc.to_process() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = commands::run(&cli.command, &process, cli.seed);
    let output = match outcome {
        Ok(o) => o,
        Err(e) => {
            let kind = if e.is_refusal() { "refused" } else { "error" };
            eprintln!("{kind}: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let report = RunReport {
        spec: doc,
        command: argv,
        results: output.table,
        warnings: output.warnings,
        details: output.details,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if cli.format == Format::Csv {
        for w in &report.warnings {
            eprintln!("warning: {}: {}", w.code, w.message);
        }
    }
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(report.render(cli.format).as_bytes()).is_err() {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
