//! `kramers`: rate tables, single runs and convergence studies.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use kramers::evolve::{Scheme, Solver};
use kramers::gibbs::Regime;
use kramers::{k_limit, InitialData};

use commands::{Failure, Format};
use config::{parse_error, validate_eps, Config, ConfigError};

/// Exit status when a report boolean is false.
const EXIT_FAILED_CHECKS: u8 = 1;
/// Exit status for rejected configuration or arguments.
const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical or I/O errors.
const EXIT_RUNTIME: u8 = 3;

const ENV_HELP: &str = "\
Environment:
  KRAMERS_THREADS  maximum number of worker threads

Exit status: 0 when every reported check holds, 1 when some check fails (the
failures are printed to stderr as JSON), 2 for an invalid configuration, 3 for
numerical or I/O errors. Numbers are written with 17 significant digits.";

#[derive(Parser)]
#[command(name = "kramers", version, about = "Kramers-Smoluchowski equation at high activation energy and its reaction-diffusion limit", after_help = ENV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rate constants k_ε, q_ε and Laplace comparisons along the ladder.
    #[command(after_help = "\
CSV columns:
  eps                ε (\"limit\" on the last row)
  Z, laplace_Z       ∫e^(-H/ε) by quadrature and its Laplace value
  I_shifted          e^(-1/ε)·∫e^(H/ε) by quadrature
  laplace_I_shifted  its Laplace value
  log_tau            log τ_ε at the critical scaling
  k_eps              transition rate k_ε (k/2 on the limit row)
  two_k_eps_over_k   2k_ε/k
  q_eps, four_q_eps  transition mass q_ε and 4q_ε
  k                  limit rate constant k")]
    Rates {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ε values, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolves the ε-problem from the lift of the initial traces.
    #[command(after_help = "\
CSV columns (one row per step, including the backward-Euler start):
  t       time
  mass    ∫u dγ_ε
  b_eps   b_ε(u, u)
  a1_eps  x-part of a_ε(u, u)
  a2_eps  τ-weighted ξ-part of a_ε(u, u)
Snapshot CSV columns: t, x, xi, u.")]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        nxi: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Final time.
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long, value_parser = parse_solver)]
        solver: Option<Solver>,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the fields at the sample times to this file.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Evolves the limit reaction-diffusion system.
    #[command(after_help = "\
CSV columns (one row per x node and sample time):
  t, x, u_minus, u_plus")]
    Limit {
        #[command(flatten)]
        common: Common,
        /// Reaction rate k.
        #[arg(long, conflicts_with = "from_profile")]
        k: Option<f64>,
        /// Use the profile's limit rate k, ignoring any configured k.
        #[arg(long)]
        from_profile: bool,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Final time.
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// Initial traces as inline JSON or a JSON file, e.g.
        /// '{"kind":"constants","minus":0,"plus":1}'.
        #[arg(long)]
        u0: Option<String>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the ε-ladder against the limit and writes the report.
    #[command(after_help = "\
Files written to the output directory:
  report.json    configuration, pass/fail per block, failures, theorem1 and
                 theorem2 blocks (critical regime), full study
  config.json    the normalized configuration
  ladder.csv     eps, t, trace_error, trace_gap, b_eps, a1_eps, a2_eps,
                 b_error, a_error, a2_error, flattening, jensen_margin,
                 fiber_margin, pairing_error[f] per test function,
                 observable_error[f] per observable
  reference.csv  t, b, a_grad, a_react, pairing[f], observable[f]
  checks.csv     block, name, passed, values (';'-separated)
  theorem2.csv   eps, t, b_error, a_error, a2_eps, reaction (critical)
  limsup.csv     pair, eps, b_eps, a1_eps, a2_eps, b, a, b_error, a_error
                 (critical)")]
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_regime)]
        regime: Option<Regime>,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        nxi: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        /// Output directory; the configured output_dir when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    parse_enum(s)
}

fn parse_solver(s: &str) -> Result<Solver, String> {
    parse_enum(s)
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    parse_enum(s)
}

fn base_config(common: &Common) -> Result<Config, ConfigError> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_initial(arg: &str) -> Result<InitialData, ConfigError> {
    let (text, source) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), "--u0".to_string())
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| ConfigError::Read {
            path: arg.into(),
            message: e.to_string(),
        })?;
        (text, arg.to_string())
    };
    serde_json::from_str(&text).map_err(|e| parse_error(e, &source))
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("KRAMERS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("KRAMERS_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")
}

enum Run {
    Done(Vec<Failure>),
    Config(ConfigError),
}

fn run(command: Command) -> Result<Run> {
    macro_rules! cfg {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Ok(Run::Config(e)),
            }
        };
    }
    let failures = match command {
        Command::Rates { common, ladder, format, out } => {
            let mut c = cfg!(base_config(&common));
            set(&mut c.ladder, ladder);
            let c = cfg!(c.checked());
            commands::rates(&c, format, out.as_deref())?
        }
        Command::Simulate {
            common,
            eps,
            nx,
            nxi,
            dt,
            t_end,
            scheme,
            solver,
            regime,
            out,
            snapshots,
        } => {
            let mut c = cfg!(base_config(&common));
            set(&mut c.nx, nx);
            set(&mut c.nxi, nxi);
            set(&mut c.dt, dt);
            set(&mut c.t_end, t_end);
            set(&mut c.scheme, scheme);
            set(&mut c.solver, solver);
            set(&mut c.regime, regime);
            let c = cfg!(c.checked());
            cfg!(validate_eps(eps));
            commands::simulate(&c, eps, out.as_deref(), snapshots.as_deref())?
        }
        Command::Limit {
            common,
            k,
            from_profile,
            nx,
            dt,
            t_end,
            u0,
            scheme,
            out,
        } => {
            let mut c = cfg!(base_config(&common));
            set(&mut c.nx, nx);
            set(&mut c.dt, dt);
            set(&mut c.t_end, t_end);
            set(&mut c.scheme, scheme);
            if let Some(u) = u0 {
                c.initial = cfg!(parse_initial(&u));
            }
            if k.is_some() {
                c.k = k;
            }
            let c = cfg!(c.checked());
            let rate = match (from_profile, c.k) {
                (false, Some(k)) => k,
                _ => k_limit(&c.profile())?,
            };
            commands::limit(&c, rate, &c.initial, out.as_deref())?
        }
        Command::Converge {
            common,
            ladder,
            regime,
            times,
            nx,
            nxi,
            dt,
            out,
        } => {
            let mut c = cfg!(base_config(&common));
            set(&mut c.ladder, ladder);
            set(&mut c.regime, regime);
            set(&mut c.times, times);
            set(&mut c.nx, nx);
            set(&mut c.nxi, nxi);
            set(&mut c.dt, dt);
            if let Some(t) = c.times.last() {
                c.t_end = *t;
            }
            let c = cfg!(c.checked());
            let dir = out.unwrap_or_else(|| PathBuf::from(&c.output_dir));
            let failures = commands::converge(&c, &dir)?;
            eprintln!("report written to {}", Path::new(&dir).join("report.json").display());
            failures
        }
    };
    Ok(Run::Done(failures))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.command) {
        Ok(Run::Done(failures)) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(Run::Done(failures)) => {
            let doc = serde_json::json!({ "failures": failures });
            eprintln!("{doc}");
            ExitCode::from(EXIT_FAILED_CHECKS)
        }
        Ok(Run::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
