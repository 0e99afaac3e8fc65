//! Command-line front end for `vlc-secrecy`: scenario files, SNR sweeps over
//! the beamforming schemes, CSV output and a self-check suite.

pub mod checks;
pub mod csv;
pub mod error;
pub mod scenario;
pub mod sweep;
pub mod validate;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use vlc_secrecy::rates::LogBase;

pub use error::CliError;
use scenario::{Scenario, Scheme};
use sweep::SweepOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

impl From<BaseArg> for LogBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Two => LogBase::Two,
            BaseArg::E => LogBase::E,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlc-secrecy", version, about = "Secrecy rates and beamformer design for VLC wiretap channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Output {
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; `-` writes to stdout.
    #[arg(long)]
    pub out: PathBuf,
    /// Output logarithm base; overrides the scenario.
    #[arg(long)]
    pub log_base: Option<BaseArg>,
    /// Leave wall_ms blank so repeated runs are byte-identical.
    #[arg(long)]
    pub no_wall_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Direct-connected secrecy rate at every sweep point.
    Rate(Output),
    /// Run every scheme listed in the scenario at every sweep point.
    Optimize {
        #[command(flatten)]
        output: Output,
        /// SCA iteration limit.
        #[arg(long)]
        max_iters: Option<usize>,
        /// SCA step and objective tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the numerical self-checks.
    Validate {
        /// Replace every check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Scale the analytic gradients by 1 + X before checking them.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_gradient: f64,
    },
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::schema("config", format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

fn write_rows(out: &Path, rows: &[csv::Row]) -> Result<(), CliError> {
    let text = csv::render(rows);
    let written = if out == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())
    } else {
        std::fs::write(out, text)
    };
    written.map_err(|e| CliError::Internal(format!("cannot write {}: {e}", out.display())))?;
    for r in rows {
        if let Some(note) = &r.note {
            eprintln!("snr_db={} scheme={} status={}: {note}", csv::fmt_sig(r.snr_db), r.scheme, r.status);
        }
    }
    Ok(())
}

fn sweep(output: &Output, tweak: impl FnOnce(&mut Scenario), schemes: Option<Vec<Scheme>>) -> Result<(), CliError> {
    let mut scenario = load_scenario(&output.config)?;
    if let Some(b) = output.log_base {
        scenario.log_base = b.into();
    }
    tweak(&mut scenario);
    scenario.sca.validate().map_err(|e| CliError::schema("sca", e.to_string()))?;
    let opts = SweepOptions {
        wall_clock: !output.no_wall_clock,
        threads: sweep::threads_from_env()?,
    };
    let schemes = schemes.unwrap_or_else(|| scenario.schemes.clone());
    let rows = sweep::run(&scenario, &schemes, opts)?;
    write_rows(&output.out, &rows)
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Rate(output) => sweep(&output, |_| {}, Some(vec![Scheme::Direct])),
        Command::Optimize { output, max_iters, tol } => sweep(
            &output,
            |s| {
                if let Some(n) = max_iters {
                    s.sca.max_iters = n;
                }
                if let Some(t) = tol {
                    s.sca.tol_step = t;
                    s.sca.tol_obj = t;
                }
            },
            None,
        ),
        Command::Validate { tol, perturb_gradient } => {
            let report = validate::run(&validate::Options {
                tol,
                gradient_perturbation: perturb_gradient,
            });
            print!("{report}");
            return if report.passed() { 0 } else { 1 };
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() { 2 } else { 0 }
        }
    }
}
