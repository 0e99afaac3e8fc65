//! Evaluates every (SNR point, scheme) pair of a scenario.

use std::time::Instant;

use rayon::prelude::*;
use vlc_secrecy::intensity::build_profile;
use vlc_secrecy::rates::{secrecy_rate_case1, secrecy_rate_case2, ChannelCase, LogBase, SecrecyRate};
use vlc_secrecy::sca::{self, SCARun, CASE2_SUB_NOTICE, CASE2_ZF_REASON};
use vlc_secrecy::Error;

use crate::csv::Row;
use crate::error::CliError;
use crate::scenario::{Scenario, Scheme, SweepPoint};

pub const THREADS_ENV: &str = "VLC_SECRECY_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    /// Record `wall_ms`; off gives byte-identical output across runs.
    pub wall_clock: bool,
    pub threads: Option<usize>,
}

/// Reads the concurrency cap from [`THREADS_ENV`].
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::schema(THREADS_ENV, format!("{s:?} is not a positive integer"))),
        },
    }
}

fn rate_value(rate: SecrecyRate, base: LogBase) -> f64 {
    rate.in_base(base).clamped
}

fn failure(row: &mut Row, e: Error) {
    row.status = match e {
        Error::AllZfInfeasible { .. } => "AllZFInfeasible",
        Error::ZfInfeasible(_) => "ZfInfeasible",
        _ => "Failed",
    };
    row.note = Some(e.to_string());
}

fn fill_run(row: &mut Row, run: &SCARun, base: LogBase) {
    row.rate = Some(rate_value(run.rate, base));
    row.iterations = Some(run.iterations);
    row.termination = Some(run.termination.label());
    row.feasibility_residual = Some(run.feasibility_residual);
    row.zf_residual = run.zf_residual;
}

/// One CSV row. Library failures become a status, never an error.
pub fn evaluate(scenario: &Scenario, point: SweepPoint, scheme: Scheme) -> Row {
    let mut row = Row::new(point.snr_db, scheme.name(), "ok");
    let profile = match build_profile(point.amplitude, &scenario.alpha) {
        Ok(p) => p,
        Err(e) => {
            failure(&mut row, e);
            return row;
        }
    };
    let ch = &scenario.channel;
    let cfg = &scenario.sca;
    let base = scenario.log_base;
    let case2 = ch.case == ChannelCase::CaseII;
    let direct = |row: &mut Row| {
        let r = if case2 {
            secrecy_rate_case2(&ch.hb, &ch.he, &profile)
        } else {
            secrecy_rate_case1(&ch.hb, &ch.he, &profile)
        };
        match r {
            Ok(r) => {
                row.rate = Some(rate_value(r, base));
                row.iterations = Some(0);
                row.feasibility_residual = Some(0.0);
            }
            Err(e) => failure(row, e),
        }
    };
    match (scheme, case2) {
        (Scheme::Direct, _) => direct(&mut row),
        (Scheme::Fc | Scheme::FcZf, false) => match sca::run_full(scheme == Scheme::FcZf, ch, &profile, cfg) {
            Ok(out) => fill_run(&mut row, &out.run, base),
            Err(e) => failure(&mut row, e),
        },
        (Scheme::Sc | Scheme::ScZf, false) => match sca::run_sub(scheme == Scheme::ScZf, ch, &profile, cfg) {
            Ok(out) => fill_run(&mut row, &out.run, base),
            Err(e) => failure(&mut row, e),
        },
        (Scheme::ScMlse, false) => match sca::run_mlse(ch, &profile, cfg) {
            Ok(out) => {
                row.rate = Some(rate_value(out.rate, base));
                row.iterations = Some(out.qp_iterations);
                row.feasibility_residual = Some(out.feasibility_residual);
                row.zf_residual = Some(out.residual);
            }
            Err(e) => failure(&mut row, e),
        },
        (Scheme::FcCase2, true) => match sca::run_case2(ch, &profile, cfg) {
            Ok(out) => fill_run(&mut row, &out.run, base),
            Err(e) => failure(&mut row, e),
        },
        (Scheme::FcZf | Scheme::ScZf, true) => {
            row.status = "ZfInfeasible";
            row.note = Some(CASE2_ZF_REASON.into());
        }
        (Scheme::Sc, true) => {
            direct(&mut row);
            if row.status == "ok" {
                row.status = "Degenerate";
                row.note = Some(CASE2_SUB_NOTICE.into());
            }
        }
        // Rejected before the sweep starts.
        (Scheme::Fc | Scheme::ScMlse, true) | (Scheme::FcCase2, false) => {
            failure(&mut row, Error::CaseMismatch { expected: "a matching case", found: ch.case.name() })
        }
    }
    row
}

/// Rows ordered by point, then by scheme as listed.
pub fn run(scenario: &Scenario, schemes: &[Scheme], opts: SweepOptions) -> Result<Vec<Row>, CliError> {
    scenario.check_case(schemes)?;
    let tasks: Vec<(SweepPoint, Scheme)> =
        scenario.points.iter().flat_map(|&p| schemes.iter().map(move |&s| (p, s))).collect();
    let job = || {
        tasks
            .par_iter()
            .map(|&(p, s)| {
                let start = Instant::now();
                let mut row = evaluate(scenario, p, s);
                if opts.wall_clock {
                    row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
                }
                row
            })
            .collect()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}
