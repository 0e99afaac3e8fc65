//! `validate`: runs the oracle suites and reports each measured error.

use std::fmt;

use vlc_secrecy::surrogates::DEFAULT_TAU;

use crate::checks::{self, Family, QUADRATURE_ALPHAS};

const SEED: u64 = 2024;
const GRADIENT_POINTS: usize = 20;
const SURROGATE_POINTS: usize = 20;
const QP_COUNT: usize = 100;

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Replaces every default tolerance.
    pub tol: Option<f64>,
    pub gradient_perturbation: f64,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    /// Measured error; a failed computation is reported as NaN.
    pub error: f64,
    pub tol: f64,
    pub detail: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tol
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub checks: Vec<Check>,
    pub non_default: bool,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.non_default {
            writeln!(f, "note: non-default tolerance in effect")?;
        }
        for c in &self.checks {
            write!(f, "{} {:<24} error={:.3e} tol={:.1e}", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.error, c.tol)?;
            if let Some(d) = &c.detail {
                write!(f, " ({d})")?;
            }
            writeln!(f)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        writeln!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

pub fn run(opts: &Options) -> Report {
    let mut out = Vec::new();
    let mut push = |name: &str, default_tol: f64, measured: vlc_secrecy::Result<f64>| {
        let (error, detail) = match measured {
            Ok(e) => (e, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        out.push(Check {
            name: name.into(),
            error,
            tol: opts.tol.unwrap_or(default_tol),
            detail,
        });
    };

    push("uniform-limit", 1e-8, checks::uniform_limit_error());
    push("quadrature", 1e-6, checks::quadrature_error(&QUADRATURE_ALPHAS));
    for fam in Family::ALL {
        let e = checks::gradient_error(fam, GRADIENT_POINTS, SEED, opts.gradient_perturbation);
        push(&format!("gradient-{}", fam.name()), 1e-5, e);
    }
    match checks::surrogate_contract(SURROGATE_POINTS, SEED, DEFAULT_TAU) {
        Ok(s) => {
            push("surrogate-value", 1e-10, Ok(s.value));
            push("surrogate-gradient", 1e-8, Ok(s.gradient));
            push("surrogate-curvature", 1e-10, Ok((-s.curvature_margin).max(0.0)));
        }
        Err(e) => push("surrogate", 0.0, Err(e)),
    }
    match checks::qp_suite(QP_COUNT, SEED) {
        Ok(q) => {
            push("qp-kkt", 1e-8, Ok(q.kkt));
            push("qp-oracle", 1e-6, Ok(q.oracle));
            push("qp-slack", 1e-8, Ok((-q.min_slack).max(0.0)));
        }
        Err(e) => push("qp", 0.0, Err(e)),
    }
    match checks::matops_suite(SEED) {
        Ok(m) => {
            push("commutation", 1e-12, Ok(m.commutation));
            push("psd-idempotence", 1e-12, Ok(m.psd_idempotence));
            push("psd-min-eigenvalue", 1e-12, Ok((-m.psd_min_eigenvalue).max(0.0)));
            push("kron-mixed-product", 1e-12, Ok(m.kron_mixed_product));
        }
        Err(e) => push("matops", 0.0, Err(e)),
    }
    Report {
        checks: out,
        non_default: opts.tol.is_some(),
    }
}
