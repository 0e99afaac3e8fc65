//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero on a
//! failure only when `ACCEPTANCE_STRICT=1`, so the report never hides behind
//! a red build and a strict gate is one variable away.

use std::time::{Duration, Instant};

use vlc_secrecy::intensity::build_profile;
use vlc_secrecy::presets;
use vlc_secrecy::rates::{apply_full_beamformer, apply_sub_beamformer, secrecy_rate_case1, secrecy_rate_case2, WiretapChannel};
use vlc_secrecy::sca::{self, SCAConfig, SCARun, Termination, CASE2_ZF_REASON};
use vlc_secrecy::surrogates::DEFAULT_TAU;
use vlc_secrecy::Error;
use vlc_secrecy_cli::checks::{self, Family, QUADRATURE_ALPHAS};
use vlc_secrecy_cli::csv;
use vlc_secrecy_cli::scenario::Scenario;
use vlc_secrecy_cli::sweep::{self, SweepOptions};

const SEED: u64 = 7;

// Criterion 1
const UNIFORM_TOL: f64 = 1e-8;
const QUADRATURE_REL_TOL: f64 = 1e-6;
const C1_BUDGET: Duration = Duration::from_secs(1);
// Criterion 2
const GRADIENT_POINTS: usize = 20;
const GRADIENT_REL_TOL: f64 = 1e-5;
const C2_BUDGET: Duration = Duration::from_secs(30);
// Criterion 3
const SURROGATE_POINTS: usize = 20;
const SURROGATE_VALUE_TOL: f64 = 1e-10;
const SURROGATE_GRADIENT_TOL: f64 = 1e-8;
const SURROGATE_CURVATURE_TOL: f64 = 1e-10;
// Criterion 4
const QP_COUNT: usize = 100;
const QP_KKT_TOL: f64 = 1e-8;
const QP_ORACLE_TOL: f64 = 1e-6;
const SLACK_TOL: f64 = 1e-8;
// Criteria 5-7
const ALPHA: f64 = 0.3;
const DOMINANCE_TOL: f64 = 1e-9;
const HIGH_SNR_REL_GAP: f64 = 0.05;
const C5_BUDGET: Duration = Duration::from_secs(300);
const ZF_TOL: f64 = 1e-6;
const CASE2_REL_GAP: f64 = 0.02;
// Criterion 8
const MAX_SCA_ITERS: usize = 500;
// Criterion 9
const MATOPS_TOL: f64 = 1e-12;

fn sweep_db() -> Vec<f64> {
    (0..=14).map(|k| 5.0 * k as f64).collect()
}

fn amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

struct Line {
    pass: bool,
    detail: String,
}

impl Line {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

/// SCA runs collected from criteria 5 and 6 for the bookkeeping check.
#[derive(Default)]
struct Runs(Vec<(String, SCARun)>);

impl Runs {
    fn push(&mut self, label: String, run: &SCARun) {
        self.0.push((label, run.clone()));
    }
}

fn criterion1() -> Line {
    let start = Instant::now();
    let (uni, quad) = match (checks::uniform_limit_error(), checks::quadrature_error(&QUADRATURE_ALPHAS)) {
        (Ok(u), Ok(q)) => (u, q),
        (Err(e), _) | (_, Err(e)) => return Line::error(e),
    };
    let t = start.elapsed();
    Line::new(
        uni <= UNIFORM_TOL && quad <= QUADRATURE_REL_TOL && t < C1_BUDGET,
        format!("uniform-limit err {uni:.2e}, quadrature rel err {quad:.2e}, {:.3} s", t.as_secs_f64()),
    )
}

fn criterion2() -> Line {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for fam in Family::ALL {
        match checks::gradient_error(fam, GRADIENT_POINTS, SEED, 0.0) {
            Ok(e) => {
                pass &= e <= GRADIENT_REL_TOL;
                parts.push(format!("{} {e:.2e}", fam.name()));
            }
            Err(e) => return Line::error(e),
        }
    }
    let t = start.elapsed();
    Line::new(
        pass && t < C2_BUDGET,
        format!("{GRADIENT_POINTS} points each, max rel err: {}, {:.2} s", parts.join(", "), t.as_secs_f64()),
    )
}

fn criterion3() -> Line {
    match checks::surrogate_contract(SURROGATE_POINTS, SEED, DEFAULT_TAU) {
        Ok(s) => Line::new(
            s.value <= SURROGATE_VALUE_TOL && s.gradient <= SURROGATE_GRADIENT_TOL && s.curvature_margin >= -SURROGATE_CURVATURE_TOL,
            format!(
                "value err {:.2e}, gradient err {:.2e}, min eig - tau/2 = {:.3e}",
                s.value, s.gradient, s.curvature_margin
            ),
        ),
        Err(e) => Line::error(e),
    }
}

fn criterion4() -> Line {
    match checks::qp_suite(QP_COUNT, SEED) {
        Ok(q) => Line::new(
            q.non_optimal == 0 && q.kkt <= QP_KKT_TOL && q.oracle <= QP_ORACLE_TOL && q.min_slack >= -SLACK_TOL,
            format!(
                "{QP_COUNT} QPs, {} not optimal, KKT {:.2e}, oracle gap {:.2e}, min slack {:.2e}",
                q.non_optimal, q.kkt, q.oracle, q.min_slack
            ),
        ),
        Err(e) => Line::error(e),
    }
}

fn criterion5(runs: &mut Runs) -> Line {
    let start = Instant::now();
    let ch = presets::group1();
    let cfg = SCAConfig::default();
    let mut worst_margin = f64::INFINITY;
    let mut top = (0.0, 0.0);
    for db in sweep_db() {
        let prof = match build_profile(amplitude(db), &[ALPHA; 4]) {
            Ok(p) => p,
            Err(e) => return Line::error(e),
        };
        let outcome = secrecy_rate_case1(&ch.hb, &ch.he, &prof)
            .and_then(|d| Ok((d, sca::run_full(false, &ch, &prof, &cfg)?, sca::run_full(true, &ch, &prof, &cfg)?)));
        let (direct, p1, p2) = match outcome {
            Ok(o) => o,
            Err(e) => return Line::error(format!("{db} dB: {e}")),
        };
        runs.push(format!("fc {db} dB"), &p1.run);
        runs.push(format!("fc-zf {db} dB"), &p2.run);
        worst_margin = worst_margin.min(p1.run.rate.raw - direct.raw);
        top = (p1.run.rate.raw, p2.run.rate.raw);
    }
    let gap = (top.0 - top.1).abs() / top.0;
    let t = start.elapsed();
    Line::new(
        worst_margin >= -DOMINANCE_TOL && gap <= HIGH_SNR_REL_GAP && t < C5_BUDGET,
        format!(
            "min(fc - direct) = {worst_margin:.4} nats, fc vs fc-zf at 70 dB: {:.4} / {:.4} ({:.2}%), {:.1} s",
            top.0,
            top.1,
            100.0 * gap,
            t.as_secs_f64()
        ),
    )
}

fn eve_norm_full(ch: &WiretapChannel, w: &nalgebra::DMatrix<f64>) -> f64 {
    apply_full_beamformer(&ch.hb, &ch.he, w).map(|(_, he)| he.norm()).unwrap_or(f64::INFINITY)
}

fn criterion6(runs: &mut Runs) -> Line {
    let ch = presets::group2();
    let cfg = SCAConfig::default();
    let mut worst_margin = f64::INFINITY;
    let mut worst_zf = 0.0f64;
    let mut zf_outputs = 0;
    let mut p4_infeasible = 0;
    for db in sweep_db() {
        let prof = match build_profile(amplitude(db), &[ALPHA; 4]) {
            Ok(p) => p,
            Err(e) => return Line::error(e),
        };
        let outcome = secrecy_rate_case1(&ch.hb, &ch.he, &prof)
            .and_then(|d| Ok((d, sca::run_sub(false, &ch, &prof, &cfg)?, sca::run_full(true, &ch, &prof, &cfg)?)));
        let (direct, p3, p2) = match outcome {
            Ok(o) => o,
            Err(e) => return Line::error(format!("{db} dB: {e}")),
        };
        worst_margin = worst_margin.min(p3.run.rate.raw - direct.raw);
        for (set, run) in &p3.per_set {
            if let Some(run) = run {
                runs.push(format!("sc {set} {db} dB"), run);
            }
        }
        runs.push(format!("fc-zf {db} dB"), &p2.run);
        worst_zf = worst_zf.max(eve_norm_full(&ch, &p2.beamformer.w));
        zf_outputs += 1;
        match sca::run_sub(true, &ch, &prof, &cfg) {
            Ok(p4) => {
                let he = apply_sub_beamformer(&ch.hb, &ch.he, &p4.beamformer.set, &p4.beamformer.b)
                    .map(|(_, he)| he.norm())
                    .unwrap_or(f64::INFINITY);
                worst_zf = worst_zf.max(he);
                zf_outputs += 1;
                for (set, run) in &p4.per_set {
                    if let Some(run) = run {
                        runs.push(format!("sc-zf {set} {db} dB"), run);
                    }
                }
            }
            Err(Error::AllZfInfeasible { .. }) => p4_infeasible += 1,
            Err(e) => return Line::error(format!("sc-zf {db} dB: {e}")),
        }
    }
    Line::new(
        worst_margin >= 0.0 && worst_zf <= ZF_TOL,
        format!(
            "min(sc - direct) = {worst_margin:.4} nats, max ||He W^T||_F = {worst_zf:.2e} over {zf_outputs} outputs \
             (sc-zf infeasible for every index set at {p4_infeasible} of 15 points)"
        ),
    )
}

fn criterion7() -> Line {
    let cfg = SCAConfig::default();
    let mut worst = 0.0f64;
    let mut refused = true;
    for (name, ch) in [("group1-transposed", presets::group1_transposed()), ("group2-transposed", presets::group2_transposed())] {
        let nt = ch.nt();
        for db in sweep_db() {
            let prof = match build_profile(amplitude(db), &vec![ALPHA; nt]) {
                Ok(p) => p,
                Err(e) => return Line::error(e),
            };
            let outcome = secrecy_rate_case2(&ch.hb, &ch.he, &prof).and_then(|d| Ok((d, sca::run_case2(&ch, &prof, &cfg)?)));
            let (direct, p6) = match outcome {
                Ok(o) => o,
                Err(e) => return Line::error(format!("{name} {db} dB: {e}")),
            };
            worst = worst.max((p6.run.rate.raw - direct.raw).abs() / direct.raw.max(1e-6));
        }
        refused &= matches!(sca::run_case2_zf(&ch), Err(Error::ZfInfeasible(r)) if r == CASE2_ZF_REASON);
    }
    Line::new(
        worst <= CASE2_REL_GAP && refused,
        format!(
            "max |fc-case2 - direct| / direct = {:.2e}, fc-zf {}",
            worst,
            if refused { "refused (Eve full column rank)" } else { "not refused" }
        ),
    )
}

fn render(json: &str) -> Result<String, String> {
    let sc = Scenario::from_json(json).map_err(|e| e.to_string())?;
    let rows = sweep::run(&sc, &sc.schemes, SweepOptions::default()).map_err(|e| e.to_string())?;
    Ok(csv::render(&rows))
}

fn criterion8(runs: &Runs) -> Line {
    let bad: Vec<String> = runs
        .0
        .iter()
        .filter(|(_, r)| r.termination == Termination::MaxIters || r.iterations > MAX_SCA_ITERS)
        .map(|(l, r)| format!("{l} ({} it)", r.iterations))
        .collect();
    let min_slack = runs.0.iter().map(|(_, r)| r.min_iterate_slack).fold(f64::INFINITY, f64::min);
    let scenarios = [
        r#"{"preset": "group1", "alpha": 0.3, "schemes": ["direct", "fc", "fc-zf"]}"#,
        r#"{"preset": "group2", "alpha": 0.3, "snr_db": [0, 30], "schemes": ["direct", "sc", "sc-zf", "sc-mlse"]}"#,
    ];
    let mut identical = true;
    for s in scenarios {
        match (render(s), render(s)) {
            (Ok(a), Ok(b)) => identical &= a == b,
            (Err(e), _) | (_, Err(e)) => return Line::error(e),
        }
    }
    let mut detail = format!(
        "{} SCA runs, {} hit MaxIters, min iterate slack {min_slack:.2e}, repeated CSV {}",
        runs.0.len(),
        bad.len(),
        if identical { "byte-identical" } else { "differs" }
    );
    if !bad.is_empty() {
        let shown: Vec<&str> = bad.iter().take(6).map(String::as_str).collect();
        detail.push_str(&format!("; e.g. {}", shown.join(", ")));
    }
    Line::new(bad.is_empty() && min_slack >= -SLACK_TOL && identical, detail)
}

fn criterion9() -> Line {
    match checks::matops_suite(SEED) {
        Ok(m) => Line::new(
            m.commutation <= MATOPS_TOL
                && m.psd_idempotence <= MATOPS_TOL
                && m.psd_min_eigenvalue >= -MATOPS_TOL
                && m.kron_mixed_product <= MATOPS_TOL,
            format!(
                "commutation {:.1e}, psd idempotence {:.1e}, psd min eig {:.1e}, kron mixed product {:.1e}",
                m.commutation, m.psd_idempotence, m.psd_min_eigenvalue, m.kron_mixed_product
            ),
        ),
        Err(e) => Line::error(e),
    }
}

fn main() {
    let mut runs = Runs::default();
    let names = [
        "uniform limit and quadrature",
        "gradient fidelity",
        "surrogate contract",
        "QP correctness",
        "group 1 trend",
        "group 2 trend",
        "case II",
        "convergence bookkeeping",
        "matrix calculus",
    ];
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let line = match i + 1 {
            1 => criterion1(),
            2 => criterion2(),
            3 => criterion3(),
            4 => criterion4(),
            5 => criterion5(&mut runs),
            6 => criterion6(&mut runs),
            7 => criterion7(),
            8 => criterion8(&runs),
            _ => criterion9(),
        };
        if !line.pass {
            failed += 1;
        }
        println!("{} {} {name}: {}", if line.pass { "PASS" } else { "FAIL" }, i + 1, line.detail);
    }
    println!("acceptance: {} passed, {failed} failed", names.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
