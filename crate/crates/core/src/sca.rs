//! Successive convex approximation drivers for the fully- and sub-connected
//! beamforming problems, index-set enumeration and bias recovery.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::intensity::IntensityProfile;
use crate::qp::{
    compile_full_constraints, compile_sub_constraints, l1_affine_slack, solve_mlse, solve_qp, zf_equalities,
    ConstraintBlock, EqualityBlock, QPProblem, QPStatus, ZfKind, DEFAULT_QP_MAX_ITERS, DEFAULT_QP_TOL,
};
use crate::rates::{
    apply_full_beamformer, apply_sub_beamformer, equivalent_rate_case1, equivalent_rate_case2, secrecy_rate_case2,
    select_columns, ChannelCase, IndexSet, SecrecyRate, WiretapChannel, RANK_TOL,
};
use crate::surrogates::{Problem, ProblemKind, DEFAULT_TAU};

/// Upper bound on the number of index sets a sub-connected search may visit.
pub const INDEX_SET_CAP: usize = 5000;
/// Rates closer than this are treated as tied across index sets.
pub const TIE_TOL: f64 = 1e-10;
/// Weight of the pull toward the initial point when a Gram matrix is singular.
const SINGULAR_JITTER: f64 = 1e-8;
/// QP solutions that stop short of the KKT tolerance are still usable steps
/// when they are feasible to this level.
const STEP_FEASIBILITY: f64 = 1e-8;

/// Reason given when zero-forcing is requested for a Case II channel.
pub const CASE2_ZF_REASON: &str =
    "Eve's channel has full column rank, so He W^T = 0 forces W = 0 and no zero-forcing beamformer exists";
/// Notice attached when a sub-connected scheme is requested for Case II.
pub const CASE2_SUB_NOTICE: &str =
    "sub-connected beamforming degenerates to the direct-connected scheme when nT < nB (I = all LEDs)";

#[derive(Debug, Clone, PartialEq)]
pub struct SCAConfig {
    pub tau: f64,
    pub gamma0: f64,
    pub gamma_decay: f64,
    pub tol_step: f64,
    pub tol_obj: f64,
    pub max_iters: usize,
    pub qp_tol: f64,
    pub qp_max_iters: usize,
}

impl Default for SCAConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            gamma0: 1.0,
            gamma_decay: 1e-2,
            tol_step: 1e-6,
            tol_obj: 1e-6,
            max_iters: 500,
            qp_tol: DEFAULT_QP_TOL,
            qp_max_iters: DEFAULT_QP_MAX_ITERS,
        }
    }
}

impl SCAConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::Dimension(format!("gamma0 must lie in (0, 1], got {}", self.gamma0)));
        }
        if !(self.gamma_decay > 0.0 && self.gamma_decay < 1.0) {
            return Err(Error::Dimension(format!("gamma_decay must lie in (0, 1), got {}", self.gamma_decay)));
        }
        for t in [self.tau, self.tol_step, self.tol_obj, self.qp_tol] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Tolerance(t));
            }
        }
        if self.max_iters == 0 || self.qp_max_iters == 0 {
            return Err(Error::Dimension("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn next_gamma(&self, gamma: f64) -> f64 {
        gamma * (1.0 - self.gamma_decay * gamma)
    }

    /// The first `n` step sizes.
    pub fn step_sizes(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut g = self.gamma0;
        for _ in 0..n {
            out.push(g);
            g = self.next_gamma(g);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepTol,
    ObjTol,
    MaxIters,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::StepTol => "StepTol",
            Termination::ObjTol => "ObjTol",
            Termination::MaxIters => "MaxIters",
        }
    }
}

/// `objective[k] = f(V^(k))`; `step_norm[k] = ||V^(k+1) - V^(k)||_F`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub objective: Vec<f64>,
    pub step_norm: Vec<f64>,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.step_norm.len()
    }
}

/// Stopping rule applied after each completed iteration.
pub fn termination_check(trajectory: &Trajectory, config: &SCAConfig) -> Option<Termination> {
    let k = trajectory.iterations();
    if k == 0 {
        return None;
    }
    if trajectory.step_norm[k - 1] <= config.tol_step {
        return Some(Termination::StepTol);
    }
    let f = &trajectory.objective;
    if f.len() >= 2 && (f[f.len() - 1] - f[f.len() - 2]).abs() <= config.tol_obj {
        return Some(Termination::ObjTol);
    }
    if k >= config.max_iters {
        return Some(Termination::MaxIters);
    }
    None
}

#[derive(Debug, Clone)]
pub struct SCARun {
    pub iterations: usize,
    pub trajectory: Trajectory,
    pub variable: DMatrix<f64>,
    pub termination: Termination,
    /// `max(0, -slack)` of the intensity constraints at the returned variable.
    pub feasibility_residual: f64,
    /// Smallest constraint slack over the iterates `k >= 1`.
    pub min_iterate_slack: f64,
    /// `||He_eq||_F` (when zero-forcing was imposed).
    pub zf_residual: Option<f64>,
    pub rate: SecrecyRate,
    /// Subproblems accepted without meeting the KKT tolerance.
    pub inexact_subproblems: usize,
    /// Singular Gram recoveries performed.
    pub jitter_recoveries: usize,
}

#[derive(Debug, Clone)]
pub struct FullBeamformer {
    pub w: DMatrix<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SubBeamformer {
    pub set: IndexSet,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl SubBeamformer {
    /// The equivalent fully-connected pair `(W, d)` in original LED order.
    pub fn to_full(&self) -> FullBeamformer {
        let nt = self.set.nt();
        let sel = self.set.selected();
        let comp = self.set.complement();
        let mut w = DMatrix::zeros(nt, nt);
        for (k, &i) in sel.iter().enumerate() {
            w[(i, i)] = 1.0;
            for (j, &c) in comp.iter().enumerate() {
                w[(i, c)] = self.b[(k, j)];
            }
        }
        let mut d = DVector::zeros(nt);
        for (j, &c) in comp.iter().enumerate() {
            d[c] = self.c[j];
        }
        FullBeamformer { w, d }
    }
}

#[derive(Debug, Clone)]
pub struct FullOutcome {
    pub run: SCARun,
    pub beamformer: FullBeamformer,
}

#[derive(Debug, Clone)]
pub struct SubOutcome {
    pub run: SCARun,
    pub beamformer: SubBeamformer,
    /// Every index set tried and its run (`None` when zero-forcing was
    /// infeasible for that set).
    pub per_set: Vec<(IndexSet, Option<SCARun>)>,
}

/// Result of the least-squares zero-forcing relaxation over all index sets.
#[derive(Debug, Clone)]
pub struct MlseOutcome {
    pub beamformer: SubBeamformer,
    pub residual: f64,
    pub rate: SecrecyRate,
    pub feasibility_residual: f64,
    pub qp_iterations: usize,
}

fn beta(profile: &IntensityProfile, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| profile.beta[i]))
}

/// `d_j = 2 (beta_j - w_j^T beta)`.
pub fn recover_bias_full(w: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(w.ncols(), w.column_iter().enumerate().map(|(j, col)| 2.0 * (beta[j] - col.dot(beta))))
}

/// `c_j = 2 (beta_Ic_j - b_j^T beta_I)`.
pub fn recover_bias_sub(b: &DMatrix<f64>, beta_i: &DVector<f64>, beta_ic: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        b.ncols(),
        b.column_iter().enumerate().map(|(j, col)| 2.0 * (beta_ic[j] - col.dot(beta_i))),
    )
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All size-`nB` column subsets of `Hb` with a nonsingular square block, in
/// lexicographic order. Singularity is judged by `|det|` against the
/// Hadamard bound (product of column norms).
pub fn enumerate_index_sets(hb: &DMatrix<f64>) -> Result<Vec<IndexSet>> {
    let (nb, nt) = hb.shape();
    if nb == 0 || nb > nt {
        return Err(Error::NoIndexSet(format!("Bob channel is {nb}x{nt}")));
    }
    let count = binomial(nt, nb);
    if count > INDEX_SET_CAP as u128 {
        return Err(Error::TooManyIndexSets { count, cap: INDEX_SET_CAP });
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..nb).collect();
    loop {
        let sub = select_columns(hb, &current);
        let bound: f64 = sub.column_iter().map(|c| c.norm()).product();
        if bound > 0.0 && sub.clone().determinant().abs() > RANK_TOL * bound {
            out.push(IndexSet::new(current.clone(), nt)?);
        }
        // Advance to the next combination.
        let mut i = nb;
        while i > 0 && current[i - 1] == nt - nb + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        current[i - 1] += 1;
        for k in i..nb {
            current[k] = current[k - 1] + 1;
        }
    }
    if out.is_empty() {
        return Err(Error::NoIndexSet("every nB-column block of Hb is singular".into()));
    }
    Ok(out)
}

/// One constrained SCA family: problem, feasible set and how to read rates.
struct Setup<'a> {
    problem: Problem,
    block: ConstraintBlock,
    equalities: Option<EqualityBlock>,
    beta_in: DVector<f64>,
    beta_out: DVector<f64>,
    rate_of: Box<dyn Fn(&DMatrix<f64>) -> Result<(SecrecyRate, f64)> + 'a>,
}

fn jitter_toward(var: &DMatrix<f64>, init: &DMatrix<f64>) -> DMatrix<f64> {
    var * (1.0 - SINGULAR_JITTER) + init * SINGULAR_JITTER
}

fn is_singular(e: &Error) -> bool {
    matches!(e, Error::RankDeficient { .. })
}

fn sca_loop(setup: &Setup, config: &SCAConfig) -> Result<SCARun> {
    config.validate()?;
    let pr = &setup.problem;
    let init = pr.initial_point();
    let mut var = init.clone();
    let mut trajectory = Trajectory::default();
    let mut jitters = 0;
    let mut inexact = 0;
    let mut min_slack = f64::INFINITY;

    if pr.n_vars() == 0 {
        // Nothing to optimize (no complement LEDs).
        let (rate, zf) = (setup.rate_of)(&var)?;
        trajectory.objective.push(-rate.raw);
        trajectory.step_norm.push(0.0);
        return Ok(SCARun {
            iterations: 0,
            trajectory,
            variable: var,
            termination: Termination::StepTol,
            feasibility_residual: 0.0,
            min_iterate_slack: f64::INFINITY,
            zf_residual: setup.equalities.as_ref().map(|_| zf),
            rate,
            inexact_subproblems: 0,
            jitter_recoveries: 0,
        });
    }

    let f = pr.objective(&var)?;
    trajectory.objective.push(f);
    let mut gamma = config.gamma0;
    let termination = loop {
        let k = trajectory.iterations();
        let model = match pr.build_surrogate(&var, config.tau) {
            Ok(m) => m,
            Err(e) if is_singular(&e) => {
                jitters += 1;
                var = jitter_toward(&var, &init);
                pr.build_surrogate(&var, config.tau)?
            }
            Err(e) => return Err(e),
        };
        let (p, q, r) = model.qp_objective();
        let qp = QPProblem::beamformer(&p, &q, r, &setup.block, setup.equalities.as_ref())?;
        let sol = solve_qp(&qp, config.qp_tol, config.qp_max_iters)?;
        match sol.status {
            QPStatus::Optimal => {}
            QPStatus::MaxIters if sol.primal_residual <= STEP_FEASIBILITY => inexact += 1,
            status => {
                return Err(Error::Subproblem {
                    iteration: k,
                    reason: sol.reason.unwrap_or_else(|| format!("{status:?}")),
                })
            }
        }
        let target = setup.block.layout.beamformer(&sol.x);
        let mut next = &var + (&target - &var) * gamma;
        let f_next = match pr.objective(&next) {
            Ok(v) => v,
            Err(e) if is_singular(&e) => {
                jitters += 1;
                next = jitter_toward(&next, &init);
                pr.objective(&next)?
            }
            Err(e) => return Err(e),
        };
        if !f_next.is_finite() {
            return Err(Error::NonFinite("SCA objective"));
        }
        min_slack = min_slack.min(l1_affine_slack(&next, &setup.beta_in, &setup.beta_out));
        trajectory.step_norm.push((&next - &var).norm());
        trajectory.objective.push(f_next);
        var = next;
        if let Some(t) = termination_check(&trajectory, config) {
            break t;
        }
        gamma = config.next_gamma(gamma);
    };
    let (rate, zf) = (setup.rate_of)(&var)?;
    let slack = l1_affine_slack(&var, &setup.beta_in, &setup.beta_out);
    Ok(SCARun {
        iterations: trajectory.iterations(),
        trajectory,
        variable: var,
        termination,
        feasibility_residual: (-slack).max(0.0),
        min_iterate_slack: min_slack,
        zf_residual: setup.equalities.as_ref().map(|_| zf),
        rate,
        inexact_subproblems: inexact,
        jitter_recoveries: jitters,
    })
}

fn require_case(channel: &WiretapChannel, expected: ChannelCase) -> Result<()> {
    if channel.case == expected {
        return Ok(());
    }
    Err(match channel.case {
        ChannelCase::Unsupported => Error::UnsupportedCase {
            nt: channel.nt(),
            nb: channel.nb(),
            ne: channel.ne(),
        },
        found => Error::CaseMismatch {
            expected: expected.name(),
            found: found.name(),
        },
    })
}

/// Fully-connected design in Case I, optionally zero-forcing Eve.
pub fn run_full(zf: bool, channel: &WiretapChannel, profile: &IntensityProfile, config: &SCAConfig) -> Result<FullOutcome> {
    require_case(channel, ChannelCase::CaseI)?;
    let problem = Problem::new(ProblemKind::FullCaseI, channel, profile)?;
    let beta = profile.beta.clone();
    let setup = Setup {
        problem,
        block: compile_full_constraints(&beta),
        equalities: zf.then(|| zf_equalities(&ZfKind::Full, channel)),
        beta_in: beta.clone(),
        beta_out: beta.clone(),
        rate_of: Box::new(|w: &DMatrix<f64>| {
            let (hb, he) = apply_full_beamformer(&channel.hb, &channel.he, w)?;
            Ok((equivalent_rate_case1(&hb, &he, &profile.p, &profile.v)?, he.norm()))
        }),
    };
    let run = sca_loop(&setup, config)?;
    let d = recover_bias_full(&run.variable, &beta);
    Ok(FullOutcome {
        beamformer: FullBeamformer { w: run.variable.clone(), d },
        run,
    })
}

/// Sub-connected design for one index set.
pub fn run_sub_single(
    zf: bool,
    set: &IndexSet,
    channel: &WiretapChannel,
    profile: &IntensityProfile,
    config: &SCAConfig,
) -> Result<(SCARun, SubBeamformer)> {
    require_case(channel, ChannelCase::CaseI)?;
    let problem = Problem::new(ProblemKind::SubCaseI(set.clone()), channel, profile)?;
    let beta_i = beta(profile, set.selected());
    let beta_ic = beta(profile, set.complement());
    let sub = profile.select(set.selected());
    let setup = Setup {
        problem,
        block: compile_sub_constraints(&beta_i, &beta_ic),
        equalities: zf.then(|| zf_equalities(&ZfKind::Sub(set.clone()), channel)),
        beta_in: beta_i.clone(),
        beta_out: beta_ic.clone(),
        rate_of: Box::new(move |b: &DMatrix<f64>| {
            let (hb, he) = apply_sub_beamformer(&channel.hb, &channel.he, set, b)?;
            Ok((equivalent_rate_case1(&hb, &he, &sub.p, &sub.v)?, he.norm()))
        }),
    };
    let run = sca_loop(&setup, config)?;
    let c = recover_bias_sub(&run.variable, &beta_i, &beta_ic);
    let bf = SubBeamformer {
        set: set.clone(),
        b: run.variable.clone(),
        c,
    };
    Ok((run, bf))
}

/// Sub-connected design: SCA on every admissible index set, keeping the best
/// rate (ties go to the lexicographically smallest set).
pub fn run_sub(zf: bool, channel: &WiretapChannel, profile: &IntensityProfile, config: &SCAConfig) -> Result<SubOutcome> {
    require_case(channel, ChannelCase::CaseI)?;
    let sets = enumerate_index_sets(&channel.hb)?;
    let mut best: Option<(SCARun, SubBeamformer)> = None;
    let mut per_set = Vec::with_capacity(sets.len());
    for set in &sets {
        match run_sub_single(zf, set, channel, profile, config) {
            Ok((run, bf)) => {
                let better = best.as_ref().is_none_or(|(b, _)| run.rate.raw > b.rate.raw + TIE_TOL);
                per_set.push((set.clone(), Some(run.clone())));
                if better {
                    best = Some((run, bf));
                }
            }
            Err(Error::Subproblem { iteration: 0, .. }) if zf => per_set.push((set.clone(), None)),
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((run, beamformer)) => Ok(SubOutcome { run, beamformer, per_set }),
        None => Err(Error::AllZfInfeasible { index_sets: sets.len() }),
    }
}

/// Least-squares relaxation of sub-connected zero-forcing: the smallest
/// residual over all index sets (ties broken by rate, then lexicographically).
pub fn run_mlse(channel: &WiretapChannel, profile: &IntensityProfile, config: &SCAConfig) -> Result<MlseOutcome> {
    require_case(channel, ChannelCase::CaseI)?;
    config.validate()?;
    let sets = enumerate_index_sets(&channel.hb)?;
    let mut best: Option<MlseOutcome> = None;
    for set in &sets {
        let sol = solve_mlse(channel, set, &profile.beta, config.qp_tol)?;
        let (hb, he) = apply_sub_beamformer(&channel.hb, &channel.he, set, &sol.b)?;
        let sub = profile.select(set.selected());
        let rate = equivalent_rate_case1(&hb, &he, &sub.p, &sub.v)?;
        let beta_i = beta(profile, set.selected());
        let beta_ic = beta(profile, set.complement());
        let slack = l1_affine_slack(&sol.b, &beta_i, &beta_ic);
        let c = recover_bias_sub(&sol.b, &beta_i, &beta_ic);
        let cand = MlseOutcome {
            beamformer: SubBeamformer { set: set.clone(), b: sol.b, c },
            residual: sol.residual,
            rate,
            feasibility_residual: (-slack).max(0.0),
            qp_iterations: sol.qp.iterations,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.residual < b.residual - TIE_TOL
                    || ((cand.residual - b.residual).abs() <= TIE_TOL && cand.rate.raw > b.rate.raw + TIE_TOL)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::NoIndexSet("no index set admitted a least-squares solution".into()))
}

/// Fully-connected design in Case II.
pub fn run_case2(channel: &WiretapChannel, profile: &IntensityProfile, config: &SCAConfig) -> Result<FullOutcome> {
    require_case(channel, ChannelCase::CaseII)?;
    let problem = Problem::new(ProblemKind::FullCaseII, channel, profile)?;
    let beta = profile.beta.clone();
    let setup = Setup {
        problem,
        block: compile_full_constraints(&beta),
        equalities: None,
        beta_in: beta.clone(),
        beta_out: beta.clone(),
        rate_of: Box::new(|w: &DMatrix<f64>| {
            let (hb, he) = apply_full_beamformer(&channel.hb, &channel.he, w)?;
            Ok((equivalent_rate_case2(&hb, &he, &profile.p, &profile.v)?, he.norm()))
        }),
    };
    let run = sca_loop(&setup, config)?;
    let d = recover_bias_full(&run.variable, &beta);
    Ok(FullOutcome {
        beamformer: FullBeamformer { w: run.variable.clone(), d },
        run,
    })
}

/// Zero-forcing in Case II is refused.
pub fn run_case2_zf(channel: &WiretapChannel) -> Result<FullOutcome> {
    require_case(channel, ChannelCase::CaseII)?;
    Err(Error::ZfInfeasible(CASE2_ZF_REASON))
}

/// Sub-connected request in Case II: the direct-connected rate plus a notice.
pub fn run_case2_sub(channel: &WiretapChannel, profile: &IntensityProfile) -> Result<(SecrecyRate, &'static str)> {
    require_case(channel, ChannelCase::CaseII)?;
    Ok((secrecy_rate_case2(&channel.hb, &channel.he, profile)?, CASE2_SUB_NOTICE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::build_profile;
    use crate::oracle;
    use crate::presets;
    use crate::qp::full_constraint_slack;
    use crate::rates::secrecy_rate_case1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj(objective: &[f64], steps: &[f64]) -> Trajectory {
        Trajectory {
            objective: objective.to_vec(),
            step_norm: steps.to_vec(),
        }
    }

    #[test]
    fn termination_rules() {
        let cfg = SCAConfig::default();
        assert_eq!(termination_check(&traj(&[1.0], &[]), &cfg), None);
        assert_eq!(termination_check(&traj(&[1.0, 0.5], &[0.0]), &cfg), Some(Termination::StepTol));
        assert_eq!(termination_check(&traj(&[1.0, 1.0 - 1e-7], &[0.1]), &cfg), Some(Termination::ObjTol));
        let cfg3 = SCAConfig { max_iters: 2, ..SCAConfig::default() };
        assert_eq!(termination_check(&traj(&[1.0, 0.5, 0.1], &[0.1, 0.1]), &cfg3), Some(Termination::MaxIters));
        assert_eq!(termination_check(&traj(&[1.0, 0.5], &[0.1]), &cfg3), None);
    }

    #[test]
    fn step_sizes_decrease_and_diverge() {
        let cfg = SCAConfig::default();
        let mut g = cfg.gamma0;
        let mut sum = 0.0;
        let mut early = 0.0;
        for k in 0..1_000_000 {
            let next = cfg.next_gamma(g);
            assert!(next > 0.0 && next < g, "step {k}");
            sum += g;
            if k == 999 {
                early = sum;
            }
            g = next;
        }
        // Partial sums keep growing like 100 ln k.
        assert!(sum > 900.0 && sum > 2.5 * early, "{early} {sum}");
        assert_eq!(cfg.step_sizes(3)[0], 1.0);
        assert!((cfg.step_sizes(3)[1] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SCAConfig::default().validate().is_ok());
        assert!(SCAConfig { gamma0: 1.5, ..SCAConfig::default() }.validate().is_err());
        assert!(SCAConfig { tol_obj: 0.0, ..SCAConfig::default() }.validate().is_err());
        assert!(SCAConfig { gamma_decay: 1.0, ..SCAConfig::default() }.validate().is_err());
    }

    #[test]
    fn index_set_enumeration() {
        let hb = DMatrix::from_row_slice(2, 3, &[1.0, 0.3, 0.7, 0.2, 0.9, 0.4]);
        let sets: Vec<Vec<usize>> = enumerate_index_sets(&hb).unwrap().iter().map(|s| s.selected().to_vec()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);

        let dup = DMatrix::from_row_slice(2, 3, &[1.0, 0.3, 0.3, 0.2, 0.9, 0.9]);
        let sets: Vec<Vec<usize>> = enumerate_index_sets(&dup).unwrap().iter().map(|s| s.selected().to_vec()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![0, 2]]);
        assert_eq!(sets, oracle::nonsingular_subsets(&dup, 1e-12));

        let g1 = presets::group1();
        assert_eq!(enumerate_index_sets(&g1.hb).unwrap().len(), 4);
        let sparse = DMatrix::from_row_slice(1, 4, &[0.5, 0.0, 0.2, 0.0]);
        assert_eq!(enumerate_index_sets(&sparse).unwrap().len(), 2);
        assert!(matches!(enumerate_index_sets(&DMatrix::zeros(1, 3)), Err(Error::NoIndexSet(_))));
        assert!(matches!(
            enumerate_index_sets(&DMatrix::from_element(7, 16, 1.0)),
            Err(Error::TooManyIndexSets { .. })
        ));
    }

    #[test]
    fn bias_recovery() {
        let beta = DVector::from_vec(vec![0.1, -0.3, 0.2]);
        assert!(recover_bias_full(&DMatrix::identity(3, 3), &beta).amax() < 1e-15);
        let c = recover_bias_sub(&DMatrix::zeros(2, 2), &DVector::zeros(2), &DVector::from_vec(vec![0.1, -0.2]));
        assert_eq!(c.as_slice(), &[0.2, -0.4]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 200 {
            let w = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-0.4..0.4));
            if full_constraint_slack(&w, &beta) < 0.0 {
                continue;
            }
            checked += 1;
            let d = recover_bias_full(&w, &beta);
            for (j, col) in w.column_iter().enumerate() {
                assert!(d[j].abs() <= 1.0 - col.abs().sum() + 1e-8);
            }
        }
    }

    #[test]
    fn sub_to_full_embedding() {
        let set = IndexSet::new(vec![1], 3).unwrap();
        let sb = SubBeamformer {
            set,
            b: DMatrix::from_row_slice(1, 2, &[0.2, -0.3]),
            c: DVector::from_vec(vec![0.1, 0.05]),
        };
        let full = sb.to_full();
        let hb = DMatrix::from_row_slice(1, 3, &[0.4, 0.8, 0.5]);
        let he = DMatrix::from_row_slice(1, 3, &[0.1, 0.3, 0.2]);
        let (hb_s, he_s) = apply_sub_beamformer(&hb, &he, &sb.set, &sb.b).unwrap();
        let (hb_f, he_f) = apply_full_beamformer(&hb, &he, &full.w).unwrap();
        // Rows of W outside I are zero, so only column 1 of the full equivalent channel is nonzero.
        assert!((hb_f.column(1) - hb_s.column(0)).amax() < 1e-15);
        assert!((he_f.column(1) - he_s.column(0)).amax() < 1e-15);
        assert_eq!(full.d.as_slice(), &[0.1, 0.0, 0.05]);
    }

    #[test]
    fn full_run_first_iterate_is_subproblem_solution() {
        let ch = presets::group1();
        let prof = build_profile(10f64.powf(20.0 / 20.0), &[0.3; 4]).unwrap();
        let cfg = SCAConfig { max_iters: 1, ..SCAConfig::default() };
        let out = run_full(false, &ch, &prof, &cfg).unwrap();
        assert_eq!(out.run.iterations, 1);
        assert_eq!(out.run.termination, Termination::MaxIters);
        assert!(out.run.feasibility_residual <= 1e-8);
    }

    #[test]
    fn full_run_improves_on_direct() {
        let ch = presets::group1();
        let prof = build_profile(10f64.powf(30.0 / 20.0), &[0.3; 4]).unwrap();
        let out = run_full(false, &ch, &prof, &SCAConfig::default()).unwrap();
        let direct = secrecy_rate_case1(&ch.hb, &ch.he, &prof).unwrap();
        assert!(out.run.rate.raw >= direct.raw - 1e-9);
        assert!(out.run.min_iterate_slack >= -1e-8);
        let (hb, he) = apply_full_beamformer(&ch.hb, &ch.he, &out.beamformer.w).unwrap();
        let again = equivalent_rate_case1(&hb, &he, &prof.p, &prof.v).unwrap();
        assert!((again.raw - out.run.rate.raw).abs() <= 1e-12);
        assert_ne!(out.run.termination, Termination::MaxIters);
    }

    #[test]
    fn zf_run_nulls_eve() {
        let ch = presets::group1();
        let prof = build_profile(10f64.powf(40.0 / 20.0), &[0.3; 4]).unwrap();
        let out = run_full(true, &ch, &prof, &SCAConfig::default()).unwrap();
        assert!(out.run.zf_residual.unwrap() <= 1e-6);
        assert!(out.run.feasibility_residual <= 1e-8);
    }

    #[test]
    fn sub_run_with_square_bob_is_direct() {
        let hb = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.3, 0.8]);
        let he = DMatrix::from_row_slice(1, 2, &[0.2, 0.1]);
        let ch = WiretapChannel::new(hb, he).unwrap();
        let prof = build_profile(10.0, &[0.3; 2]).unwrap();
        let out = run_sub(false, &ch, &prof, &SCAConfig::default()).unwrap();
        assert_eq!(out.per_set.len(), 1);
        assert_eq!(out.beamformer.b.shape(), (2, 0));
        let direct = secrecy_rate_case1(&ch.hb, &ch.he, &prof).unwrap();
        assert!((out.run.rate.raw - direct.raw).abs() < 1e-12);
    }

    #[test]
    fn case2_refusals_and_degeneration() {
        let ch = presets::group2_transposed();
        assert_eq!(run_case2_zf(&ch).unwrap_err(), Error::ZfInfeasible(CASE2_ZF_REASON));
        let prof = build_profile(10.0, &[0.3; 2]).unwrap();
        let (rate, notice) = run_case2_sub(&ch, &prof).unwrap();
        assert_eq!(rate, secrecy_rate_case2(&ch.hb, &ch.he, &prof).unwrap());
        assert!(notice.contains("degenerates"));
        let prof4 = build_profile(10.0, &[0.3; 4]).unwrap();
        assert!(matches!(
            run_full(false, &ch, &prof, &SCAConfig::default()),
            Err(Error::CaseMismatch { .. })
        ));
        assert!(matches!(run_case2(&presets::group1(), &prof4, &SCAConfig::default()), Err(Error::CaseMismatch { .. })));
    }
}
