//! Measured-error suites shared by `validate` and the acceptance target. Each
//! function reports the worst error it saw; callers decide what passes.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlc_secrecy::intensity::{build_profile, IntensityProfile};
use vlc_secrecy::matops::{kron, min_eigenvalue, nearest_psd, vec, CommutationMatrix};
use vlc_secrecy::oracle;
use vlc_secrecy::presets;
use vlc_secrecy::qp::{
    compile_full_constraints, compile_sub_constraints, l1_affine_slack, solve_qp, QPProblem, QPStatus,
    DEFAULT_QP_MAX_ITERS, DEFAULT_QP_TOL,
};
use vlc_secrecy::rates::WiretapChannel;
use vlc_secrecy::sca::enumerate_index_sets;
use vlc_secrecy::surrogates::{Problem, ProblemKind};
use vlc_secrecy::Result;

pub const QUADRATURE_ALPHAS: [f64; 6] = [0.1, 0.25, 0.4, 0.5, 0.6, 0.9];

/// Largest of `|p - 2/(pi e)|` and `|v - 1/3|` for `A = 1`, `alpha = 1/2`.
pub fn uniform_limit_error() -> Result<f64> {
    let prof = build_profile(1.0, &[0.5])?;
    Ok((prof.p[0] - 2.0 / (PI * E)).abs().max((prof.v[0] - 1.0 / 3.0).abs()))
}

/// Largest relative error of the closed-form `p` and `v` against quadrature.
pub fn quadrature_error(alphas: &[f64]) -> Result<f64> {
    let prof = build_profile(1.0, alphas)?;
    let mut worst = 0.0f64;
    for (i, &a) in alphas.iter().enumerate() {
        let p = oracle::entropy_power_by_quadrature(1.0, a);
        let v = oracle::variance_by_quadrature(1.0, a);
        worst = worst.max(((prof.p[i] - p) / p).abs()).max(((prof.v[i] - v) / v).abs());
    }
    Ok(worst)
}

/// The three families with closed-form Bob gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Fully-connected, `nT >= nB` (1x4 or 2x4 Bob).
    Full,
    /// Sub-connected on a random admissible index set (1x4 or 2x4 Bob).
    Sub,
    /// Fully-connected, `nT < nB` (4x2 Bob).
    CaseII,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Full, Family::Sub, Family::CaseII];

    pub fn name(self) -> &'static str {
        match self {
            Family::Full => "full",
            Family::Sub => "sub",
            Family::CaseII => "case2",
        }
    }
}

fn random_profile(rng: &mut ChaCha8Rng, nt: usize) -> Result<IntensityProfile> {
    let amplitude = 10f64.powf(rng.gen_range(0.0..2.0));
    let alpha: Vec<f64> = (0..nt).map(|_| rng.gen_range(0.2..0.8)).collect();
    build_profile(amplitude, &alpha)
}

/// A random matrix whose columns satisfy the L1/affine intensity limits.
pub fn random_feasible(rng: &mut ChaCha8Rng, rows: usize, beta_in: &DVector<f64>, beta_out: &DVector<f64>) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(rows, beta_out.len());
    for j in 0..beta_out.len() {
        for _ in 0..1000 {
            let col = DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0));
            let l1 = col.abs().sum();
            if l1 == 0.0 {
                continue;
            }
            let t = rng.gen_range(0.05..0.9);
            let col = col * (t / l1);
            if (col.dot(beta_in) - beta_out[j]).abs() <= 0.5 - 0.5 * t {
                v.set_column(j, &col);
                break;
            }
        }
    }
    v
}

fn pick(x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i]))
}

/// Group 1 (1x4 MISO) or Group 2 (2x4 MIMO), equally likely.
fn case1_preset(rng: &mut ChaCha8Rng) -> WiretapChannel {
    if rng.gen_bool(0.5) {
        presets::group1()
    } else {
        presets::group2()
    }
}

/// A problem of the given family at a random operating point, with the
/// constraint data needed to draw feasible points.
fn random_problem(rng: &mut ChaCha8Rng, family: Family) -> Result<(Problem, DVector<f64>, DVector<f64>)> {
    let (channel, kind): (WiretapChannel, ProblemKind) = match family {
        Family::Full => (case1_preset(rng), ProblemKind::FullCaseI),
        Family::Sub => {
            let ch = case1_preset(rng);
            let sets = enumerate_index_sets(&ch.hb)?;
            let set = sets[rng.gen_range(0..sets.len())].clone();
            (ch, ProblemKind::SubCaseI(set))
        }
        Family::CaseII => (presets::group2_transposed(), ProblemKind::FullCaseII),
    };
    let prof = random_profile(rng, channel.nt())?;
    let (beta_in, beta_out) = match &kind {
        ProblemKind::SubCaseI(set) => (pick(&prof.beta, set.selected()), pick(&prof.beta, set.complement())),
        _ => (prof.beta.clone(), prof.beta.clone()),
    };
    Ok((Problem::new(kind, &channel, &prof)?, beta_in, beta_out))
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

/// Worst relative error between the closed-form Bob gradient and central
/// differences. `perturbation` scales the analytic gradient by `1 + perturbation`
/// (a negative control; zero in normal use).
pub fn gradient_error(family: Family, points: usize, seed: u64, perturbation: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let (pr, beta_in, beta_out) = random_problem(&mut rng, family)?;
        let x = random_feasible(&mut rng, pr.shape().0, &beta_in, &beta_out);
        let g = pr.grad_fb(&x)? * (1.0 + perturbation);
        let fd = oracle::central_gradient(|y| pr.f_b(y).unwrap_or(f64::NAN), &x, 1e-6);
        worst = worst.max(rel_err(&g, &fd));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateErrors {
    /// `|f~(x_k; x_k) - f(x_k)|`
    pub value: f64,
    /// Largest gap between the surrogate's slope at `x_k` (analytic and by
    /// central differences) and the gradient of `f`.
    pub gradient: f64,
    /// Smallest Hessian eigenvalue minus `tau / 2`.
    pub curvature_margin: f64,
}

pub fn surrogate_contract(points: usize, seed: u64, tau: f64) -> Result<SurrogateErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SurrogateErrors {
        value: 0.0,
        gradient: 0.0,
        curvature_margin: f64::INFINITY,
    };
    for k in 0..points {
        let family = Family::ALL[k % 3];
        let (pr, beta_in, beta_out) = random_problem(&mut rng, family)?;
        let x = random_feasible(&mut rng, pr.shape().0, &beta_in, &beta_out);
        let s = pr.build_surrogate(&x, tau)?;
        let f = pr.objective(&x)?;
        let g = pr.gradient(&x)?;
        let fd = oracle::central_gradient(|y| s.value_at(y).unwrap_or(f64::NAN), &x, 1e-5);
        out.value = out.value.max((s.value_at(&x)? - f).abs());
        out.gradient = out.gradient.max((&fd - &g).amax()).max((s.gradient_at(&x) - &g).amax());
        out.curvature_margin = out.curvature_margin.min(min_eigenvalue(&s.hessian()) - tau / 2.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpErrors {
    /// Largest of the primal, dual and gap residuals reported by the solver.
    pub kkt: f64,
    /// Largest `|x - x_oracle|_inf`.
    pub oracle: f64,
    /// Smallest direct slack of the recovered beamformers.
    pub min_slack: f64,
    pub non_optimal: usize,
}

/// Random strongly convex QPs over `[vec V; vec S]` with compiled intensity
/// constraints, checked against dual coordinate descent.
pub fn qp_suite(count: usize, seed: u64) -> Result<QpErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = QpErrors {
        kkt: 0.0,
        oracle: 0.0,
        min_slack: f64::INFINITY,
        non_optimal: 0,
    };
    for _ in 0..count {
        let rows = rng.gen_range(1..=3);
        let cols = rng.gen_range(1..=3);
        let beta_in = DVector::from_fn(rows, |_, _| rng.gen_range(-0.3..0.3));
        let (block, beta_out) = if rows == cols && rng.gen_bool(0.5) {
            (compile_full_constraints(&beta_in), beta_in.clone())
        } else {
            let beta_out = DVector::from_fn(cols, |_, _| rng.gen_range(-0.3..0.3));
            (compile_sub_constraints(&beta_in, &beta_out), beta_out)
        };
        let n = block.layout.n_vars();
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let p = m.transpose() * &m / n as f64 + DMatrix::identity(n, n) * rng.gen_range(0.05..1.0);
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let expected = oracle::dual_coordinate_qp(&p, &q, &block.g, &block.h, &DMatrix::zeros(0, n), &DVector::zeros(0), 200_000);
        let qp = QPProblem::new(p, q, 0.0).with_inequalities(block.g.clone(), block.h.clone());
        let sol = solve_qp(&qp, DEFAULT_QP_TOL, DEFAULT_QP_MAX_ITERS)?;
        if sol.status != QPStatus::Optimal {
            out.non_optimal += 1;
        }
        out.kkt = out.kkt.max(sol.primal_residual).max(sol.dual_residual).max(sol.duality_gap);
        out.oracle = out.oracle.max((&sol.x - &expected).amax());
        out.min_slack = out.min_slack.min(l1_affine_slack(&block.layout.beamformer(&sol.x), &beta_in, &beta_out));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatopsErrors {
    /// `K vec(X) - vec(X^T)` over every shape up to 5x5.
    pub commutation: f64,
    /// `nearest_psd(nearest_psd(G)) - nearest_psd(G)`, relative.
    pub psd_idempotence: f64,
    /// Smallest eigenvalue seen after projection.
    pub psd_min_eigenvalue: f64,
    /// `(A⊗B)(C⊗D) - (AC)⊗(BD)`, relative.
    pub kron_mixed_product: f64,
}

pub fn matops_suite(seed: u64) -> Result<MatopsErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let mut out = MatopsErrors {
        commutation: 0.0,
        psd_idempotence: 0.0,
        psd_min_eigenvalue: f64::INFINITY,
        kron_mixed_product: 0.0,
    };
    for m in 1..=5 {
        for n in 1..=5 {
            let x = rand_mat(m, n);
            let k = CommutationMatrix::new(m, n);
            let target = vec(&x.transpose());
            out.commutation = out
                .commutation
                .max((k.apply(&vec(&x)) - &target).amax())
                .max((k.to_dense() * vec(&x) - &target).amax());
        }
    }
    for size in 1..=6 {
        for _ in 0..5 {
            let a = rand_mat(size, size);
            let g = (&a + a.transpose()) * 2.0;
            let once = nearest_psd(&g)?;
            let twice = nearest_psd(&once)?;
            out.psd_idempotence = out.psd_idempotence.max((&twice - &once).amax() / once.amax().max(1.0));
            out.psd_min_eigenvalue = out.psd_min_eigenvalue.min(min_eigenvalue(&once));
        }
    }
    for _ in 0..20 {
        let (p, q, r, s, t, u) = (1 + rng.gen_range(0..3), 1 + rng.gen_range(0..3), 1 + rng.gen_range(0..3), 1 + rng.gen_range(0..3), 1 + rng.gen_range(0..3), 1 + rng.gen_range(0..3));
        let mut rand_mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let (a, b, c, d) = (rand_mat(p, q), rand_mat(r, s), rand_mat(q, t), rand_mat(s, u));
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        out.kron_mixed_product = out.kron_mixed_product.max((&lhs - &rhs).amax() / rhs.amax().max(1.0));
    }
    Ok(out)
}
