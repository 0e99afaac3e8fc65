//! Equality presolve, operator splitting with active-set polishing, and a
//! primal-dual interior-point fallback.

use nalgebra::{DMatrix, DVector};

use super::{QPMethod, QPProblem, QPSolution, QPStatus};
use crate::error::{Error, Result};
use crate::matops::{min_eigenvalue, nearest_psd};

const SIGMA: f64 = 1e-6;
const RELAXATION: f64 = 1.6;
const RHO_INIT: f64 = 0.1;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const CHECK_EVERY: usize = 25;
const STALL_WINDOW: usize = 500;
const INFEASIBLE_TOL: f64 = 1e-6;
const IPM_MAX_ITERS: usize = 200;
const POLISH_REFINE: usize = 12;

/// Inequality-only problem `min z^T P z / 2 + q^T z` s.t. `G z <= h`.
struct Reduced {
    p: DMatrix<f64>,
    q: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

struct Candidate {
    z: DVector<f64>,
    lambda: DVector<f64>,
    method: QPMethod,
    iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Kkt {
    primal: f64,
    dual: f64,
    gap: f64,
}

impl Kkt {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }

    fn meets(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

fn kkt(rq: &Reduced, z: &DVector<f64>, lambda: &DVector<f64>) -> Kkt {
    let pz = &rq.p * z;
    let gl = rq.g.transpose() * lambda;
    let stat = &pz + &rq.q + &gl;
    let scale = 1f64.max(amax(&pz)).max(amax(&rq.q)).max(amax(&gl));
    let slack = &rq.h - &rq.g * z;
    let primal = slack.iter().fold(0.0f64, |m, &s| m.max(-s));
    let obj = 0.5 * z.dot(&pz) + rq.q.dot(z);
    let gap = lambda.dot(&slack).abs() / (1.0 + obj.abs());
    Kkt {
        primal,
        dual: amax(&stat) / scale,
        gap,
    }
}

/// `z` solving the equality-constrained KKT system on `active`, with
/// multipliers, via regularized LU and iterative refinement.
fn polish(rq: &Reduced, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = rq.q.len();
    let k = active.len();
    let scale = rq.p.amax().max(1.0);
    let delta = 1e-10 * scale;
    let mut exact = DMatrix::zeros(n + k, n + k);
    exact.view_mut((0, 0), (n, n)).copy_from(&rq.p);
    for (r, &i) in active.iter().enumerate() {
        for c in 0..n {
            exact[(n + r, c)] = rq.g[(i, c)];
            exact[(c, n + r)] = rq.g[(i, c)];
        }
    }
    let mut reg = exact.clone();
    for d in 0..n {
        reg[(d, d)] += delta;
    }
    for d in n..n + k {
        reg[(d, d)] -= delta;
    }
    let lu = reg.lu();
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&rq.q));
    for (r, &i) in active.iter().enumerate() {
        rhs[n + r] = rq.h[i];
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..POLISH_REFINE {
        let res = &rhs - &exact * &sol;
        if res.amax() < 1e-15 * (1.0 + rhs.amax()) {
            break;
        }
        sol += lu.solve(&res)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let z = sol.rows(0, n).into_owned();
    let mut lambda = DVector::zeros(rq.h.len());
    for (r, &i) in active.iter().enumerate() {
        lambda[i] = sol[n + r].max(0.0);
    }
    Some((z, lambda))
}

enum AdmmOutcome {
    Converged(Candidate),
    Infeasible(usize),
    Stalled(Candidate),
}

fn admm(rq: &Reduced, tol: f64, max_iters: usize) -> AdmmOutcome {
    let n = rq.q.len();
    let m = rq.h.len();
    let gt = rq.g.transpose();
    let gtg = &gt * &rq.g;
    let mut rho = RHO_INIT;
    let factor = |rho: f64| {
        let k = &rq.p + DMatrix::identity(n, n) * SIGMA + &gtg * rho;
        k.cholesky()
    };
    let mut chol = match factor(rho) {
        Some(c) => c,
        None => {
            return AdmmOutcome::Stalled(Candidate {
                z: DVector::zeros(n),
                lambda: DVector::zeros(m),
                method: QPMethod::Splitting,
                iterations: 0,
            })
        }
    };
    let mut x = DVector::zeros(n);
    let mut w = (&rq.g * &x).zip_map(&rq.h, |a: f64, b: f64| a.min(b));
    let mut y: DVector<f64> = DVector::zeros(m);
    let mut last_active: Option<Vec<usize>> = None;
    let mut best: Option<(Kkt, Candidate)> = None;
    let mut stall_ref = f64::INFINITY;
    let mut stall_since = 0;

    for it in 1..=max_iters {
        let rhs = &x * SIGMA - &rq.q + &gt * (&w * rho - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &rq.g * &x_tilde;
        let x_new = &x_tilde * RELAXATION + &x * (1.0 - RELAXATION);
        let z_relaxed = &z_tilde * RELAXATION + &w * (1.0 - RELAXATION);
        let w_new = (&z_relaxed + &y / rho).zip_map(&rq.h, |a: f64, b: f64| a.min(b));
        let y_prev = y.clone();
        y += (&z_relaxed - &w_new) * rho;
        x = x_new;
        w = w_new;

        if it % CHECK_EVERY != 0 && it != max_iters {
            continue;
        }

        let delta_y = &y - &y_prev;
        let dy = amax(&delta_y);
        if dy > 1e-12 {
            // One-sided rows: a certificate must also be (nearly) nonnegative.
            let gt_dy = amax(&(&gt * &delta_y));
            let h_dy = rq.h.dot(&delta_y);
            let nonneg = delta_y.min() >= -INFEASIBLE_TOL * dy;
            if nonneg && gt_dy <= INFEASIBLE_TOL * dy && h_dy < -INFEASIBLE_TOL * dy {
                return AdmmOutcome::Infeasible(it);
            }
        }

        let lambda = y.map(|v| v.max(0.0));
        let here = kkt(rq, &x, &lambda);
        let mut consider = |c: Candidate, k: Kkt| {
            if best.as_ref().is_none_or(|(b, _)| k.worst() < b.worst()) {
                best = Some((k, c));
            }
        };
        consider(
            Candidate {
                z: x.clone(),
                lambda: lambda.clone(),
                method: QPMethod::Splitting,
                iterations: it,
            },
            here,
        );

        let active: Vec<usize> = (0..m).filter(|&i| y[i] > rq.h[i] - w[i]).collect();
        if last_active.as_ref() != Some(&active) {
            if let Some((pz, pl)) = polish(rq, &active) {
                let k = kkt(rq, &pz, &pl);
                consider(
                    Candidate {
                        z: pz,
                        lambda: pl,
                        method: QPMethod::Polished,
                        iterations: it,
                    },
                    k,
                );
            }
            last_active = Some(active);
        }
        if let Some((k, _)) = &best {
            if k.meets(tol) {
                let (_, c) = best.take().unwrap();
                return AdmmOutcome::Converged(c);
            }
        }

        let dual_now = here.dual;
        if dual_now < 0.99 * stall_ref {
            stall_ref = dual_now;
            stall_since = it;
        } else if it - stall_since >= STALL_WINDOW {
            break;
        }

        // Rebalance the penalty between primal and dual progress.
        let gx = &rq.g * &x;
        let prim_rel = amax(&(&gx - &w)) / amax(&gx).max(amax(&w)).max(1e-30);
        let px = &rq.p * &x;
        let gty = &gt * &y;
        let dual_abs = amax(&(&px + &rq.q + &gty));
        let dual_rel = dual_abs / amax(&px).max(amax(&gty)).max(amax(&rq.q)).max(1e-30);
        if prim_rel > 0.0 && dual_rel > 0.0 {
            let ratio = (prim_rel / dual_rel).sqrt();
            if !(0.2..=5.0).contains(&ratio) {
                let next = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if next != rho {
                    if let Some(c) = factor(next) {
                        rho = next;
                        chol = c;
                    }
                }
            }
        }
    }
    let candidate = best.map(|(_, c)| c).unwrap_or(Candidate {
        z: x,
        lambda: y.map(|v| v.max(0.0)),
        method: QPMethod::Splitting,
        iterations: max_iters,
    });
    AdmmOutcome::Stalled(candidate)
}

fn solve_spd_or_lu(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c.solve(rhs));
    }
    let n = m.nrows();
    let ridge = 1e-14 * (1.0 + m.trace().abs() / n.max(1) as f64);
    let shifted = m + DMatrix::identity(n, n) * ridge;
    if let Some(c) = shifted.clone().cholesky() {
        return Some(c.solve(rhs));
    }
    shifted.lu().solve(rhs)
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .fold(1.0f64, |a, (&x, &d)| a.min(-x / d))
}

enum IpmOutcome {
    Done(Candidate),
    Infeasible(usize),
}

/// Mehrotra predictor-corrector on `P z + q + G^T l = 0`, `G z + s = h`, `s, l >= 0`.
fn interior_point(rq: &Reduced, tol: f64, start: &DVector<f64>) -> IpmOutcome {
    let m = rq.h.len();
    let gt = rq.g.transpose();
    let mut z = start.clone();
    let mut s = (&rq.h - &rq.g * &z).map(|v| v.max(1.0));
    let mut l = DVector::from_element(m, 1.0);
    let mut best: Option<(Kkt, Candidate)> = None;
    let h_scale = 1.0 + amax(&rq.h);

    for it in 1..=IPM_MAX_ITERS {
        let rd = &rq.p * &z + &rq.q + &gt * &l;
        let rp = &rq.g * &z + &s - &rq.h;
        let mu = s.dot(&l) / m as f64;

        let cand_l = l.clone();
        let k = kkt(rq, &z, &cand_l);
        if best.as_ref().is_none_or(|(b, _)| k.worst() < b.worst()) {
            best = Some((
                k,
                Candidate {
                    z: z.clone(),
                    lambda: cand_l,
                    method: QPMethod::InteriorPoint,
                    iterations: it,
                },
            ));
        }
        if k.meets(tol * 0.1) && amax(&rp) <= tol * 0.1 * h_scale {
            break;
        }
        if amax(&l) > 1e12 && amax(&rp) > tol * h_scale {
            return IpmOutcome::Infeasible(it);
        }

        let weight = l.component_div(&s);
        let mut mat = rq.p.clone();
        mat += &gt * DMatrix::from_diagonal(&weight) * &rq.g;

        let direction = |rc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            let rc_over_s = rc.component_div(&s);
            let rhs = -&rd - &gt * (weight.component_mul(&rp) - &rc_over_s);
            let dz = solve_spd_or_lu(&mat, &rhs)?;
            let dl = weight.component_mul(&(&rq.g * &dz + &rp)) - &rc_over_s;
            let ds = -(rc + s.component_mul(&dl)).component_div(&l);
            Some((dz, dl, ds))
        };

        let rc_aff = s.component_mul(&l);
        let Some((_, dl_a, ds_a)) = direction(&rc_aff) else { break };
        let a_aff = max_step(&s, &ds_a).min(max_step(&l, &dl_a));
        let mu_aff = (&s + &ds_a * a_aff).dot(&(&l + &dl_a * a_aff)) / m as f64;
        let centering = (mu_aff / mu).powi(3);
        let rc = &rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, centering * mu);
        let Some((dz, dl, ds)) = direction(&rc) else { break };
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&l, &dl))).min(1.0);
        z += &dz * alpha;
        s += &ds * alpha;
        l += &dl * alpha;
        if !(z.iter().all(|v| v.is_finite()) && s.iter().all(|v| v.is_finite()) && l.iter().all(|v| v.is_finite())) {
            break;
        }
    }

    // Final active-set polish from the interior solution.
    let (k, mut c) = best.expect("at least one interior-point iterate");
    let active: Vec<usize> = (0..m).filter(|&i| c.lambda[i] > rq.h[i] - rq.g.row(i).dot(&c.z.transpose())).collect();
    if let Some((pz, pl)) = polish(rq, &active) {
        let pk = kkt(rq, &pz, &pl);
        if pk.worst() < k.worst() {
            c = Candidate {
                z: pz,
                lambda: pl,
                method: QPMethod::Polished,
                iterations: c.iterations,
            };
        }
    }
    IpmOutcome::Done(c)
}

/// Orthonormal null-space basis of `a` and a particular solution of `a x = b`.
fn presolve(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, f64) {
    let (m, n) = a.shape();
    let mut square = DMatrix::zeros(m.max(n), n);
    square.rows_mut(0, m).copy_from(a);
    let svd = square.svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let u = svd.u.as_ref().expect("requested U");
    let top = svd.singular_values.max();
    let cutoff = 1e-10 * top.max(f64::MIN_POSITIVE);
    let mut x_p: DVector<f64> = DVector::zeros(n);
    let mut padded_b = DVector::zeros(m.max(n));
    padded_b.rows_mut(0, m).copy_from(b);
    let mut null_cols = Vec::new();
    for k in 0..svd.singular_values.len() {
        let sv = svd.singular_values[k];
        if sv > cutoff {
            let coeff = u.column(k).dot(&padded_b) / sv;
            x_p += v_t.row(k).transpose() * coeff;
        } else {
            null_cols.push(k);
        }
    }
    let mut basis = DMatrix::zeros(n, null_cols.len());
    for (c, &k) in null_cols.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    let inconsistency = amax(&(a * &x_p - b));
    (x_p, basis, inconsistency)
}

fn finish(
    problem: &QPProblem,
    p: &DMatrix<f64>,
    x: DVector<f64>,
    lambda: DVector<f64>,
    status: QPStatus,
    method: QPMethod,
    iterations: usize,
    tol: f64,
    reason: Option<String>,
) -> QPSolution {
    let stat = p * &x + &problem.q + problem.g.transpose() * &lambda;
    let nu = if problem.a.nrows() > 0 {
        problem
            .a
            .transpose()
            .svd(true, true)
            .solve(&(-&stat), 1e-12)
            .unwrap_or_else(|_| DVector::zeros(problem.a.nrows()))
    } else {
        DVector::zeros(0)
    };
    let full = &stat + problem.a.transpose() * &nu;
    let px = p * &x;
    let scale = 1f64
        .max(amax(&px))
        .max(amax(&problem.q))
        .max(amax(&(problem.g.transpose() * &lambda)))
        .max(amax(&(problem.a.transpose() * &nu)));
    let objective = problem.objective(&x);
    let slack = &problem.h - &problem.g * &x;
    let primal_residual = problem.primal_residual(&x);
    let dual_residual = amax(&full) / scale;
    let duality_gap = lambda.dot(&slack).abs() / (1.0 + objective.abs());
    let mut status = status;
    let mut reason = reason;
    if status == QPStatus::Optimal && (primal_residual > tol || dual_residual > tol || duality_gap > tol) {
        status = QPStatus::MaxIters;
        reason = Some(format!(
            "KKT residuals {primal_residual:.2e}/{dual_residual:.2e}/{duality_gap:.2e} above tolerance {tol:.1e}"
        ));
    }
    QPSolution {
        x,
        status,
        method,
        primal_residual,
        dual_residual,
        duality_gap,
        objective,
        lambda,
        nu,
        iterations,
        reason,
    }
}

/// Solves a convex QP to KKT tolerance `tol`.
///
/// Equalities are eliminated through an SVD null-space basis; the remaining
/// inequality QP is handled by operator splitting with active-set polishing,
/// and by an interior-point method if splitting stalls.
pub fn solve_qp(problem: &QPProblem, tol: f64, max_iters: usize) -> Result<QPSolution> {
    if !(tol > 0.0) {
        return Err(Error::Tolerance(tol));
    }
    problem.validate()?;
    let n = problem.n_vars();
    let mut p = (&problem.p + problem.p.transpose()) * 0.5;
    if n > 0 && min_eigenvalue(&p) < 0.0 {
        p = nearest_psd(&p)?;
    }
    let m = problem.h.len();

    let (x_p, basis, inconsistency) = if problem.a.nrows() > 0 {
        presolve(&problem.a, &problem.b)
    } else {
        (DVector::zeros(n), DMatrix::identity(n, n), 0.0)
    };
    if inconsistency > 1e-9 * (1.0 + amax(&problem.b)) {
        return Ok(finish(
            problem,
            &p,
            x_p,
            DVector::zeros(m),
            QPStatus::Infeasible,
            QPMethod::Presolve,
            0,
            tol,
            Some(format!("equality constraints are inconsistent (residual {inconsistency:.2e})")),
        ));
    }

    let nz = basis.ncols();
    let g_z = &problem.g * &basis;
    let h_z = &problem.h - &problem.g * &x_p;

    // Row and cost scaling for the iterative phase.
    let row_scale = DVector::from_fn(m, |i, _| {
        let norm = g_z.row(i).norm();
        if norm > 1e-300 {
            1.0 / norm
        } else {
            1.0
        }
    });
    let p_z = basis.transpose() * &p * &basis;
    let q_z = basis.transpose() * (&p * &x_p + &problem.q);
    let cost_scale = 1.0 / p_z.amax().max(q_z.iter().fold(0.0f64, |a, v| a.max(v.abs()))).max(1.0);
    let rq = Reduced {
        p: &p_z * cost_scale,
        q: &q_z * cost_scale,
        g: DMatrix::from_diagonal(&row_scale) * &g_z,
        h: h_z.component_mul(&row_scale),
    };

    let lift = |c: &Candidate| -> (DVector<f64>, DVector<f64>) {
        let x = &x_p + &basis * &c.z;
        let lambda = c.lambda.component_mul(&row_scale) / cost_scale;
        (x, lambda)
    };

    if nz == 0 || m == 0 {
        // Fixed point or no inequalities: a single KKT solve decides.
        let (z, lam) = if nz == 0 {
            (DVector::zeros(0), DVector::zeros(m))
        } else {
            polish(&rq, &[]).unwrap_or((DVector::zeros(nz), DVector::zeros(m)))
        };
        let c = Candidate {
            z,
            lambda: lam,
            method: QPMethod::Polished,
            iterations: 0,
        };
        let (x, lambda) = lift(&c);
        let feasible = problem.primal_residual(&x) <= tol;
        let (status, reason) = if feasible {
            (QPStatus::Optimal, None)
        } else {
            (QPStatus::Infeasible, Some("equality solution violates the inequalities".to_string()))
        };
        return Ok(finish(problem, &p, x, lambda, status, QPMethod::Presolve, 0, tol, reason));
    }

    let inner_tol = tol * 0.1;
    let (candidate, admm_iters) = match admm(&rq, inner_tol, max_iters) {
        AdmmOutcome::Converged(c) => {
            let iters = c.iterations;
            (c, iters)
        }
        AdmmOutcome::Infeasible(it) => {
            return Ok(finish(
                problem,
                &p,
                x_p,
                DVector::zeros(m),
                QPStatus::Infeasible,
                QPMethod::Splitting,
                it,
                tol,
                Some("splitting produced a primal infeasibility certificate".into()),
            ));
        }
        AdmmOutcome::Stalled(c) => {
            let iters = c.iterations;
            match interior_point(&rq, inner_tol, &c.z) {
                IpmOutcome::Done(ipm) => {
                    let better = if kkt(&rq, &ipm.z, &ipm.lambda).worst() <= kkt(&rq, &c.z, &c.lambda).worst() {
                        ipm
                    } else {
                        c
                    };
                    (better, iters)
                }
                IpmOutcome::Infeasible(it) => {
                    return Ok(finish(
                        problem,
                        &p,
                        x_p,
                        DVector::zeros(m),
                        QPStatus::Infeasible,
                        QPMethod::InteriorPoint,
                        iters + it,
                        tol,
                        Some("interior-point multipliers diverged".into()),
                    ));
                }
            }
        }
    };
    let (x, lambda) = lift(&candidate);
    Ok(finish(
        problem,
        &p,
        x,
        lambda,
        QPStatus::Optimal,
        candidate.method,
        admm_iters.max(candidate.iterations),
        tol,
        None,
    ))
}
