//! Slow, independent reference computations.
//!
//! Each function here re-derives a quantity along a different numerical path
//! from the production code (direct formulas instead of series, quadrature
//! instead of closed forms, eigenvalues instead of Cholesky, finite
//! differences instead of analytic gradients, coordinate-wise dual ascent
//! instead of operator splitting). They back the unit tests, the acceptance
//! suite and the `validate` command.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `g(mu) = 1/mu - 1/(e^mu - 1)` evaluated directly (undefined at zero).
pub fn mean_of_mu(mu: f64) -> f64 {
    1.0 / mu - 1.0 / mu.exp_m1()
}

/// Bisection on the direct formula over `[-400, 400]`.
pub fn bisect_mu(alpha: f64) -> f64 {
    if alpha == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = if alpha < 0.5 { (1e-9, 400.0) } else { (-400.0, -1e-9) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of_mu(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

const QUAD_PANELS: usize = 40_000;

/// Truncated-exponential density on `[-A, A]`, normalized by quadrature.
fn pdf(amplitude: f64, alpha: f64) -> impl Fn(f64) -> f64 {
    let mu = bisect_mu(alpha);
    let shape = move |x: f64| (-mu * (x + amplitude) / (2.0 * amplitude)).exp();
    let z = simpson(shape, -amplitude, amplitude, QUAD_PANELS);
    move |x| shape(x) / z
}

/// `e^{2h} / (2 pi e)` with the differential entropy `h` integrated numerically.
pub fn entropy_power_by_quadrature(amplitude: f64, alpha: f64) -> f64 {
    let f = pdf(amplitude, alpha);
    let h = simpson(
        |x| {
            let y = f(x);
            if y > 0.0 {
                -y * y.ln()
            } else {
                0.0
            }
        },
        -amplitude,
        amplitude,
        QUAD_PANELS,
    );
    (2.0 * h).exp() / (2.0 * PI * E)
}

pub fn variance_by_quadrature(amplitude: f64, alpha: f64) -> f64 {
    let f = pdf(amplitude, alpha);
    let m1 = simpson(|x| x * f(x), -amplitude, amplitude, QUAD_PANELS);
    let m2 = simpson(|x| x * x * f(x), -amplitude, amplitude, QUAD_PANELS);
    m2 - m1 * m1
}

/// Mean of the quadrature density, normalized to `(E + A) / (2A)`.
pub fn normalized_mean_by_quadrature(amplitude: f64, alpha: f64) -> f64 {
    let f = pdf(amplitude, alpha);
    let m1 = simpson(|x| x * f(x), -amplitude, amplitude, QUAD_PANELS);
    (m1 + amplitude) / (2.0 * amplitude)
}

pub fn naive_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

pub fn naive_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = b.shape();
    DMatrix::from_fn(a.nrows() * p, a.ncols() * q, |r, c| a[(r / p, c / q)] * b[(r % p, c % q)])
}

/// Dense commutation matrix built entry by entry from its defining action.
pub fn naive_commutation(m: usize, n: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            // X[i, j] sits at i + j m in vec(X) and at j + i n in vec(X^T)
            k[(j + i * n, i + j * m)] = 1.0;
        }
    }
    k
}

/// Column slicing and products written out with explicit loops.
pub fn naive_sub_channel(
    hb: &DMatrix<f64>,
    he: &DMatrix<f64>,
    selected: &[usize],
    complement: &[usize],
    b: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let build = |h: &DMatrix<f64>| {
        DMatrix::from_fn(h.nrows(), selected.len(), |r, c| {
            let mut s = h[(r, selected[c])];
            for (k, &col) in complement.iter().enumerate() {
                s += h[(r, col)] * b[(c, k)];
            }
            s
        })
    };
    (build(hb), build(he))
}

fn log_det_eigen(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().map(|l| l.ln()).sum()
}

fn diag_gram(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    naive_matmul(&naive_matmul(a, &DMatrix::from_diagonal(d)), &a.transpose())
}

/// Case I rate in nats from eigenvalue log-determinants.
pub fn rate_case1_eigen(hb: &DMatrix<f64>, he: &DMatrix<f64>, p: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let nb = hb.nrows() as f64;
    let bob = 0.5 * nb * (1.0 + (log_det_eigen(&diag_gram(hb, p)) / nb).exp()).ln();
    let eve = 0.5 * log_det_eigen(&(diag_gram(he, v) + DMatrix::identity(he.nrows(), he.nrows())));
    bob - eve
}

/// Case II rate in nats; Eve's non-symmetric determinant is taken from the
/// eigenvalues of the general matrix `D_v He^T He + I`.
pub fn rate_case2_eigen(hb: &DMatrix<f64>, he: &DMatrix<f64>, p: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let nt = hb.ncols();
    let ntf = nt as f64;
    let q = naive_matmul(&hb.transpose(), hb);
    let ld = p.iter().map(|x| x.ln()).sum::<f64>() + log_det_eigen(&q);
    let bob = 0.5 * ntf * (1.0 + (ld / ntf).exp()).ln();
    let x = DMatrix::from_diagonal(v) * naive_matmul(&he.transpose(), he) + DMatrix::identity(nt, nt);
    let eig = x.complex_eigenvalues();
    let eve = 0.5 * eig.iter().map(|z| z.norm().ln()).sum::<f64>();
    bob - eve
}

/// Central finite-difference gradient with per-entry step `rel * (1 + |x|)`.
pub fn central_gradient(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let h = rel * (1.0 + x[(i, j)].abs());
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Finite-difference Jacobian of a matrix-valued gradient map, in `vec`
/// coordinates.
pub fn central_jacobian(grad: impl Fn(&DMatrix<f64>) -> DMatrix<f64>, x: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for k in 0..n {
        let h = rel * (1.0 + x[k].abs());
        let orig = probe[k];
        probe[k] = orig + h;
        let up = grad(&probe);
        probe[k] = orig - h;
        let down = grad(&probe);
        probe[k] = orig;
        for r in 0..n {
            jac[(r, k)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    jac
}

/// Projected gradient for `min 1/2 x^T P x + q^T x` over the box `[lo, hi]`.
pub fn projected_gradient_box(p: &DMatrix<f64>, q: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, iters: usize) -> DVector<f64> {
    let lipschitz = SymmetricEigen::new(p.clone()).eigenvalues.max();
    let step = 1.0 / lipschitz;
    let mut x = DVector::zeros(q.len());
    for _ in 0..iters {
        let g = p * &x + q;
        let next = (&x - g * step).zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h));
        let moved = (&next - &x).amax();
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

/// Reference solver for `min 1/2 x^T P x + q^T x` s.t. `G x <= h`, `A x = b`
/// with `P` positive definite: projected coordinate descent on the dual
/// (multipliers of inequalities clipped at zero, equality multipliers free),
/// then `x = -P^{-1} (q + G^T z + A^T y)`.
pub fn dual_coordinate_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    max_sweeps: usize,
) -> DVector<f64> {
    let mi = g.nrows();
    let me = a.nrows();
    let n = q.len();
    let mut c = DMatrix::zeros(mi + me, n);
    if mi > 0 {
        c.rows_mut(0, mi).copy_from(g);
    }
    if me > 0 {
        c.rows_mut(mi, me).copy_from(a);
    }
    let mut rhs = DVector::zeros(mi + me);
    rhs.rows_mut(0, mi).copy_from(h);
    rhs.rows_mut(mi, me).copy_from(b);

    let p_inv = p.clone().cholesky().expect("oracle needs P positive definite").inverse();
    let m = &c * &p_inv * c.transpose();
    let lin = &rhs + &c * (&p_inv * q);
    let mut lam: DVector<f64> = DVector::zeros(mi + me);
    let mut grad: DVector<f64> = lin.clone();
    for _ in 0..max_sweeps {
        let mut biggest = 0.0f64;
        for i in 0..mi + me {
            let mii = m[(i, i)];
            if mii <= 1e-300 {
                continue;
            }
            let mut next = lam[i] - grad[i] / mii;
            if i < mi {
                next = next.max(0.0);
            }
            let delta = next - lam[i];
            if delta != 0.0 {
                lam[i] = next;
                grad.axpy(delta, &m.column(i), 1.0);
                biggest = biggest.max(delta.abs());
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    -(&p_inv * (q + c.transpose() * lam))
}

/// Unconstrained minimizer of `||He_Ic B^T + He_I||_F` via normal equations.
pub fn mlse_normal_equations(he_i: &DMatrix<f64>, he_ic: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = naive_matmul(&he_ic.transpose(), he_ic);
    let rhs = -naive_matmul(&he_ic.transpose(), he_i);
    let bt = gram.lu().solve(&rhs).expect("He_Ic must have full column rank");
    bt.transpose()
}

/// Size-`k` column subsets whose square submatrix has a nonzero LU
/// determinant, as 0-based sorted index lists in lexicographic order.
pub fn nonsingular_subsets(hb: &DMatrix<f64>, tol: f64) -> Vec<Vec<usize>> {
    let (k, n) = hb.shape();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(start: usize, n: usize, k: usize, hb: &DMatrix<f64>, tol: f64, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            let sub = DMatrix::from_fn(k, k, |i, j| hb[(i, current[j])]);
            if sub.determinant().abs() > tol {
                out.push(current.clone());
            }
            return;
        }
        for i in start..n {
            current.push(i);
            recurse(i + 1, n, k, hb, tol, current, out);
            current.pop();
        }
    }
    recurse(0, n, k, hb, tol, &mut current, &mut out);
    out
}
