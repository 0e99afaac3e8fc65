//! Objective split `f = f_B + f_E`, analytic gradients, Kronecker-structured
//! Bob Hessians and the strongly convex SCA surrogates built from them.
//!
//! The optimization variable is `W` (`nT x nT`) for the fully-connected
//! problems and `B` (`nB x (nT - nB)`) for the sub-connected ones. Surrogates
//! are quadratic in `x = vec(variable)` (column-major).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::intensity::IntensityProfile;
use crate::matops::{kron, nearest_psd, vec, CommutationMatrix};
use crate::rates::{
    bob_term_case1, bob_term_case2, eve_term_case1, eve_term_case2, log_det_spd, numerical_rank, select_columns,
    ChannelCase, IndexSet, SecrecyRate, WiretapChannel,
};

/// Default proximal weight.
pub const DEFAULT_TAU: f64 = 1e-5;

/// Diagonal jitter used when a Gram matrix fails to factor.
const GRAM_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Fully-connected beamformer in Case I.
    FullCaseI,
    /// Sub-connected beamformer in Case I with a fixed index set.
    SubCaseI(IndexSet),
    /// Fully-connected beamformer in Case II.
    FullCaseII,
}

impl ProblemKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemKind::FullCaseI => "full (Case I)",
            ProblemKind::SubCaseI(_) => "sub-connected (Case I)",
            ProblemKind::FullCaseII => "full (Case II)",
        }
    }
}

/// A problem family bound to a channel and an input profile, with the column
/// slices needed by the sub-connected formulas precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    /// Bob channel acted on by the variable (`Hb` or `Hb_I`).
    hb: DMatrix<f64>,
    he: DMatrix<f64>,
    /// Complement columns (sub-connected only; empty otherwise).
    hb_c: DMatrix<f64>,
    he_c: DMatrix<f64>,
    p: DVector<f64>,
    v: DVector<f64>,
    nt: usize,
}

fn scale_rows(d: &DVector<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

fn scale_cols(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse and log-determinant of an SPD matrix; retries once with a small
/// diagonal jitter.
fn spd_inverse(m: &DMatrix<f64>, which: &'static str) -> Result<(DMatrix<f64>, f64)> {
    let m = symmetrize(m);
    let n = m.nrows();
    let attempt = |a: &DMatrix<f64>| -> Option<(DMatrix<f64>, f64)> {
        let ld = log_det_spd(a)?;
        let inv = a.clone().cholesky()?.inverse();
        inv.iter().all(|x| x.is_finite()).then_some((inv, ld))
    };
    if let Some(ok) = attempt(&m) {
        return Ok(ok);
    }
    let scale = m.trace() / n.max(1) as f64;
    let err = Error::RankDeficient {
        which,
        rank: numerical_rank(&m),
        needed: n,
    };
    if !(scale > f64::MIN_POSITIVE) {
        return Err(err);
    }
    let jittered = &m + DMatrix::identity(n, n) * (GRAM_JITTER * scale);
    attempt(&jittered).ok_or(err)
}

/// `r / (1 + r)` with `r = exp(t)`.
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Assembles `K (O^T ⊗ O)` with `K` applied as a row permutation.
fn commuted_kron(k: &CommutationMatrix, o: &DMatrix<f64>) -> DMatrix<f64> {
    k.left_mul(&kron(&o.transpose(), o))
}

impl Problem {
    pub fn new(kind: ProblemKind, channel: &WiretapChannel, profile: &IntensityProfile) -> Result<Self> {
        let nt = channel.nt();
        if profile.len() != nt {
            return Err(Error::Dimension(format!(
                "profile has {} entries but the channel has {nt} transmit apertures",
                profile.len()
            )));
        }
        let expected = match kind {
            ProblemKind::FullCaseII => ChannelCase::CaseII,
            _ => ChannelCase::CaseI,
        };
        if channel.case != expected {
            return Err(match channel.case {
                ChannelCase::Unsupported => Error::UnsupportedCase {
                    nt,
                    nb: channel.nb(),
                    ne: channel.ne(),
                },
                found => Error::CaseMismatch {
                    expected: expected.name(),
                    found: found.name(),
                },
            });
        }
        let empty = || DMatrix::zeros(0, 0);
        match &kind {
            ProblemKind::SubCaseI(set) => {
                if set.nt() != nt || set.selected().len() != channel.nb() {
                    return Err(Error::Dimension(format!(
                        "index set {set} must pick {} of {nt} LEDs",
                        channel.nb()
                    )));
                }
                let hb = select_columns(&channel.hb, set.selected());
                if numerical_rank(&hb) < channel.nb() {
                    return Err(Error::SingularIndexSet(set.to_string()));
                }
                let sub = profile.select(set.selected());
                Ok(Self {
                    hb,
                    he: select_columns(&channel.he, set.selected()),
                    hb_c: select_columns(&channel.hb, set.complement()),
                    he_c: select_columns(&channel.he, set.complement()),
                    p: sub.p,
                    v: sub.v,
                    nt,
                    kind,
                })
            }
            _ => Ok(Self {
                hb: channel.hb.clone(),
                he: channel.he.clone(),
                hb_c: empty(),
                he_c: empty(),
                p: profile.p.clone(),
                v: profile.v.clone(),
                nt,
                kind,
            }),
        }
    }

    /// `(rows, cols)` of the optimization variable.
    pub fn shape(&self) -> (usize, usize) {
        match self.kind {
            ProblemKind::SubCaseI(_) => (self.hb.nrows(), self.hb_c.ncols()),
            _ => (self.nt, self.nt),
        }
    }

    pub fn n_vars(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Starting point: `[[I_nB, 0], [0, 0]]` for Case I, `I_nT` for Case II,
    /// and `B = 0` for the sub-connected scheme.
    pub fn initial_point(&self) -> DMatrix<f64> {
        let (r, c) = self.shape();
        match self.kind {
            ProblemKind::FullCaseI => {
                let mut w = DMatrix::zeros(r, c);
                for i in 0..self.hb.nrows().min(r) {
                    w[(i, i)] = 1.0;
                }
                w
            }
            ProblemKind::FullCaseII => DMatrix::identity(r, c),
            ProblemKind::SubCaseI(_) => DMatrix::zeros(r, c),
        }
    }

    fn check_shape(&self, var: &DMatrix<f64>) -> Result<()> {
        if var.shape() != self.shape() {
            return Err(Error::Dimension(format!(
                "{} variable must be {:?}, got {:?}",
                self.kind.label(),
                self.shape(),
                var.shape()
            )));
        }
        if var.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("beamformer"));
        }
        Ok(())
    }

    /// Equivalent Bob and Eve channels induced by `var`.
    pub fn equivalent_channel(&self, var: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_shape(var)?;
        Ok(match self.kind {
            ProblemKind::SubCaseI(_) => {
                let bt = var.transpose();
                (&self.hb + &self.hb_c * &bt, &self.he + &self.he_c * &bt)
            }
            _ => {
                let wt = var.transpose();
                (&self.hb * &wt, &self.he * &wt)
            }
        })
    }

    pub fn f_b(&self, var: &DMatrix<f64>) -> Result<f64> {
        let (hb_eq, _) = self.equivalent_channel(var)?;
        Ok(match self.kind {
            ProblemKind::FullCaseII => -bob_term_case2(&hb_eq, &self.p),
            _ => -bob_term_case1(&hb_eq, &self.p),
        })
    }

    pub fn f_e(&self, var: &DMatrix<f64>) -> Result<f64> {
        let (_, he_eq) = self.equivalent_channel(var)?;
        match self.kind {
            ProblemKind::FullCaseII => eve_term_case2(&he_eq, &self.v),
            _ => eve_term_case1(&he_eq, &self.v),
        }
    }

    /// `f = -R_s` over the equivalent channel.
    pub fn objective(&self, var: &DMatrix<f64>) -> Result<f64> {
        Ok(self.f_b(var)? + self.f_e(var)?)
    }

    pub fn rate(&self, var: &DMatrix<f64>) -> Result<SecrecyRate> {
        Ok(SecrecyRate::from_raw(-self.objective(var)?))
    }

    /// Bob Gram matrix and the matrix `M` it is built from (`Hb W^T`,
    /// `Hb_I + Hb_Ic B^T`, or `W` for Case II where the Gram is `W Q W^T`).
    fn bob_gram(&self, var: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
        self.check_shape(var)?;
        let gram = match self.kind {
            ProblemKind::FullCaseI => {
                let m = &self.hb * var.transpose();
                scale_cols(&m, &self.p) * m.transpose()
            }
            ProblemKind::SubCaseI(_) => {
                let m = &self.hb + &self.hb_c * var.transpose();
                scale_cols(&m, &self.p) * m.transpose()
            }
            ProblemKind::FullCaseII => var * (self.hb.transpose() * &self.hb) * var.transpose(),
        };
        let (inv, ld) = spd_inverse(&gram, "Bob Gram matrix")?;
        Ok((inv, ld))
    }

    /// Analytic gradient of `f_B` including the determinant-ratio prefactor.
    pub fn grad_fb(&self, var: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (g_inv, ld) = self.bob_gram(var)?;
        Ok(match self.kind {
            ProblemKind::FullCaseI => {
                let s = logistic(ld / self.hb.nrows() as f64);
                // D W Hb^T G^{-1} Hb
                scale_rows(&self.p, &(var * self.hb.transpose() * &g_inv * &self.hb)) * -s
            }
            ProblemKind::SubCaseI(_) => {
                let s = logistic(ld / self.hb.nrows() as f64);
                let m = &self.hb + &self.hb_c * var.transpose();
                // D_I M^T G^{-1} Hb_Ic
                scale_rows(&self.p, &(m.transpose() * &g_inv * &self.hb_c)) * -s
            }
            ProblemKind::FullCaseII => {
                let n = self.nt as f64;
                let s = logistic((ld + self.p.iter().map(|x| x.ln()).sum::<f64>()) / n);
                // S^{-1} W Q
                &g_inv * var * (self.hb.transpose() * &self.hb) * -s
            }
        })
    }

    /// Eve's log-det anchor `X` at `var` together with its inverse.
    fn eve_anchor(&self, var: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (_, he_eq) = self.equivalent_channel(var)?;
        let x = match self.kind {
            ProblemKind::FullCaseII => {
                DMatrix::from_diagonal(&self.v) * he_eq.transpose() * &he_eq + DMatrix::identity(self.nt, self.nt)
            }
            _ => {
                let n = he_eq.nrows();
                scale_cols(&he_eq, &self.v) * he_eq.transpose() + DMatrix::identity(n, n)
            }
        };
        let inv = match self.kind {
            ProblemKind::FullCaseII => x.clone().lu().try_inverse().ok_or(Error::NonFinite("Eve covariance"))?,
            _ => spd_inverse(&x, "Eve covariance")?.0,
        };
        Ok((x, inv))
    }

    /// `X^{-1} D_v = (W Qe W^T + D_v^{-1})^{-1}` for Case II, symmetric by construction.
    fn case2_eve_weight(&self, var: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let qe = self.he.transpose() * &self.he;
        let m = var * qe * var.transpose() + DMatrix::from_diagonal(&self.v.map(|x| 1.0 / x));
        Ok(spd_inverse(&m, "Eve covariance")?.0)
    }

    pub fn grad_fe(&self, var: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(var)?;
        Ok(match self.kind {
            ProblemKind::FullCaseI => {
                let (_, x_inv) = self.eve_anchor(var)?;
                scale_rows(&self.v, &(var * self.he.transpose() * x_inv * &self.he))
            }
            ProblemKind::SubCaseI(_) => {
                let (_, x_inv) = self.eve_anchor(var)?;
                let n = &self.he + &self.he_c * var.transpose();
                scale_rows(&self.v, &(n.transpose() * x_inv * &self.he_c))
            }
            ProblemKind::FullCaseII => self.case2_eve_weight(var)? * var * (self.he.transpose() * &self.he),
        })
    }

    pub fn gradient(&self, var: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.grad_fb(var)? + self.grad_fe(var)?)
    }

    /// Bob Hessian assembled from the printed Kronecker expressions (no
    /// determinant-ratio prefactor), in `vec` coordinates and unprojected.
    pub fn hessian_fb(&self, var: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (g_inv, _) = self.bob_gram(var)?;
        Ok(match self.kind {
            ProblemKind::FullCaseI => {
                let d = DMatrix::from_diagonal(&self.p);
                let u1 = self.hb.transpose() * &g_inv * &self.hb;
                let v1 = &d * var * &u1 * var.transpose() * &d;
                let o1 = &u1 * var.transpose() * &d;
                let k = CommutationMatrix::new(self.nt, self.nt);
                kron(&u1, &v1) + commuted_kron(&k, &o1) - kron(&u1, &d)
            }
            ProblemKind::SubCaseI(_) => {
                let d = DMatrix::from_diagonal(&self.p);
                let m = &self.hb + &self.hb_c * var.transpose();
                let u3 = self.hb_c.transpose() * &g_inv * &self.hb_c;
                let v3 = &d * m.transpose() * &g_inv * &m * &d;
                let o2 = self.hb_c.transpose() * &g_inv * &m * &d;
                let k = CommutationMatrix::new(self.hb_c.ncols(), self.hb.nrows());
                kron(&u3, &v3) + commuted_kron(&k, &o2) - kron(&u3, &d)
            }
            ProblemKind::FullCaseII => {
                let q = self.hb.transpose() * &self.hb;
                let o3 = &q * var.transpose() * &g_inv;
                let u6 = &o3 * var * &q;
                let k = CommutationMatrix::new(self.nt, self.nt);
                -kron(&q, &g_inv) + commuted_kron(&k, &o3) + kron(&u6, &g_inv)
            }
        })
    }

    /// Hessian of Eve's linearized log-det term, constant in the variable.
    fn eve_quadratic(&self, point: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(match self.kind {
            ProblemKind::FullCaseI => {
                let (_, x_inv) = self.eve_anchor(point)?;
                kron(&symmetrize(&(self.he.transpose() * x_inv * &self.he)), &DMatrix::from_diagonal(&self.v))
            }
            ProblemKind::SubCaseI(_) => {
                let (_, x_inv) = self.eve_anchor(point)?;
                kron(
                    &symmetrize(&(self.he_c.transpose() * x_inv * &self.he_c)),
                    &DMatrix::from_diagonal(&self.v),
                )
            }
            ProblemKind::FullCaseII => {
                let qe = self.he.transpose() * &self.he;
                kron(&symmetrize(&qe), &symmetrize(&self.case2_eve_weight(point)?))
            }
        })
    }

    pub fn build_surrogate(&self, point: &DMatrix<f64>, tau: f64) -> Result<SurrogateModel> {
        if !(tau > 0.0) {
            return Err(Error::Tolerance(tau));
        }
        let f_b = self.f_b(point)?;
        let f_e = self.f_e(point)?;
        let grad_b = self.grad_fb(point)?;
        let grad_e = self.grad_fe(point)?;
        let hess_b = nearest_psd(&self.hessian_fb(point)?)?;
        let hess_e = self.eve_quadratic(point)?;
        let (anchor, anchor_inv) = self.eve_anchor(point)?;
        Ok(SurrogateModel {
            problem: self.clone(),
            point: point.clone(),
            f_b,
            f_e,
            grad_b,
            grad_e,
            hess_b,
            hess_e,
            anchor,
            anchor_inv,
            tau,
        })
    }
}

/// Strongly convex model of `f` around an expansion point:
///
/// `f_B(x_k) + g_B^T d + d^T Ĝ d / 2 + (tau/4) |d|^2`
/// `+ (1/2) ln|X_k| + (1/2) tr(X_k^{-1} X(x)) - n/2 + (tau/4) |d|^2`
///
/// with `d = x - x_k`, `Ĝ` the PSD projection of the Bob Hessian and `X` Eve's
/// covariance-plus-identity matrix.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    problem: Problem,
    pub point: DMatrix<f64>,
    pub f_b: f64,
    pub f_e: f64,
    pub grad_b: DMatrix<f64>,
    pub grad_e: DMatrix<f64>,
    /// Projected Bob Hessian `Ĝ`.
    pub hess_b: DMatrix<f64>,
    /// Hessian of the linearized Eve term.
    pub hess_e: DMatrix<f64>,
    /// Eve anchor `X_k` and its inverse.
    pub anchor: DMatrix<f64>,
    pub anchor_inv: DMatrix<f64>,
    pub tau: f64,
}

impl SurrogateModel {
    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// `f(x_k)`.
    pub fn value(&self) -> f64 {
        self.f_b + self.f_e
    }

    pub fn gradient(&self) -> DMatrix<f64> {
        &self.grad_b + &self.grad_e
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.hess_b.nrows();
        &self.hess_b + &self.hess_e + DMatrix::identity(n, n) * self.tau
    }

    fn bob_at(&self, var: &DMatrix<f64>) -> f64 {
        let d = vec(&(var - &self.point));
        self.f_b + vec(&self.grad_b).dot(&d) + 0.5 * d.dot(&(&self.hess_b * &d)) + 0.25 * self.tau * d.norm_squared()
    }

    /// Eve half evaluated literally from the frozen anchor.
    pub fn eve_at(&self, var: &DMatrix<f64>) -> Result<f64> {
        let x = self.problem.eve_anchor(var)?.0;
        let n = x.nrows() as f64;
        let ld = 2.0 * self.f_e;
        let d = var - &self.point;
        Ok(0.5 * ld + 0.5 * (&self.anchor_inv * x).trace() - 0.5 * n + 0.25 * self.tau * d.norm_squared())
    }

    pub fn value_at(&self, var: &DMatrix<f64>) -> Result<f64> {
        Ok(self.bob_at(var) + self.eve_at(var)?)
    }

    /// Surrogate gradient at `var` from the quadratic form.
    pub fn gradient_at(&self, var: &DMatrix<f64>) -> DMatrix<f64> {
        let (r, c) = var.shape();
        let d = vec(&(var - &self.point));
        let g = vec(&self.gradient()) + self.hessian() * d;
        DMatrix::from_column_slice(r, c, g.as_slice())
    }

    /// `(P, q, r)` with surrogate `= x^T P x / 2 + q^T x + r` in `x = vec(variable)`.
    pub fn qp_objective(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let h = self.hessian();
        let h = symmetrize(&h);
        let xk = vec(&self.point);
        let g = vec(&self.gradient());
        let hx = &h * &xk;
        let q = &g - &hx;
        let r = self.value() - g.dot(&xk) + 0.5 * xk.dot(&hx);
        (h, q, r)
    }
}

pub fn objective(kind: &ProblemKind, var: &DMatrix<f64>, channel: &WiretapChannel, profile: &IntensityProfile) -> Result<f64> {
    Problem::new(kind.clone(), channel, profile)?.objective(var)
}

pub fn grad_fb(kind: &ProblemKind, var: &DMatrix<f64>, channel: &WiretapChannel, profile: &IntensityProfile) -> Result<DMatrix<f64>> {
    Problem::new(kind.clone(), channel, profile)?.grad_fb(var)
}

pub fn hessian_fb(kind: &ProblemKind, var: &DMatrix<f64>, channel: &WiretapChannel, profile: &IntensityProfile) -> Result<DMatrix<f64>> {
    Problem::new(kind.clone(), channel, profile)?.hessian_fb(var)
}

pub fn build_surrogate(
    kind: &ProblemKind,
    point: &DMatrix<f64>,
    channel: &WiretapChannel,
    profile: &IntensityProfile,
    tau: f64,
) -> Result<SurrogateModel> {
    Problem::new(kind.clone(), channel, profile)?.build_surrogate(point, tau)
}
