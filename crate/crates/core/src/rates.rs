//! Closed-form achievable secrecy rates and beamformer-induced equivalent
//! channels.
//!
//! Case I (`nT >= nB`, `nT >= nE`):
//! `(nB/2) ln(1 + |Hb D_p Hb^T|^{1/nB}) - (1/2) ln|He D_v He^T + I|`.
//!
//! Case II (`nT < nB`, `nT < nE`):
//! `(nT/2) ln(1 + |D_p|^{1/nT} |Hb^T Hb|^{1/nT}) - (1/2) ln|D_v He^T He + I|`.
//!
//! All rates are in nats; [`LogBase`] converts for reporting.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::intensity::IntensityProfile;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelCase {
    CaseI,
    CaseII,
    Unsupported,
}

impl ChannelCase {
    pub fn name(self) -> &'static str {
        match self {
            ChannelCase::CaseI => "Case I",
            ChannelCase::CaseII => "Case II",
            ChannelCase::Unsupported => "an unsupported aperture configuration",
        }
    }
}

pub fn classify_case(nt: usize, nb: usize, ne: usize) -> ChannelCase {
    if nt >= nb && nt >= ne {
        ChannelCase::CaseI
    } else if nt < nb && nt < ne {
        ChannelCase::CaseII
    } else {
        ChannelCase::Unsupported
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Bob and Eve channel gains with the aperture case they fall into.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapChannel {
    pub hb: DMatrix<f64>,
    pub he: DMatrix<f64>,
    pub case: ChannelCase,
}

impl WiretapChannel {
    pub fn new(hb: DMatrix<f64>, he: DMatrix<f64>) -> Result<Self> {
        if hb.is_empty() || he.is_empty() {
            return Err(Error::Dimension("channel matrices must be non-empty".into()));
        }
        if hb.ncols() != he.ncols() {
            return Err(Error::Dimension(format!(
                "Hb has {} columns but He has {}",
                hb.ncols(),
                he.ncols()
            )));
        }
        if hb.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidChannel("Hb"));
        }
        if he.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidChannel("He"));
        }
        for (which, m) in [("Hb", &hb), ("He", &he)] {
            let rank = numerical_rank(m);
            let needed = m.nrows().min(m.ncols());
            if rank < needed {
                return Err(Error::RankDeficient { which, rank, needed });
            }
        }
        let case = classify_case(hb.ncols(), hb.nrows(), he.nrows());
        Ok(Self { hb, he, case })
    }

    pub fn nt(&self) -> usize {
        self.hb.ncols()
    }

    pub fn nb(&self) -> usize {
        self.hb.nrows()
    }

    pub fn ne(&self) -> usize {
        self.he.nrows()
    }

    pub fn transposed(&self) -> Result<Self> {
        Self::new(self.hb.transpose(), self.he.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / std::f64::consts::LN_2,
            LogBase::E => nats,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        }
    }
}

/// A secrecy rate in nats; `clamped = max(0, raw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyRate {
    pub raw: f64,
    pub clamped: f64,
}

impl SecrecyRate {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.max(0.0),
        }
    }

    pub fn in_base(self, base: LogBase) -> Self {
        Self {
            raw: base.from_nats(self.raw),
            clamped: base.from_nats(self.clamped),
        }
    }
}

impl fmt::Display for SecrecyRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (raw {})", self.clamped, self.raw)
    }
}

/// `ln|m|` for symmetric positive definite `m` via Cholesky.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// `ln|m|` through the eigenvalues of the symmetric part (independent path).
pub fn log_det_sym_eigen(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().map(|l| l.ln()).sum()
}

/// `A D B^T` for diagonal `D = diag(d)`.
pub(crate) fn scaled_gram(a: &DMatrix<f64>, d: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut ad = a.clone();
    for (j, mut col) in ad.column_iter_mut().enumerate() {
        col *= d[j];
    }
    ad * b.transpose()
}

/// `(n/2) ln(1 + exp(log_det / n))`, stable for large `log_det`.
pub(crate) fn bob_term_from_log_det(n: usize, log_det: f64) -> f64 {
    let n = n as f64;
    let t = log_det / n;
    let soft = if t > 30.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    0.5 * n * soft
}

/// `(1/2) ln|He D_v He^T + I|`.
pub fn eve_term_case1(he: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let mut x = scaled_gram(he, v, he);
    for i in 0..x.nrows() {
        x[(i, i)] += 1.0;
    }
    log_det_spd(&x)
        .map(|l| 0.5 * l)
        .ok_or(Error::NonFinite("Eve covariance"))
}

/// `(1/2) ln|D_v He^T He + I|`, evaluated through the congruent SPD matrix
/// `I + D_v^{1/2} He^T He D_v^{1/2}`.
pub fn eve_term_case2(he: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let y = he * DMatrix::from_diagonal(&v.map(f64::sqrt));
    let mut x = y.transpose() * &y;
    for i in 0..x.nrows() {
        x[(i, i)] += 1.0;
    }
    log_det_spd(&x)
        .map(|l| 0.5 * l)
        .ok_or(Error::NonFinite("Eve covariance"))
}

fn check_profile(n: usize, profile: &IntensityProfile) -> Result<()> {
    if profile.len() != n {
        return Err(Error::Dimension(format!(
            "profile has {} entries but the channel has {n} transmit apertures",
            profile.len()
        )));
    }
    Ok(())
}

fn require_case(hb: &DMatrix<f64>, he: &DMatrix<f64>, expected: ChannelCase) -> Result<()> {
    if hb.ncols() != he.ncols() {
        return Err(Error::Dimension(format!(
            "Hb has {} columns but He has {}",
            hb.ncols(),
            he.ncols()
        )));
    }
    match classify_case(hb.ncols(), hb.nrows(), he.nrows()) {
        c if c == expected => Ok(()),
        ChannelCase::Unsupported => Err(Error::UnsupportedCase {
            nt: hb.ncols(),
            nb: hb.nrows(),
            ne: he.nrows(),
        }),
        c => Err(Error::CaseMismatch {
            expected: expected.name(),
            found: c.name(),
        }),
    }
}

/// Case I rate with a strictly nonsingular Bob Gram matrix.
pub fn secrecy_rate_case1(hb: &DMatrix<f64>, he: &DMatrix<f64>, profile: &IntensityProfile) -> Result<SecrecyRate> {
    require_case(hb, he, ChannelCase::CaseI)?;
    check_profile(hb.ncols(), profile)?;
    let nb = hb.nrows();
    let gram = scaled_gram(hb, &profile.p, hb);
    let rank = numerical_rank(hb);
    let log_det = match log_det_spd(&gram) {
        Some(l) if rank == nb => l,
        _ => {
            return Err(Error::RankDeficient {
                which: "Bob Gram matrix",
                rank,
                needed: nb,
            })
        }
    };
    let bob = bob_term_from_log_det(nb, log_det);
    let eve = eve_term_case1(he, &profile.v)?;
    Ok(SecrecyRate::from_raw(bob - eve))
}

/// Case II rate with nonsingular `Hb^T Hb`.
pub fn secrecy_rate_case2(hb: &DMatrix<f64>, he: &DMatrix<f64>, profile: &IntensityProfile) -> Result<SecrecyRate> {
    require_case(hb, he, ChannelCase::CaseII)?;
    check_profile(hb.ncols(), profile)?;
    let nt = hb.ncols();
    let q = hb.transpose() * hb;
    let rank = numerical_rank(hb);
    let log_det_q = match log_det_spd(&q) {
        Some(l) if rank == nt => l,
        _ => {
            return Err(Error::RankDeficient {
                which: "Bob channel Gram matrix",
                rank,
                needed: nt,
            })
        }
    };
    let log_det_p: f64 = profile.p.iter().map(|p| p.ln()).sum();
    let bob = bob_term_from_log_det(nt, log_det_p + log_det_q);
    let eve = eve_term_case2(he, &profile.v)?;
    Ok(SecrecyRate::from_raw(bob - eve))
}

/// Bob's Case I term `(nB/2) ln(1 + |Hb D_p Hb^T|^{1/nB})`, tolerating rank
/// loss: with numerical rank `r < nB` it is evaluated on the `r`-dimensional
/// row space `Sigma_r V_r^T` (zero when `r = 0`).
pub fn bob_term_case1(hb_eq: &DMatrix<f64>, p: &DVector<f64>) -> f64 {
    let nb = hb_eq.nrows();
    let rank = numerical_rank(hb_eq);
    if rank == nb {
        if let Some(l) = log_det_spd(&scaled_gram(hb_eq, p, hb_eq)) {
            return bob_term_from_log_det(nb, l);
        }
    }
    if rank == 0 {
        return 0.0;
    }
    let svd = hb_eq.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let r = rank.min(order.len());
    let reduced = DMatrix::from_fn(r, hb_eq.ncols(), |i, j| svd.singular_values[order[i]] * vt[(order[i], j)]);
    match log_det_spd(&scaled_gram(&reduced, p, &reduced)) {
        Some(l) => bob_term_from_log_det(r, l),
        None => 0.0,
    }
}

/// Bob's Case II term; a rank-deficient equivalent channel gives zero.
pub fn bob_term_case2(hb_eq: &DMatrix<f64>, p: &DVector<f64>) -> f64 {
    let nt = hb_eq.ncols();
    if numerical_rank(hb_eq) < nt {
        return 0.0;
    }
    match log_det_spd(&(hb_eq.transpose() * hb_eq)) {
        Some(l) => bob_term_from_log_det(nt, l + p.iter().map(|x| x.ln()).sum::<f64>()),
        None => 0.0,
    }
}

fn check_equivalent(hb_eq: &DMatrix<f64>, he_eq: &DMatrix<f64>, p: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    if hb_eq.ncols() != p.len() || he_eq.ncols() != v.len() {
        return Err(Error::Dimension("equivalent channel and profile disagree".into()));
    }
    if hb_eq.iter().chain(he_eq.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("equivalent channel"));
    }
    Ok(())
}

/// Case I formula over an equivalent channel (see [`bob_term_case1`]).
pub fn equivalent_rate_case1(hb_eq: &DMatrix<f64>, he_eq: &DMatrix<f64>, p: &DVector<f64>, v: &DVector<f64>) -> Result<SecrecyRate> {
    check_equivalent(hb_eq, he_eq, p, v)?;
    Ok(SecrecyRate::from_raw(bob_term_case1(hb_eq, p) - eve_term_case1(he_eq, v)?))
}

/// Case II formula over `(Hb W^T, He W^T)` (see [`bob_term_case2`]).
pub fn equivalent_rate_case2(hb_eq: &DMatrix<f64>, he_eq: &DMatrix<f64>, p: &DVector<f64>, v: &DVector<f64>) -> Result<SecrecyRate> {
    check_equivalent(hb_eq, he_eq, p, v)?;
    Ok(SecrecyRate::from_raw(bob_term_case2(hb_eq, p) - eve_term_case2(he_eq, v)?))
}

/// `(Hb W^T, He W^T)`.
pub fn apply_full_beamformer(hb: &DMatrix<f64>, he: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let nt = hb.ncols();
    if w.nrows() != nt || w.ncols() != nt || he.ncols() != nt {
        return Err(Error::Dimension(format!(
            "beamformer must be {nt}x{nt}, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let wt = w.transpose();
    Ok((hb * &wt, he * &wt))
}

/// Sorted size-`nB` subset of LED indices (0-based; displayed 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    selected: Vec<usize>,
    complement: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut selected: Vec<usize>, nt: usize) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if selected.iter().any(|&i| i >= nt) {
            return Err(Error::Dimension(format!("index set {selected:?} exceeds nT = {nt}")));
        }
        let complement = (0..nt).filter(|i| !selected.contains(i)).collect();
        Ok(Self { selected, complement })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn nt(&self) -> usize {
        self.selected.len() + self.complement.len()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.selected.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// `(Hb_I + Hb_Ic B^T, He_I + He_Ic B^T)`.
pub fn apply_sub_beamformer(hb: &DMatrix<f64>, he: &DMatrix<f64>, set: &IndexSet, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let nb = hb.nrows();
    if set.nt() != hb.ncols() || he.ncols() != hb.ncols() || set.selected().len() != nb {
        return Err(Error::Dimension(format!(
            "index set {set} does not fit a {}x{} Bob channel",
            nb,
            hb.ncols()
        )));
    }
    if b.nrows() != nb || b.ncols() != set.complement().len() {
        return Err(Error::Dimension(format!(
            "sub-connected beamformer must be {}x{}, got {}x{}",
            nb,
            set.complement().len(),
            b.nrows(),
            b.ncols()
        )));
    }
    let hb_i = select_columns(hb, set.selected());
    if numerical_rank(&hb_i) < nb {
        return Err(Error::SingularIndexSet(set.to_string()));
    }
    let bt = b.transpose();
    let hb_eq = &hb_i + select_columns(hb, set.complement()) * &bt;
    let he_eq = select_columns(he, set.selected()) + select_columns(he, set.complement()) * &bt;
    Ok((hb_eq, he_eq))
}
