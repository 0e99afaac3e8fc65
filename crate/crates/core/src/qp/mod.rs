//! Linear compilation of the intensity constraints and a dense solver for the
//! strongly convex quadratic subproblems.
//!
//! Decision vectors are `x = [vec(V); vec(S)]` where `V` is the beamformer
//! (`W` or `B`) and `S >= |V|` entrywise holds the L1 epigraph variables.

mod solver;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matops::{kron, min_eigenvalue, vec};
use crate::rates::{select_columns, IndexSet, WiretapChannel};

pub use solver::solve_qp;

/// Default KKT tolerance for subproblem solves.
pub const DEFAULT_QP_TOL: f64 = 1e-8;
/// Default iteration budget for the splitting phase.
pub const DEFAULT_QP_MAX_ITERS: usize = 20_000;

/// Placement of the beamformer and its epigraph variables inside `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub rows: usize,
    pub cols: usize,
}

impl VariableLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn n_beamformer(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_vars(&self) -> usize {
        2 * self.n_beamformer()
    }

    pub fn beamformer_index(&self, i: usize, j: usize) -> usize {
        i + j * self.rows
    }

    pub fn slack_index(&self, i: usize, j: usize) -> usize {
        self.n_beamformer() + i + j * self.rows
    }

    /// Extracts the beamformer block of `x`.
    pub fn beamformer(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &x.as_slice()[..self.n_beamformer()])
    }

    pub fn slacks(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &x.as_slice()[self.n_beamformer()..self.n_vars()])
    }

    /// `[vec(V); vec(|V|)]`, the tightest epigraph point for `V`.
    pub fn pack(&self, v: &DMatrix<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_vars());
        let nv = self.n_beamformer();
        x.rows_mut(0, nv).copy_from(&vec(v));
        x.rows_mut(nv, nv).copy_from(&vec(&v.abs()));
        x
    }
}

/// `G x <= h` over the `(V, S)` layout.
#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub layout: VariableLayout,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

/// `A v = b` over `vec(V)` only.
#[derive(Debug, Clone)]
pub struct EqualityBlock {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl EqualityBlock {
    /// Pads the block with zero columns for the epigraph variables.
    pub fn lift(&self, layout: VariableLayout) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.a.nrows(), layout.n_vars());
        a.columns_mut(0, layout.n_beamformer()).copy_from(&self.a);
        a
    }

    pub fn residual(&self, v: &DMatrix<f64>) -> f64 {
        (&self.a * vec(v) - &self.b).norm()
    }
}

/// Per column `j` of `V` (`rows x cols`):
/// `-s_ij <= v_ij <= s_ij`, `sum_i s_ij <= 1`,
/// `±(v_j^T beta_in - beta_out_j) + (1/2) sum_i s_ij <= 1/2`.
fn compile_l1_affine(beta_in: &DVector<f64>, beta_out: &DVector<f64>) -> ConstraintBlock {
    let layout = VariableLayout::new(beta_in.len(), beta_out.len());
    let (rows, cols) = (layout.rows, layout.cols);
    let per_col = 2 * rows + 3;
    let mut g = DMatrix::zeros(per_col * cols, layout.n_vars());
    let mut h = DVector::zeros(per_col * cols);
    for j in 0..cols {
        let base = j * per_col;
        for i in 0..rows {
            let (w, s) = (layout.beamformer_index(i, j), layout.slack_index(i, j));
            g[(base + 2 * i, w)] = 1.0;
            g[(base + 2 * i, s)] = -1.0;
            g[(base + 2 * i + 1, w)] = -1.0;
            g[(base + 2 * i + 1, s)] = -1.0;
        }
        let (sum, plus, minus) = (base + 2 * rows, base + 2 * rows + 1, base + 2 * rows + 2);
        for i in 0..rows {
            let (w, s) = (layout.beamformer_index(i, j), layout.slack_index(i, j));
            g[(sum, s)] = 1.0;
            g[(plus, w)] = beta_in[i];
            g[(plus, s)] = 0.5;
            g[(minus, w)] = -beta_in[i];
            g[(minus, s)] = 0.5;
        }
        h[sum] = 1.0;
        h[plus] = 0.5 + beta_out[j];
        h[minus] = 0.5 - beta_out[j];
    }
    ConstraintBlock { layout, g, h }
}

/// Peak- and average-intensity constraints for a fully-connected `W`.
pub fn compile_full_constraints(beta: &DVector<f64>) -> ConstraintBlock {
    compile_l1_affine(beta, beta)
}

/// Constraints for a sub-connected `B` (`nB x (nT - nB)`).
pub fn compile_sub_constraints(beta_i: &DVector<f64>, beta_ic: &DVector<f64>) -> ConstraintBlock {
    compile_l1_affine(beta_i, beta_ic)
}

/// Smallest slack of `||v_j||_1 <= 1` and
/// `|v_j^T beta_in - beta_out_j| <= 1/2 - ||v_j||_1 / 2` over all columns,
/// evaluated directly. Infinite for a matrix with no columns.
pub fn l1_affine_slack(v: &DMatrix<f64>, beta_in: &DVector<f64>, beta_out: &DVector<f64>) -> f64 {
    let mut worst = f64::INFINITY;
    for (j, col) in v.column_iter().enumerate() {
        let l1 = col.abs().sum();
        let dev = (col.dot(beta_in) - beta_out[j]).abs();
        worst = worst.min(1.0 - l1).min(0.5 - 0.5 * l1 - dev);
    }
    worst
}

pub fn full_constraint_slack(w: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    l1_affine_slack(w, beta, beta)
}

pub fn sub_constraint_slack(b: &DMatrix<f64>, beta_i: &DVector<f64>, beta_ic: &DVector<f64>) -> f64 {
    l1_affine_slack(b, beta_i, beta_ic)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZfKind {
    Full,
    Sub(IndexSet),
}

/// Zero-forcing equalities: `He W^T = 0` on `vec(W)`, or
/// `He_Ic B^T = -He_I` on `vec(B)`.
pub fn zf_equalities(kind: &ZfKind, channel: &WiretapChannel) -> EqualityBlock {
    match kind {
        ZfKind::Full => {
            // vec(W He^T) = (He ⊗ I) vec(W)
            let nt = channel.nt();
            let a = kron(&channel.he, &DMatrix::identity(nt, nt));
            let b = DVector::zeros(a.nrows());
            EqualityBlock { a, b }
        }
        ZfKind::Sub(set) => {
            let he_i = select_columns(&channel.he, set.selected());
            let he_c = select_columns(&channel.he, set.complement());
            let nb = set.selected().len();
            let a = kron(&he_c, &DMatrix::identity(nb, nb));
            let b = -vec(&he_i.transpose());
            EqualityBlock { a, b }
        }
    }
}

/// `min x^T P x / 2 + q^T x + r` subject to `G x <= h`, `A x = b`.
#[derive(Debug, Clone)]
pub struct QPProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub layout: Option<VariableLayout>,
}

impl QPProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            r,
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            layout: None,
        }
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    /// Beamformer subproblem: quadratic model on `vec(V)`, zero cost on the
    /// epigraph variables, compiled constraints and optional equalities.
    pub fn beamformer(
        hessian: &DMatrix<f64>,
        linear: &DVector<f64>,
        constant: f64,
        block: &ConstraintBlock,
        equalities: Option<&EqualityBlock>,
    ) -> Result<Self> {
        let layout = block.layout;
        let nv = layout.n_beamformer();
        if hessian.shape() != (nv, nv) || linear.len() != nv {
            return Err(Error::Dimension(format!(
                "quadratic model has {} variables but the layout has {nv}",
                linear.len()
            )));
        }
        let mut p = DMatrix::zeros(layout.n_vars(), layout.n_vars());
        p.view_mut((0, 0), (nv, nv)).copy_from(hessian);
        let mut q = DVector::zeros(layout.n_vars());
        q.rows_mut(0, nv).copy_from(linear);
        let mut qp = QPProblem::new(p, q, constant).with_inequalities(block.g.clone(), block.h.clone());
        if let Some(eq) = equalities {
            if eq.a.ncols() != nv {
                return Err(Error::Dimension("equality block does not match the beamformer".into()));
            }
            qp = qp.with_equalities(eq.lift(layout), eq.b.clone());
        }
        qp.layout = Some(layout);
        Ok(qp)
    }

    pub fn n_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.r
    }

    /// Largest violation of `G x <= h` and `A x = b`.
    pub fn primal_residual(&self, x: &DVector<f64>) -> f64 {
        let ineq = (&self.g * x - &self.h).iter().fold(0.0f64, |m, &v| m.max(v));
        let eq = (&self.a * x - &self.b).amax();
        ineq.max(eq)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.p.shape() != (n, n) {
            return Err(Error::Dimension(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return Err(Error::Dimension("inequality block has inconsistent dimensions".into()));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(Error::Dimension("equality block has inconsistent dimensions".into()));
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !(finite(self.p.as_slice())
            && finite(self.q.as_slice())
            && finite(self.g.as_slice())
            && finite(self.h.as_slice())
            && finite(self.a.as_slice())
            && finite(self.b.as_slice()))
        {
            return Err(Error::NonFinite("QP data"));
        }
        let scale = self.p.amax().max(1.0);
        if (&self.p - self.p.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Dimension("P is not symmetric".into()));
        }
        if n > 0 && min_eigenvalue(&self.p) < -1e-10 * scale {
            return Err(Error::Dimension("P is not positive semidefinite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QPStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QPMethod {
    Presolve,
    Splitting,
    Polished,
    InteriorPoint,
}

#[derive(Debug, Clone)]
pub struct QPSolution {
    pub x: DVector<f64>,
    pub status: QPStatus,
    pub method: QPMethod,
    /// Largest constraint violation.
    pub primal_residual: f64,
    /// Stationarity error relative to the size of its terms.
    pub dual_residual: f64,
    /// Complementarity `|lambda^T (h - G x)|` relative to `1 + |objective|`.
    pub duality_gap: f64,
    pub objective: f64,
    /// Inequality multipliers (nonnegative).
    pub lambda: DVector<f64>,
    /// Equality multipliers.
    pub nu: DVector<f64>,
    pub iterations: usize,
    pub reason: Option<String>,
}

impl QPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QPStatus::Optimal
    }
}

/// Result of the least-squares zero-forcing relaxation.
#[derive(Debug, Clone)]
pub struct MlseSolution {
    pub b: DMatrix<f64>,
    /// `||He_Ic B^T + He_I||_F` at the returned `B`.
    pub residual: f64,
    pub qp: QPSolution,
}

/// Feasible minimizer of `||He_Ic B^T + He_I||_F^2` under the sub-connected
/// intensity constraints.
pub fn solve_mlse(channel: &WiretapChannel, set: &IndexSet, beta: &DVector<f64>, tol: f64) -> Result<MlseSolution> {
    if beta.len() != channel.nt() || set.nt() != channel.nt() {
        return Err(Error::Dimension("beta and index set must cover every LED".into()));
    }
    let he_i = select_columns(&channel.he, set.selected());
    let he_c = select_columns(&channel.he, set.complement());
    let nb = set.selected().len();
    let beta_i = DVector::from_iterator(nb, set.selected().iter().map(|&i| beta[i]));
    let beta_ic = DVector::from_iterator(set.complement().len(), set.complement().iter().map(|&i| beta[i]));
    let block = compile_sub_constraints(&beta_i, &beta_ic);
    // ||B He_c^T + He_I^T||^2 = vec(B)^T (He_c^T He_c ⊗ I) vec(B) + 2 vec(He_I^T He_c)^T vec(B) + ||He_I||^2
    let p = kron(&(he_c.transpose() * &he_c), &DMatrix::identity(nb, nb)) * 2.0;
    let q = vec(&(he_i.transpose() * &he_c)) * 2.0;
    let qp = QPProblem::beamformer(&p, &q, he_i.norm_squared(), &block, None)?;
    let sol = solve_qp(&qp, tol, DEFAULT_QP_MAX_ITERS)?;
    if !sol.is_optimal() {
        return Err(Error::Subproblem {
            iteration: 0,
            reason: format!("least-squares relaxation ended with {:?}", sol.status),
        });
    }
    let b = block.layout.beamformer(&sol.x);
    let residual = (&he_c * b.transpose() + &he_i).norm();
    Ok(MlseSolution { b, residual, qp: sol })
}
