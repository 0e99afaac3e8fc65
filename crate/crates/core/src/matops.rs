//! Vectorization, Kronecker products, commutation matrices and the
//! nearest-PSD projection used to assemble and convexify Hessians.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Column-major stacking of `x`.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`] for an `m x n` matrix.
pub fn unvec(v: &DVector<f64>, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != m * n {
        return Err(Error::Dimension(format!(
            "cannot reshape a vector of length {} into {m}x{n}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(m, n, v.as_slice()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// The permutation `K_{m x n}` with `K vec(X) = vec(X^T)` for `m x n` matrices `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutationMatrix {
    m: usize,
    n: usize,
    // (K v)[k] = v[source[k]]
    source: Vec<usize>,
}

impl CommutationMatrix {
    pub fn new(m: usize, n: usize) -> Self {
        let mut source = vec![0; m * n];
        for i in 0..m {
            for j in 0..n {
                source[j + i * n] = i + j * m;
            }
        }
        Self { m, n, source }
    }

    pub fn rows_of_source(&self) -> usize {
        self.m
    }

    pub fn cols_of_source(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.m * self.n
    }

    /// `K_{n x m}`, which is also the inverse.
    pub fn transpose(&self) -> Self {
        Self::new(self.n, self.m)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.size(), "commutation matrix applied to wrong length");
        DVector::from_fn(self.size(), |k, _| v[self.source[k]])
    }

    /// `K * a`, computed by permuting rows.
    pub fn left_mul(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), self.size(), "commutation matrix row mismatch");
        DMatrix::from_fn(self.size(), a.ncols(), |k, c| a[(self.source[k], c)])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.size(), self.size());
        for (row, &col) in self.source.iter().enumerate() {
            k[(row, col)] = 1.0;
        }
        k
    }
}

/// Frobenius-nearest symmetric PSD matrix: symmetrize, then zero the
/// negative eigenvalues.
pub fn nearest_psd(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !g.is_square() {
        return Err(Error::Dimension(format!(
            "nearest_psd needs a square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix passed to nearest_psd"));
    }
    let s = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let clipped = eig.eigenvalues.map(|h| h.max(0.0));
    let p = &eig.eigenvectors;
    let out = p * DMatrix::from_diagonal(&clipped) * p.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min()
}
