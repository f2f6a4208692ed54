//! Dense Hermitian matrices over either real or complex scalars.
//!
//! Dirichlet and Neumann problems stay in real arithmetic; periodic boundary
//! conditions force complex. The enum keeps both behind one interface for the
//! Galerkin and Gram eigenproblems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Hermitian matrix, real-symmetric or complex-Hermitian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HermMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl HermMatrix {
    pub fn identity(n: usize, complex: bool) -> Self {
        if complex {
            HermMatrix::Complex(DMatrix::identity(n, n))
        } else {
            HermMatrix::Real(DMatrix::identity(n, n))
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            HermMatrix::Real(m) => m.nrows(),
            HermMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, HermMatrix::Complex(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            HermMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            HermMatrix::Complex(m) => m[(i, j)],
        }
    }

    /// Largest |M_ij - conj(M_ji)|; zero for an exactly Hermitian matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Symmetrize in place: M ← (M + M*)/2. Quadrature round-off makes
    /// assembled Grams Hermitian only to ~1e-15; the eigensolver wants exact.
    pub fn symmetrize(&mut self) {
        match self {
            HermMatrix::Real(m) => {
                let n = m.nrows();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            HermMatrix::Complex(m) => {
                let n = m.nrows();
                for i in 0..n {
                    m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
                    for j in (i + 1)..n {
                        let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
                        m[(i, j)] = v;
                        m[(j, i)] = v.conj();
                    }
                }
            }
        }
    }

    /// Leading principal n×n block.
    pub fn leading_block(&self, n: usize) -> HermMatrix {
        match self {
            HermMatrix::Real(m) => HermMatrix::Real(m.view((0, 0), (n, n)).into_owned()),
            HermMatrix::Complex(m) => HermMatrix::Complex(m.view((0, 0), (n, n)).into_owned()),
        }
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> HermMatrix {
        let k = idx.len();
        match self {
            HermMatrix::Real(m) => {
                let mut s = DMatrix::zeros(k, k);
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        s[(a, b)] = m[(i, j)];
                    }
                }
                HermMatrix::Real(s)
            }
            HermMatrix::Complex(m) => {
                let mut s = DMatrix::zeros(k, k);
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        s[(a, b)] = m[(i, j)];
                    }
                }
                HermMatrix::Complex(s)
            }
        }
    }

    /// Add `c_k` to the k-th diagonal entry for each k.
    pub fn add_diagonal(&mut self, c: &[f64]) {
        match self {
            HermMatrix::Real(m) => {
                for (k, v) in c.iter().enumerate() {
                    m[(k, k)] += v;
                }
            }
            HermMatrix::Complex(m) => {
                for (k, v) in c.iter().enumerate() {
                    m[(k, k)] += Complex64::new(*v, 0.0);
                }
            }
        }
    }

    /// Quadratic form α*Mα for a complex coefficient vector. Real for a
    /// Hermitian M; the imaginary residue is discarded.
    pub fn quadratic_form(&self, alpha: &[Complex64]) -> f64 {
        let n = self.nrows();
        assert_eq!(alpha.len(), n);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += alpha[i].conj() * self.get(i, j) * alpha[j];
            }
        }
        acc.re
    }

    /// Eigendecomposition with eigenvalues sorted ascending; columns of the
    /// returned matrix are the corresponding orthonormal eigenvectors.
    pub fn eigh(&self) -> (Vec<f64>, HermMatrix) {
        match self {
            HermMatrix::Real(m) => {
                let se = m.clone().symmetric_eigen();
                let (vals, perm) = sort_perm(&se.eigenvalues);
                let vecs = permute_columns_real(&se.eigenvectors, &perm);
                (vals, HermMatrix::Real(vecs))
            }
            HermMatrix::Complex(m) => {
                let se = m.clone().symmetric_eigen();
                let (vals, perm) = sort_perm(&se.eigenvalues);
                let vecs = permute_columns_complex(&se.eigenvectors, &perm);
                (vals, HermMatrix::Complex(vecs))
            }
        }
    }

    /// Smallest eigenvalue and its (normalized) eigenvector.
    pub fn min_eigenpair(&self) -> (f64, Vec<Complex64>) {
        let (vals, vecs) = self.eigh();
        (vals[0], vecs.column_complex(0))
    }

    /// Column as a complex vector regardless of the underlying scalar.
    pub fn column_complex(&self, k: usize) -> Vec<Complex64> {
        match self {
            HermMatrix::Real(m) => m.column(k).iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            HermMatrix::Complex(m) => m.column(k).iter().cloned().collect(),
        }
    }

    /// Apply M to a complex vector.
    pub fn apply(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        let n = self.nrows();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.get(i, j) * alpha[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Psi† M Psi for M = self; changes basis from e_y to eigenfunctions.
    pub fn conjugate_by(&self, psi: &HermMatrix) -> HermMatrix {
        match (self, psi) {
            (HermMatrix::Real(m), HermMatrix::Real(p)) => HermMatrix::Real(p.transpose() * m * p),
            (HermMatrix::Complex(m), HermMatrix::Complex(p)) => {
                HermMatrix::Complex(p.adjoint() * m * p)
            }
            (HermMatrix::Complex(m), HermMatrix::Real(p)) => {
                let pc = p.map(|v| Complex64::new(v, 0.0));
                HermMatrix::Complex(pc.adjoint() * m * &pc)
            }
            (HermMatrix::Real(m), HermMatrix::Complex(p)) => {
                let mc = m.map(|v| Complex64::new(v, 0.0));
                HermMatrix::Complex(p.adjoint() * mc * p)
            }
        }
    }

    /// Largest |Psi*Psi - I| entry: unitarity defect of the column set.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(k, i).conj() * self.get(k, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

fn sort_perm(vals: &DVector<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..vals.len()).collect();
    perm.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("eigenvalue NaN"));
    (perm.iter().map(|&i| vals[i]).collect(), perm)
}

fn permute_columns_real(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), perm.len());
    for (new, &old) in perm.iter().enumerate() {
        out.set_column(new, &m.column(old));
    }
    out
}

fn permute_columns_complex(m: &DMatrix<Complex64>, perm: &[usize]) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(m.nrows(), perm.len());
    for (new, &old) in perm.iter().enumerate() {
        out.set_column(new, &m.column(old));
    }
    out
}

/// ‖α‖² = Σ|α_k|² with fixed summation order.
pub fn norm_sq(alpha: &[Complex64]) -> f64 {
    alpha.iter().map(|a| a.norm_sqr()).sum()
}
