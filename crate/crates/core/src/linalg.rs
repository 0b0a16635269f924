//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Dimensions used in this crate
//! are 2, 4, 16 and 256. Basis convention: `|0> = (1, 0)`, `|1> = (0, 1)`,
//! and for two qubits the control is the first tensor factor, so the
//! computational basis order is `|00>, |01>, |10>, |11>`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Tolerance for algebraic identities.
pub const TOL_ALGEBRAIC: f64 = 1e-12;
/// Tolerance for results of eigen-solves.
pub const TOL_EIG: f64 = 1e-9;
/// Hermiticity tolerance accepted by [`hermitian_eig`].
pub const TOL_HERMITIAN: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Builds a matrix from a row-major slice.
pub fn from_rows(n: usize, m: usize, entries: &[Complex64]) -> ComplexMatrix {
    assert_eq!(entries.len(), n * m, "entry count does not match shape");
    ComplexMatrix::from_row_slice(n, m, entries)
}

/// Builds a real matrix from a row-major slice.
pub fn from_real_rows(n: usize, m: usize, entries: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_iterator(n, m, entries.iter().map(|&x| c(x, 0.0)))
}

/// Single-qubit Pauli operator by index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> ComplexMatrix {
    match index {
        0 => from_rows(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => from_rows(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => from_rows(2, 2, &[ZERO, -I, I, ZERO]),
        3 => from_rows(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {index} out of range"),
    }
}

pub const PAULI_LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// Label of a two-qubit Pauli product by basis index, e.g. `5 -> "XX"`.
pub fn pauli_product_label(index: usize) -> String {
    format!("{}{}", PAULI_LETTERS[index / 4], PAULI_LETTERS[index % 4])
}

/// Kronecker product: `result[(i*rb + k, j*cb + l)] = a[i, j] * b[k, l]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    ComplexMatrix::from_fn(ra * rb, ca * cb, |r, col| {
        a[(r / rb, col / cb)] * b[(r % rb, col % cb)]
    })
}

pub fn tensor_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let nb = b.len();
    ComplexVector::from_fn(a.len() * nb, |r, _| a[r / nb] * b[r % nb])
}

/// The 16 two-qubit Pauli products `A (x) B`, first factor major:
/// `II, IX, IY, IZ, XI, ..., ZZ`.
pub fn pauli_product_basis() -> &'static [ComplexMatrix] {
    static BASIS: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    BASIS.get_or_init(|| (0..16).map(|k| tensor(&pauli(k / 4), &pauli(k % 4))).collect())
}

/// Matrix unit `|j><k|` of dimension `n` (zero-based indices).
pub fn matrix_unit(n: usize, j: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    m[(j, k)] = ONE;
    m
}

/// Hilbert-Schmidt inner product `Tr(a^dag b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in comparison");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn approx_eq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && max_abs_diff(a, b) <= tol
}

/// Largest entrywise deviation of `h` from its adjoint.
pub fn hermiticity_deviation(h: &ComplexMatrix) -> f64 {
    let n = h.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..h.ncols() {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(h + h^dag) / 2`.
pub fn hermitian_part(h: &ComplexMatrix) -> ComplexMatrix {
    (h + h.adjoint()).scale(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    First,
    Second,
}

/// Partial transpose of a 4x4 operator on the chosen qubit.
pub fn partial_transpose(m: &ComplexMatrix, subsystem: Subsystem) -> Result<ComplexMatrix> {
    if m.shape() != (4, 4) {
        return Err(Error::DimensionMismatch {
            expected: "4x4".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    // Row index r = 2*a + b, column index s = 2*c + d.
    Ok(ComplexMatrix::from_fn(4, 4, |r, s| {
        let (a, b) = (r / 2, r % 2);
        let (cc, d) = (s / 2, s % 2);
        match subsystem {
            Subsystem::First => m[(2 * cc + b, 2 * a + d)],
            Subsystem::Second => m[(2 * a + d, 2 * cc + b)],
        }
    }))
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> ComplexVector {
        self.vectors.column(k).into_owned()
    }

    /// `V f(diag(lambda)) V^dag`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for r in 0..n {
                scaled[(r, k)] *= fv;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<Eigen> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let deviation = hermiticity_deviation(h);
    if deviation > TOL_HERMITIAN {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(hermitian_part(h));
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(Eigen { values, vectors })
}

/// Square root of a positive semidefinite Hermitian matrix. Eigenvalues in
/// `(-1e-9, 0)` are clamped to zero; anything more negative is an error.
pub fn psd_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    if let Some(&min) = eig.values.last() {
        if min < -TOL_EIG {
            return Err(Error::InvalidState(format!(
                "matrix square root of non-PSD operator (eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(eig.reconstruct_with(|v| v.max(0.0).sqrt()))
}

/// Outer product `|a><b|`.
pub fn outer(a: &ComplexVector, b: &ComplexVector) -> ComplexMatrix {
    a * b.adjoint()
}

/// `<a|m|b>`.
pub fn sandwich(a: &ComplexVector, m: &ComplexMatrix, b: &ComplexVector) -> Complex64 {
    (a.adjoint() * m * b)[(0, 0)]
}
