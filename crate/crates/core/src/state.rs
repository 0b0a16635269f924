//! Pure states, density matrices, state fidelity and seeded random states.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, hermiticity_deviation, max_abs_diff, outer, psd_sqrt, sandwich, tensor_vec, trace,
    trace_of_product, ComplexMatrix, ComplexVector, ONE, TOL_EIG, ZERO,
};

/// Normalized state vector of one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    /// Accepts a vector of length 2 or 4 whose norm is 1 within 1e-12.
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        check_dim(amplitudes.len(), &[2, 4])?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector of length 2 or 4.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        check_dim(amplitudes.len(), &[2, 4])?;
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_slice(amplitudes: &[num_complex::Complex64]) -> Result<Self> {
        Self::normalized(ComplexVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|index>` of `dim` levels.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[index] = ONE;
        Self { amplitudes: v }
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        PureState::new(tensor_vec(&self.amplitudes, &other.amplitudes))
    }

    pub fn projector(&self) -> ComplexMatrix {
        outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: self.projector(),
        }
    }

    pub fn apply(&self, u: &ComplexMatrix) -> Result<PureState> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", self.dim()),
                got: format!("{}", u.ncols()),
            });
        }
        PureState::normalized(u * &self.amplitudes)
    }

    /// `<self|m|self>`.
    pub fn expectation(&self, m: &ComplexMatrix) -> num_complex::Complex64 {
        sandwich(&self.amplitudes, m, &self.amplitudes)
    }

    /// 2x2 amplitude matrix `c[i][j]` of a two-qubit state `sum c_ij |ij>`.
    pub fn amplitude_matrix(&self) -> Result<ComplexMatrix> {
        check_dim(self.dim(), &[4])?;
        Ok(ComplexMatrix::from_fn(2, 2, |i, j| self.amplitudes[2 * i + j]))
    }

    /// Schmidt coefficients of a two-qubit state, descending.
    pub fn schmidt_coefficients(&self) -> Result<[f64; 2]> {
        let sv = self.amplitude_matrix()?.singular_values();
        let (a, b) = (sv[0], sv[1]);
        Ok(if a >= b { [a, b] } else { [b, a] })
    }
}

/// Positive-semidefinite, unit-trace, Hermitian operator of dimension 2, 4 or 16.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const DENSITY_TRACE_TOL: f64 = 1e-10;
pub const DENSITY_PSD_TOL: f64 = 1e-9;

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_dim(matrix.nrows(), &[2, 4, 16])?;
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square".into(),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > DENSITY_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > DENSITY_TRACE_TOL || tr.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = min_eigenvalue(&matrix)?;
        if min < -DENSITY_PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Divides by the trace before validating.
    pub fn from_unnormalized(matrix: ComplexMatrix) -> Result<Self> {
        let tr = trace(&matrix).re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        Self::new(matrix.unscale(tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.matrix)
            .map(|e| e.values)
            .expect("density matrices are Hermitian by construction")
    }

    /// `Tr(rho * op)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> num_complex::Complex64 {
        trace_of_product(&self.matrix, op)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: crate::linalg::tensor(&self.matrix, &other.matrix),
        }
    }

    /// `U rho U^dag`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(u * &self.matrix * u.adjoint())
    }

    /// Convex mixture `(1 - w) self + w other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix.scale(1.0 - w) + other.matrix.scale(w))
    }

    /// Reduced state of one qubit of a two-qubit state.
    pub fn reduced(&self, keep_first: bool) -> Result<DensityMatrix> {
        check_dim(self.dim(), &[4])?;
        let m = &self.matrix;
        let r = ComplexMatrix::from_fn(2, 2, |i, j| {
            if keep_first {
                m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)]
            } else {
                m[(i, j)] + m[(2 + i, 2 + j)]
            }
        });
        DensityMatrix::new(r)
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }
}

fn check_dim(n: usize, allowed: &[usize]) -> Result<()> {
    if allowed.contains(&n) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: format!("one of {allowed:?}"),
            got: n.to_string(),
        })
    }
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(*hermitian_eig(m)?
        .values
        .last()
        .expect("matrices have at least one eigenvalue"))
}

/// Purity above which a state is handled by the pure-state fidelity formula.
const PURE_THRESHOLD: f64 = 1.0 - 1e-12;

/// Uhlmann fidelity `F = Tr sqrt(sqrt(sigma) rho sqrt(sigma))` (unsquared).
///
/// When either argument is pure the closed form `sqrt(<psi|rho|psi>)` is used,
/// which avoids square roots of numerically-zero eigenvalues.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}", rho.dim()),
            got: format!("{}", sigma.dim()),
        });
    }
    for (pure, other) in [(sigma, rho), (rho, sigma)] {
        if pure.purity() >= PURE_THRESHOLD {
            let eig = hermitian_eig(pure.matrix())?;
            let psi = eig.vector(0);
            let overlap = sandwich(&psi, other.matrix(), &psi).re;
            return Ok(overlap.clamp(0.0, 1.0).sqrt());
        }
    }
    let root = psd_sqrt(sigma.matrix())?;
    let inner = &root * rho.matrix() * &root;
    let eig = hermitian_eig(&crate::linalg::hermitian_part(&inner))?;
    let f: f64 = eig
        .values
        .iter()
        .map(|&v| if v > -TOL_EIG { v.max(0.0).sqrt() } else { 0.0 })
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Whether a random state is drawn as a pure projector or a full-rank mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purity {
    Pure,
    Mixed,
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state of dimension `dim`.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    let v = ComplexVector::from_fn(dim, |_, _| gaussian_complex(rng));
    PureState::normalized(v).expect("gaussian vector is nonzero with probability one")
}

/// Random density matrix. Pure: projector on a Haar-random vector. Mixed:
/// `A A^dag / Tr(A A^dag)` with `A` a matrix of iid standard complex Gaussians.
pub fn random_state<R: Rng + ?Sized>(dim: usize, purity: Purity, rng: &mut R) -> DensityMatrix {
    match purity {
        Purity::Pure => random_pure_state(dim, rng).to_density(),
        Purity::Mixed => {
            let a = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
            let m = &a * a.adjoint();
            let tr = trace(&m).re;
            DensityMatrix::from_trusted(crate::linalg::hermitian_part(&m.unscale(tr)))
        }
    }
}

/// Haar-random unitary via QR of a complex Gaussian matrix with phase fix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..dim {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// Seeded generator used across the crate.
pub type Rng64 = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng64 {
    use rand::SeedableRng;
    Rng64::seed_from_u64(seed)
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bell {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    pub fn state(self) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (p, m) = (c(s, 0.0), c(-s, 0.0));
        let amps = match self {
            Bell::PhiPlus => [p, ZERO, ZERO, p],
            Bell::PhiMinus => [p, ZERO, ZERO, m],
            Bell::PsiPlus => [ZERO, p, p, ZERO],
            Bell::PsiMinus => [ZERO, p, m, ZERO],
        };
        PureState {
            amplitudes: ComplexVector::from_column_slice(&amps),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bell::PhiPlus => "phi+",
            Bell::PhiMinus => "phi-",
            Bell::PsiPlus => "psi+",
            Bell::PsiMinus => "psi-",
        }
    }
}

/// Max-abs distance between two density matrices.
pub fn state_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    max_abs_diff(a.matrix(), b.matrix())
}
