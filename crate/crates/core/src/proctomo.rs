//! Standard process tomography of two-qubit channels: sixteen product inputs,
//! their outputs, the process matrix `chi` in the Pauli-product basis (by a block
//! construction and by direct inversion of `lambda = beta chi`), and Kraus extraction.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::channels::{apply_channel, Pol, QuantumChannel};
use crate::error::{Error, Result};
use crate::exec::{item_seed, Exec};
use crate::io::complex_matrix;
use crate::linalg::{
    c, hermitian_eig, hermitian_part, hermiticity_deviation, identity, pauli, pauli_product_basis,
    pauli_product_label, tensor, trace, ComplexMatrix, ComplexVector, ONE, ZERO,
};
use crate::state::DensityMatrix;
use crate::statetomo::{mle_reconstruct, simulate_tomography, MleConfig};

/// Single-qubit input polarizations, in input-label order.
pub const INPUT_POLS: [Pol; 4] = [Pol::H, Pol::V, Pol::D, Pol::R];

/// Label `αβ` of input `idx = 4 α + β`.
pub fn input_label(idx: usize) -> String {
    format!("{}{}", INPUT_POLS[idx / 4].letter(), INPUT_POLS[idx % 4].letter())
}

/// The sixteen inputs `rho_α (x) rho_β` with `α` major, `β` minor.
pub fn input_basis_states() -> Vec<(String, DensityMatrix)> {
    (0..16)
        .map(|idx| {
            let m = tensor(&INPUT_POLS[idx / 4].projector(), &INPUT_POLS[idx % 4].projector());
            (
                input_label(idx),
                DensityMatrix::new(m).expect("product of pure projectors"),
            )
        })
        .collect()
}

/// Row `αβ` holds the coefficients of `rho_αβ` over the matrix units `|j><k|`
/// (row-major in `jk`).
pub fn physical_basis_matrix() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(16, 16);
    for (row, (_, state)) in input_basis_states().iter().enumerate() {
        for jk in 0..16 {
            m[(row, jk)] = state.matrix()[(jk / 4, jk % 4)];
        }
    }
    m
}

/// Inverse of [`physical_basis_matrix`]: `rho_jk = sum_αβ (M^-1)_{jk,αβ} rho_αβ`.
pub fn physical_basis_inverse() -> &'static ComplexMatrix {
    static M_INV: OnceLock<ComplexMatrix> = OnceLock::new();
    M_INV.get_or_init(|| {
        let i = c(0.0, 1.0);
        let a = c(0.5, 0.5);
        let ac = a.conj();
        let h = c(0.5, 0.0);
        let ih = c(0.0, 0.5);
        let (o, z) = (ONE, ZERO);
        let rows: [[num_complex::Complex64; 16]; 16] = [
            [o, z, z, z, z, z, z, z, z, z, z, z, z, z, z, z],
            [-a, -a, o, i, z, z, z, z, z, z, z, z, z, z, z, z],
            [-a, z, z, z, -a, z, z, z, o, z, z, z, i, z, z, z],
            [ih, ih, -a, ac, ih, ih, -a, ac, -a, -a, o, i, ac, ac, i, -o],
            [-ac, -ac, o, -i, z, z, z, z, z, z, z, z, z, z, z, z],
            [z, o, z, z, z, z, z, z, z, z, z, z, z, z, z, z],
            [h, h, -a, -ac, h, h, -a, -ac, -ac, -ac, o, -i, -a, -a, i, o],
            [z, -a, z, z, z, -a, z, z, z, o, z, z, z, i, z, z],
            [-ac, z, z, z, -ac, z, z, z, o, z, z, z, -i, z, z, z],
            [h, h, -ac, -a, h, h, -ac, -a, -a, -a, o, i, -ac, -ac, -i, o],
            [z, z, z, z, o, z, z, z, z, z, z, z, z, z, z, z],
            [z, z, z, z, -a, -a, o, i, z, z, z, z, z, z, z, z],
            [-ih, -ih, -ac, a, -ih, -ih, -ac, a, -ac, -ac, o, -i, a, a, -i, -o],
            [z, -ac, z, z, z, -ac, z, z, z, o, z, z, z, -i, z, z],
            [z, z, z, z, -ac, -ac, o, -i, z, z, z, z, z, z, z, z],
            [z, z, z, z, z, o, z, z, z, z, z, z, z, z, z, z],
        ];
        ComplexMatrix::from_fn(16, 16, |r, col| rows[r][col])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Tomographic { shots: u64, seed: u64 },
}

/// Output states `E(rho_αβ)` keyed by input label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDataset {
    pub outputs: BTreeMap<String, DensityMatrix>,
    pub provenance: Provenance,
}

impl ProcessDataset {
    /// From outputs in input order.
    pub fn from_ordered(outputs: Vec<DensityMatrix>, provenance: Provenance) -> Result<Self> {
        if outputs.len() != 16 {
            return Err(Error::Missing(format!(
                "expected 16 outputs, got {}",
                outputs.len()
            )));
        }
        Ok(Self {
            outputs: outputs
                .into_iter()
                .enumerate()
                .map(|(idx, s)| (input_label(idx), s))
                .collect(),
            provenance,
        })
    }

    /// Output for input `idx = 4 α + β`.
    pub fn output(&self, idx: usize) -> Result<&DensityMatrix> {
        let label = input_label(idx);
        let out = self
            .outputs
            .get(&label)
            .ok_or_else(|| Error::Missing(format!("output for input {label}")))?;
        if out.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: "4".into(),
                got: out.dim().to_string(),
            });
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for idx in 0..16 {
            self.output(idx)?;
        }
        if self.outputs.len() != 16 {
            return Err(Error::InvalidRecord(format!(
                "dataset has {} outputs; expected exactly the 16 input labels",
                self.outputs.len()
            )));
        }
        Ok(())
    }
}

/// `E(|j><k|)` for the sixteen matrix units, row-major in `jk`, by linearity.
pub fn physical_to_matrix_units(ds: &ProcessDataset) -> Result<Vec<ComplexMatrix>> {
    ds.validate()?;
    let m_inv = physical_basis_inverse();
    let outputs: Vec<&ComplexMatrix> = (0..16)
        .map(|idx| ds.output(idx).map(|s| s.matrix()))
        .collect::<Result<_>>()?;
    Ok((0..16)
        .map(|jk| {
            let mut acc = ComplexMatrix::zeros(4, 4);
            for (ab, out) in outputs.iter().enumerate() {
                let coef = m_inv[(jk, ab)];
                if coef != ZERO {
                    acc += out.map(|z| z * coef);
                }
            }
            acc
        })
        .collect())
}

/// Process matrix in the Pauli-product basis: `E(rho) = sum_mn chi_mn P_m rho P_n^dag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiMatrix {
    #[serde(with = "complex_matrix")]
    matrix: ComplexMatrix,
}

impl ChiMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.shape() != (16, 16) {
            return Err(Error::DimensionMismatch {
                expected: "16x16".into(),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-9 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn entry(&self, m: &str, n: &str) -> Result<num_complex::Complex64> {
        let find = |label: &str| {
            (0..16)
                .find(|&k| pauli_product_label(k) == label)
                .ok_or_else(|| Error::UnknownName(label.to_string()))
        };
        Ok(self.matrix[(find(m)?, find(n)?)])
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&hermitian_part(&self.matrix))
            .expect("Hermitian part")
            .values
    }

    /// `sum_mn chi_mn P_n^dag P_m`; the identity for trace-preserving processes.
    pub fn completeness(&self) -> ComplexMatrix {
        let basis = pauli_product_basis();
        let mut out = ComplexMatrix::zeros(4, 4);
        for m in 0..16 {
            for n in 0..16 {
                let w = self.matrix[(m, n)];
                if w != ZERO {
                    out += (basis[n].adjoint() * &basis[m]).map(|z| z * w);
                }
            }
        }
        out
    }

    /// Fixed-width table with rows and columns tagged `II .. ZZ`.
    pub fn pretty(&self) -> String {
        let mut s = String::from("      ");
        for n in 0..16 {
            s.push_str(&format!("{:>16}", pauli_product_label(n)));
        }
        s.push('\n');
        for m in 0..16 {
            s.push_str(&format!("{:>6}", pauli_product_label(m)));
            for n in 0..16 {
                let z = self.matrix[(m, n)];
                let re = if z.re.abs() < 5e-5 { 0.0 } else { z.re };
                let im = if z.im.abs() < 5e-5 { 0.0 } else { z.im };
                s.push_str(&format!("{:>16}", format!("{re:.4}{im:+.4}i")));
            }
            s.push('\n');
        }
        s
    }
}

/// Pauli-basis labels in matrix order.
pub fn chi_labels() -> Vec<String> {
    (0..16).map(pauli_product_label).collect()
}

fn block_k() -> &'static ComplexMatrix {
    static K: OnceLock<ComplexMatrix> = OnceLock::new();
    K.get_or_init(|| {
        let swap = crate::channels::StandardGate::Swap.matrix();
        let p = tensor(&tensor(&identity(2), &swap), &identity(2));
        let l1 = tensor(&pauli(3), &identity(2)) + tensor(&pauli(1), &pauli(1));
        let lambda = tensor(&l1, &l1).scale(0.25);
        p * lambda
    })
}

/// Diagonal phases taking the block construction's `{I, X, -iY, Z}` products to Pauli products.
fn block_phases() -> ComplexVector {
    let single = [ONE, ONE, c(0.0, -1.0), ONE];
    ComplexVector::from_fn(16, |k, _| single[k / 4] * single[k % 4])
}

/// Block construction from the matrix-unit images: `chi = D K^T B K D^dag` where block
/// `(j, k)` of `B` is `E(|j><k|)`.
pub fn chi_block_from_units(units: &[ComplexMatrix]) -> Result<ChiMatrix> {
    check_units(units)?;
    let mut b = ComplexMatrix::zeros(16, 16);
    for (jk, e) in units.iter().enumerate() {
        let (j, k) = (jk / 4, jk % 4);
        b.view_mut((4 * j, 4 * k), (4, 4)).copy_from(e);
    }
    let k = block_k();
    let raw = k.transpose() * b * k;
    let d = block_phases();
    let chi = ComplexMatrix::from_fn(16, 16, |m, n| d[m] * raw[(m, n)] * d[n].conj());
    ChiMatrix::new(hermitian_part_if_close(chi)?)
}

pub fn chi_block(ds: &ProcessDataset) -> Result<ChiMatrix> {
    chi_block_from_units(&physical_to_matrix_units(ds)?)
}

fn hermitian_part_if_close(m: ComplexMatrix) -> Result<ComplexMatrix> {
    let dev = hermiticity_deviation(&m);
    if dev > 1e-9 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(hermitian_part(&m))
}

fn check_units(units: &[ComplexMatrix]) -> Result<()> {
    if units.len() != 16 || units.iter().any(|u| u.shape() != (4, 4)) {
        return Err(Error::DimensionMismatch {
            expected: "16 matrices of 4x4".into(),
            got: format!("{} matrices", units.len()),
        });
    }
    Ok(())
}

/// Pseudo-inverse of `beta`, with `beta_{(i,j),(m,n)}` the coefficient of unit `j` in
/// `P_m |i><i'| P_n^dag`; indices flattened first-index-fastest.
fn beta_pinv() -> Result<&'static ComplexMatrix> {
    static PINV: OnceLock<std::result::Result<ComplexMatrix, String>> = OnceLock::new();
    PINV.get_or_init(|| {
        let basis = pauli_product_basis();
        let beta = ComplexMatrix::from_fn(256, 256, |row, col| {
            let (i, j) = (row % 16, row / 16);
            let (m, n) = (col % 16, col / 16);
            let (ir, ic) = (i / 4, i % 4);
            let (jr, jc) = (j / 4, j % 4);
            basis[m][(jr, ir)] * basis[n][(jc, ic)].conj()
        });
        let svd = beta.svd(true, true);
        let max = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * max).count();
        if rank < 256 {
            return Err(format!("beta has rank {rank} < 256"));
        }
        svd.pseudo_inverse(1e-10 * max).map_err(|e| e.to_string())
    })
    .as_ref()
    .map_err(|e| Error::Numerical(e.clone()))
}

/// `chi` from `lambda = beta chi`, with `lambda_ij` the coefficient of unit `j` in `E(unit_i)`.
pub fn chi_via_beta_from_units(units: &[ComplexMatrix]) -> Result<ChiMatrix> {
    check_units(units)?;
    let lambda = ComplexVector::from_fn(256, |row, _| {
        let (i, j) = (row % 16, row / 16);
        units[i][(j / 4, j % 4)]
    });
    let chi_vec = beta_pinv()? * lambda;
    let chi = ComplexMatrix::from_fn(16, 16, |m, n| chi_vec[m + 16 * n]);
    ChiMatrix::new(hermitian_part_if_close(chi)?)
}

pub fn chi_via_beta(ds: &ProcessDataset) -> Result<ChiMatrix> {
    chi_via_beta_from_units(&physical_to_matrix_units(ds)?)
}

/// Kraus eigenvalues below this are dropped.
pub const KRAUS_RANK_CUTOFF: f64 = 1e-10;
/// Eigenvalues below this mean the data is not completely positive.
pub const CP_VIOLATION: f64 = -1e-6;
/// Completeness tolerance for reconstructed channels.
pub const RECONSTRUCTION_TP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrausExtraction {
    pub channel: QuantumChannel,
    /// Eigenvalues of `chi`, descending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues dropped below the rank cutoff.
    pub dropped: usize,
    /// Total absolute weight of the dropped eigenvalues.
    pub clamped_mass: f64,
    /// Smallest and largest eigenvalue of `sum E^dag E` when they strayed from one and the
    /// operators were replaced by `E_k S^{-1/2}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_from: Option<[f64; 2]>,
}

/// Handling of `chi` eigenvalues below [`CP_VIOLATION`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeEigenvalues {
    #[default]
    Reject,
    /// Drop them as well, projecting onto the positive cone; the dropped weight is reported.
    Clamp,
}

/// `E_k = sqrt(d_k) sum_m U_mk P_m` from `chi = U D U^dag`.
pub fn kraus_from_chi(chi: &ChiMatrix) -> Result<KrausExtraction> {
    kraus_from_chi_with(chi, NegativeEigenvalues::Reject)
}

pub fn kraus_from_chi_with(chi: &ChiMatrix, policy: NegativeEigenvalues) -> Result<KrausExtraction> {
    let eig = hermitian_eig(&hermitian_part(chi.matrix()))?;
    let min = *eig.values.last().expect("16 eigenvalues");
    if min < CP_VIOLATION && policy == NegativeEigenvalues::Reject {
        return Err(Error::NotCompletelyPositive { eigenvalue: min });
    }
    let basis = pauli_product_basis();
    let mut kraus = Vec::new();
    let mut dropped = 0;
    let mut clamped_mass = 0.0;
    for (k, &d) in eig.values.iter().enumerate() {
        if d <= KRAUS_RANK_CUTOFF {
            dropped += 1;
            clamped_mass += d.abs();
            continue;
        }
        let mut op = ComplexMatrix::zeros(4, 4);
        for (m, p) in basis.iter().enumerate() {
            let coef = eig.vectors[(m, k)] * d.sqrt();
            op += p.map(|z| z * coef);
        }
        kraus.push(op);
    }
    if kraus.is_empty() {
        return Err(Error::Numerical("chi has no positive eigenvalues".into()));
    }
    let completeness = hermitian_part(&crate::channels::kraus_completeness(&kraus));
    let s_eig = hermitian_eig(&completeness)?;
    let (lo, hi) = (*s_eig.values.last().expect("4 eigenvalues"), s_eig.values[0]);
    let normalized_from = if hi - 1.0 > RECONSTRUCTION_TP_TOL || 1.0 - lo > RECONSTRUCTION_TP_TOL {
        if lo <= 1e-6 {
            return Err(Error::Numerical(format!(
                "reconstructed Kraus operators are rank deficient (sum E^dag E eigenvalue {lo:.3e})"
            )));
        }
        let inv_sqrt = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            s_eig
                .values
                .iter()
                .map(|v| num_complex::Complex64::new(1.0 / v.sqrt(), 0.0)),
        ));
        let inv_sqrt = &s_eig.vectors * inv_sqrt * s_eig.vectors.adjoint();
        kraus.iter_mut().for_each(|k| *k = &*k * &inv_sqrt);
        Some([lo, hi])
    } else {
        None
    };
    let channel = QuantumChannel::with_tolerance("reconstructed", kraus, RECONSTRUCTION_TP_TOL)?;
    Ok(KrausExtraction {
        channel,
        eigenvalues: eig.values,
        dropped,
        clamped_mass,
        normalized_from,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SqptMode {
    Exact,
    /// State tomography of every output with `shots` per setting, reconstructed by maximum likelihood.
    Shots {
        shots: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqptResult {
    pub dataset: ProcessDataset,
    pub chi: ChiMatrix,
    pub kraus: KrausExtraction,
    pub warnings: Vec<String>,
}

/// Prepare the sixteen inputs, apply the channel, reconstruct each output (exactly or by
/// simulated tomography), then build `chi` by the block route and extract Kraus operators.
pub fn run_sqpt(ch: &QuantumChannel, mode: SqptMode, exec: Exec) -> Result<SqptResult> {
    if ch.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4".into(),
            got: ch.dim().to_string(),
        });
    }
    if !ch.is_trace_preserving() {
        return Err(Error::InvalidChannel(
            "process tomography requires a trace-preserving channel".into(),
        ));
    }
    let inputs = input_basis_states();
    let results = exec.map_indexed(16, |idx| -> Result<(DensityMatrix, Vec<String>)> {
        let out = apply_channel(ch, &inputs[idx].1)?.state;
        match mode {
            SqptMode::Exact => Ok((out, Vec::new())),
            SqptMode::Shots { shots, seed } => {
                let rec = simulate_tomography(&out, Some(shots), item_seed(seed, idx as u64))?;
                let mle = mle_reconstruct(&rec, &MleConfig::default())?;
                let warnings = mle
                    .warnings
                    .into_iter()
                    .map(|w| format!("output {}: {w}", inputs[idx].0))
                    .collect();
                Ok((mle.state, warnings))
            }
        }
    });
    let mut outputs = Vec::with_capacity(16);
    let mut warnings = Vec::new();
    for r in results {
        let (state, w) = r?;
        outputs.push(state);
        warnings.extend(w);
    }
    let provenance = match mode {
        SqptMode::Exact => Provenance::Exact,
        SqptMode::Shots { shots, seed } => Provenance::Tomographic { shots, seed },
    };
    let dataset = ProcessDataset::from_ordered(outputs, provenance)?;
    let chi = chi_block(&dataset)?;
    let policy = match mode {
        SqptMode::Exact => NegativeEigenvalues::Reject,
        SqptMode::Shots { .. } => NegativeEigenvalues::Clamp,
    };
    let kraus = kraus_from_chi_with(&chi, policy)?;
    if kraus.clamped_mass > 1e-9 {
        warnings.push(format!(
            "{} chi eigenvalues below {KRAUS_RANK_CUTOFF:e} dropped (total weight {:.3e})",
            kraus.dropped, kraus.clamped_mass
        ));
    }
    if let Some([lo, hi]) = kraus.normalized_from {
        warnings.push(format!(
            "Kraus operators normalized to a trace-preserving set: sum E^dag E had eigenvalues in [{lo:.6}, {hi:.6}]"
        ));
    }
    Ok(SqptResult {
        dataset,
        chi,
        kraus,
        warnings,
    })
}

/// Exact dataset for a channel, without tomography.
pub fn exact_dataset(ch: &QuantumChannel) -> Result<ProcessDataset> {
    let outputs = input_basis_states()
        .iter()
        .map(|(_, s)| apply_channel(ch, s).map(|o| o.state))
        .collect::<Result<Vec<_>>>()?;
    ProcessDataset::from_ordered(outputs, Provenance::Exact)
}
