//! Scalar indicators of CNOT-like operation: truth tables, visibilities,
//! parity, Bell-state fidelities, entanglement witnesses, tangle, linear
//! entropy and the pure-state CHSH relation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channels::{
    coincidence_probability, parity_settings, Analyzer, ProbabilityRecord, QuantumChannel,
};
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, identity, matrix_unit, outer, partial_transpose, pauli, pauli_product_basis, tensor,
    ComplexMatrix, Subsystem,
};
use crate::state::{Bell, DensityMatrix, PureState};

/// Row `i` holds the output distribution for logical input `i` (00, 01, 10, 11).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthTable(pub [[f64; 4]; 4]);

impl TruthTable {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
                return Err(Error::OutOfRange(format!(
                    "truth table row {i} has entry outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::OutOfRange(format!("truth table row {i} sums to {sum}")));
            }
        }
        Ok(Self(rows))
    }

    pub fn ideal_cnot() -> Self {
        Self([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.0
    }
}

/// Average logical-basis fidelity `Tr(M_exp M_0^T) / 4`.
pub fn inquisition(m_exp: &TruthTable, m_ideal: &TruthTable) -> f64 {
    let mut tr = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            tr += m_exp.0[i][j] * m_ideal.0[i][j];
        }
    }
    tr / 4.0
}

/// Entry `(i, j) = <j| E(|i><i|) |j>` over the logical basis.
pub fn truth_table_of_channel(ch: &QuantumChannel) -> Result<TruthTable> {
    if !ch.is_trace_preserving() {
        return Err(Error::InvalidChannel(
            "truth table requires a trace-preserving channel".into(),
        ));
    }
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        let out = ch.act(&matrix_unit(4, i, i));
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = out[(j, j)].re.clamp(0.0, 1.0);
        }
    }
    TruthTable::new(rows)
}

/// `(P_00 - P_01) / (P_00 + P_01)`.
pub fn logical_visibility(p00: f64, p01: f64) -> Result<f64> {
    let den = p00 + p01;
    if den <= 0.0 {
        return Err(Error::Undefined("logical visibility with P00 + P01 = 0".into()));
    }
    Ok((p00 - p01) / den)
}

/// Equal-weight visibility `(P_a - P_b) / (P_a + P_b)` with both analyzers at
/// `theta = pi/4`; `P_b` shifts the target phase by `pi`.
pub fn equal_weight_visibility(rho: &DensityMatrix, phi_c: f64, phi_t: f64) -> Result<f64> {
    let ctrl = Analyzer::equal_weight(phi_c);
    let pa = coincidence_probability(rho, &(ctrl, Analyzer::equal_weight(phi_t)));
    let pb = coincidence_probability(rho, &(ctrl, Analyzer::equal_weight(phi_t + PI)));
    let den = pa + pb;
    if den <= 1e-15 {
        return Err(Error::Undefined(
            "equal-weight visibility with zero counts".into(),
        ));
    }
    Ok((pa - pb) / den)
}

/// Two-qubit parity `P(phi,phi) + P(phi+pi,phi+pi) - P(phi,phi+pi) - P(phi+pi,phi)`.
pub fn parity(rho: &DensityMatrix, phi: f64) -> f64 {
    let [aa, ab, ba, bb] = parity_settings(phi).map(|s| coincidence_probability(rho, &s));
    aa + bb - ab - ba
}

/// Parity sampled at `n` evenly spaced phases in `[0, pi)`.
pub fn parity_fringe(rho: &DensityMatrix, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let phi = PI * k as f64 / n as f64;
            (phi, parity(rho, phi))
        })
        .collect()
}

/// Least-squares fit of `a + b cos 2phi + c sin 2phi` to fringe samples over a
/// uniform grid; returns `(a, b, c)`.
pub fn fit_two_phi_fringe(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let b = 2.0 * samples.iter().map(|(p, v)| v * (2.0 * p).cos()).sum::<f64>() / n;
    let cc = 2.0 * samples.iter().map(|(p, v)| v * (2.0 * p).sin()).sum::<f64>() / n;
    (mean, b, cc)
}

/// `Tr(rho |bell><bell|)`.
pub fn bell_fidelity(rho: &DensityMatrix, which: Bell) -> f64 {
    rho.expectation(&which.state().projector()).re
}

/// Fidelities with the four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellFidelities {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
}

impl BellFidelities {
    pub fn get(&self, which: Bell) -> f64 {
        match which {
            Bell::PhiPlus => self.phi_plus,
            Bell::PhiMinus => self.phi_minus,
            Bell::PsiPlus => self.psi_plus,
            Bell::PsiMinus => self.psi_minus,
        }
    }

    pub fn of_state(rho: &DensityMatrix) -> Self {
        Self {
            phi_plus: bell_fidelity(rho, Bell::PhiPlus),
            phi_minus: bell_fidelity(rho, Bell::PhiMinus),
            psi_plus: bell_fidelity(rho, Bell::PsiPlus),
            psi_minus: bell_fidelity(rho, Bell::PsiMinus),
        }
    }
}

/// Settings required by the six-probability Bell fidelities.
pub const SIX_FIDELITY_SETTINGS: [&str; 6] = ["HH", "VV", "DD", "AA", "RR", "LL"];

/// Bell fidelities from the six coincidence probabilities
/// `HH, VV, DD, AA, RR, LL`:
///
/// `F_phi± = (P_HH + P_VV ± P_DD ± P_AA ∓ P_RR ∓ P_LL) / 2`,
/// `F_psi± = (1 ∓ 1 - P_HH - P_VV ± P_DD ± P_AA ± P_RR ± P_LL) / 2`.
pub fn bell_fidelity_from_six(probs: &ProbabilityRecord) -> Result<BellFidelities> {
    let [hh, vv, dd, aa, rr, ll] = SIX_FIDELITY_SETTINGS.map(|k| probs.require(k));
    let (hh, vv, dd, aa, rr, ll) = (hh?, vv?, dd?, aa?, rr?, ll?);
    Ok(BellFidelities {
        phi_plus: (hh + vv + dd + aa - rr - ll) / 2.0,
        phi_minus: (hh + vv - dd - aa + rr + ll) / 2.0,
        psi_plus: (dd + aa + rr + ll - hh - vv) / 2.0,
        psi_minus: (1.0 + 1.0 - hh - vv - dd - aa - rr - ll) / 2.0,
    })
}

/// Settings used by the six-probability witness of each Bell state.
pub fn witness_settings(which: Bell) -> [&'static str; 6] {
    match which {
        Bell::PhiPlus | Bell::PhiMinus => ["HV", "VH", "DD", "AA", "RR", "LL"],
        Bell::PsiPlus | Bell::PsiMinus => ["HH", "VV", "DD", "AA", "RL", "LR"],
    }
}

/// Hermitian observable with `Tr(W rho_sep) >= 0` on separable states.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessOperator {
    pub matrix: ComplexMatrix,
    pub target: String,
}

impl WitnessOperator {
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.matrix).re
    }

    /// Detection is strict: `<W> < 0`. Zero is reported as not detected.
    pub fn detects(&self, rho: &DensityMatrix) -> bool {
        self.expectation(rho) < 0.0
    }
}

/// Bell-state witness from its Pauli decomposition:
/// `W_phi± = (II ∓ XX ± YY - ZZ)/4`, `W_psi± = (II ∓ XX ∓ YY + ZZ)/4`.
pub fn witness_for_bell(which: Bell) -> WitnessOperator {
    let pp = |a: usize, b: usize| tensor(&pauli(a), &pauli(b));
    let (sx, sy, sz) = match which {
        Bell::PhiPlus => (-1.0, 1.0, -1.0),
        Bell::PhiMinus => (1.0, -1.0, -1.0),
        Bell::PsiPlus => (-1.0, -1.0, 1.0),
        Bell::PsiMinus => (1.0, 1.0, 1.0),
    };
    let m = (pp(0, 0) + pp(1, 1).scale(sx) + pp(2, 2).scale(sy) + pp(3, 3).scale(sz)).scale(0.25);
    WitnessOperator {
        matrix: m,
        target: which.label().to_string(),
    }
}

/// Witness expectation from six coincidence probabilities:
///
/// `<W_phi±> = (P_HV + P_VH ∓ P_DD ∓ P_AA ± P_RR ± P_LL) / 2`,
/// `<W_psi±> = (P_HH + P_VV ∓ P_DD ∓ P_AA ± P_RL ± P_LR) / 2`.
pub fn witness_expectation_from_six(probs: &ProbabilityRecord, which: Bell) -> Result<f64> {
    let keys = witness_settings(which);
    let mut p = [0.0; 6];
    for (slot, key) in p.iter_mut().zip(keys) {
        *slot = probs.require(key)?;
    }
    let [a, b, dd, aa, y1, y2] = p;
    let sign = match which {
        Bell::PhiPlus | Bell::PsiPlus => 1.0,
        Bell::PhiMinus | Bell::PsiMinus => -1.0,
    };
    Ok((a + b - sign * (dd + aa) + sign * (y1 + y2)) / 2.0)
}

fn require_maximally_entangled(phi: &PureState) -> Result<()> {
    let [a, b] = phi.schmidt_coefficients()?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if (a - s).abs() > 1e-9 || (b - s).abs() > 1e-9 {
        return Err(Error::InvalidState("state is not maximally entangled".into()));
    }
    Ok(())
}

/// Optimal witness for Werner states around `phi`: partial transpose of the
/// projector onto the minimum-eigenvalue eigenvector of `(|phi><phi|)^T2`.
pub fn optimal_werner_witness(phi: &PureState) -> Result<WitnessOperator> {
    require_maximally_entangled(phi)?;
    let pt = partial_transpose(&phi.projector(), Subsystem::Second)?;
    let eig = hermitian_eig(&pt)?;
    let n = eig.values.len();
    if (eig.values[n - 2] - eig.values[n - 1]).abs() < 1e-9 {
        return Err(Error::Numerical(
            "minimum eigenvalue of the partial transpose is degenerate".into(),
        ));
    }
    let w = eig.vector(n - 1);
    let matrix = partial_transpose(&outer(&w, &w), Subsystem::Second)?;
    Ok(WitnessOperator {
        matrix,
        target: "werner".into(),
    })
}

/// `W = lambda_max^2 I - |psi><psi|` from the largest Schmidt coefficient.
pub fn schmidt_witness(psi: &PureState) -> Result<WitnessOperator> {
    let [lmax, _] = psi.schmidt_coefficients()?;
    if lmax * lmax >= 1.0 - 1e-12 {
        return Err(Error::InvalidState(
            "product state: Schmidt witness is vacuous".into(),
        ));
    }
    Ok(WitnessOperator {
        matrix: identity(4).scale(lmax * lmax) - psi.projector(),
        target: "schmidt".into(),
    })
}

/// Eigenvalues of the state below this are treated as numerically zero when
/// forming the concurrence.
const RANK_CUTOFF: f64 = 1e-14;

/// Square roots of the eigenvalues of `rho (Y⊗Y) rho^* (Y⊗Y)`, descending,
/// padded to four entries.
///
/// Computed as singular values of `Psi^T (Y⊗Y) Psi` with `rho = Psi Psi^dag`,
/// which avoids taking square roots of round-off eigenvalues.
pub fn spin_flip_roots(rho: &DensityMatrix) -> Result<[f64; 4]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4".into(),
            got: rho.dim().to_string(),
        });
    }
    let eig = hermitian_eig(rho.matrix())?;
    let kept: Vec<usize> = (0..4).filter(|&k| eig.values[k] > RANK_CUTOFF).collect();
    if kept.is_empty() {
        return Ok([0.0; 4]);
    }
    let psi = ComplexMatrix::from_fn(4, kept.len(), |r, col| {
        eig.vectors[(r, kept[col])] * eig.values[kept[col]].sqrt()
    });
    let yy = tensor(&pauli(2), &pauli(2));
    let tau = psi.transpose() * yy * &psi;
    let mut sv: Vec<f64> = tau.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let mut out = [0.0; 4];
    for (slot, v) in out.iter_mut().zip(sv) {
        *slot = v;
    }
    Ok(out)
}

/// Concurrence `max(0, s1 - s2 - s3 - s4)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let [s1, s2, s3, s4] = spin_flip_roots(rho)?;
    Ok((s1 - s2 - s3 - s4).max(0.0))
}

/// Tangle, the squared concurrence.
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    let conc = concurrence(rho)?;
    Ok((conc * conc).min(1.0))
}

/// Linear entropy scaled to 0 for pure and 1 for maximally mixed states:
/// `d/(d-1) (1 - Tr rho^2)`.
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    let d = rho.dim() as f64;
    (d / (d - 1.0) * (1.0 - rho.purity())).clamp(0.0, 1.0)
}

/// Purity below which the pure-state CHSH relation is refused.
pub const CHSH_PURITY_GUARD: f64 = 1.0 - 1e-6;

fn require_pure(state: &DensityMatrix) -> Result<()> {
    let purity = state.purity();
    if purity <= CHSH_PURITY_GUARD {
        return Err(Error::InvalidState(format!(
            "CHSH relation holds for pure states only (purity {purity})"
        )));
    }
    Ok(())
}

/// Maximal CHSH value of a pure state with concurrence `c`: `2 sqrt(1 + c^2)`.
pub fn chsh_from_concurrence(concurrence: f64, state: &DensityMatrix) -> Result<f64> {
    require_pure(state)?;
    Ok(2.0 * (1.0 + concurrence * concurrence).sqrt())
}

/// Maximal CHSH value of a pure state with tangle `t = c^2`: `2 sqrt(1 + t)`.
pub fn chsh_from_tangle(tangle: f64, state: &DensityMatrix) -> Result<f64> {
    require_pure(state)?;
    Ok(2.0 * (1.0 + tangle).sqrt())
}

/// One reported measure with the analyzer settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEntry {
    pub value: f64,
    pub settings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Named scalar outcomes; keys are measure names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub measures: BTreeMap<String, MeasureEntry>,
}

impl MeasureReport {
    pub fn insert(&mut self, name: impl Into<String>, value: f64, settings: &[&str]) {
        self.measures.insert(
            name.into(),
            MeasureEntry {
                value,
                settings: settings.iter().map(|s| s.to_string()).collect(),
                note: None,
            },
        );
    }

    pub fn insert_noted(
        &mut self,
        name: impl Into<String>,
        value: f64,
        settings: &[&str],
        note: impl Into<String>,
    ) {
        self.measures.insert(
            name.into(),
            MeasureEntry {
                value,
                settings: settings.iter().map(|s| s.to_string()).collect(),
                note: Some(note.into()),
            },
        );
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.measures.get(name).map(|e| e.value)
    }
}

/// Expectation of the Pauli product `pauli(a) ⊗ pauli(b)`.
pub fn correlator(rho: &DensityMatrix, a: usize, b: usize) -> f64 {
    rho.expectation(&pauli_product_basis()[4 * a + b]).re
}

/// `(|00> + eps |11>) / sqrt(1 + |eps|^2)`, the CNOT output for a
/// control-superposition input with the target in `|0>`.
pub fn epsilon_output_state(eps: num_complex::Complex64) -> PureState {
    PureState::from_slice(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), eps]).expect("nonzero amplitude vector")
}
