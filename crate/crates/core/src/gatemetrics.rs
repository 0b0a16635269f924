//! Gate-level comparison of a channel with a target unitary: minimum gate
//! fidelity, average gate fidelity and Jamiołkowski process fidelity.
//!
//! All three use the squared-overlap convention, so for a unitary target
//! `F_avg = (d F_pro + 1) / (d + 1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::exec::{item_seed, Exec};
use crate::linalg::{c, pauli_product_basis, tensor, trace, ComplexMatrix, ComplexVector, ZERO};
use crate::optim::NelderMead;
use crate::state::{random_pure_state, seeded_rng, state_fidelity, DensityMatrix, PureState};

fn target_unitary(target: &QuantumChannel) -> Result<&ComplexMatrix> {
    target.as_unitary()
}

fn check_same_dim(target: &QuantumChannel, actual: &QuantumChannel) -> Result<()> {
    if target.dim() != actual.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim().to_string(),
            got: actual.dim().to_string(),
        });
    }
    Ok(())
}

/// `<psi| U^dag E(|psi><psi|) U |psi>`, computed as `sum_k |<U psi| E_k |psi>|^2`.
pub fn state_gate_fidelity(u: &ComplexMatrix, actual: &QuantumChannel, psi: &ComplexVector) -> f64 {
    let phi = u * psi;
    actual
        .kraus()
        .iter()
        .map(|k| phi.dotc(&(k * psi)).norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinFidelityConfig {
    pub restarts: usize,
    pub seed: u64,
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for MinFidelityConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            f_tol: 1e-10,
            max_evals: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinFidelity {
    /// Value at `certificate`; an upper bound on the true minimum.
    pub value: f64,
    /// Amplitudes `[re, im]` of the minimizing state.
    pub certificate: Vec<[f64; 2]>,
    pub restarts: usize,
    pub converged_restarts: usize,
    pub evaluations: usize,
}

impl MinFidelity {
    pub fn certificate_state(&self) -> Result<PureState> {
        PureState::from_slice(&self.certificate.iter().map(|z| c(z[0], z[1])).collect::<Vec<_>>())
    }
}

fn vector_from_params(x: &[f64]) -> Option<ComplexVector> {
    let v = ComplexVector::from_fn(x.len() / 2, |i, _| c(x[2 * i], x[2 * i + 1]));
    let n = v.norm();
    (n > 1e-12 && n.is_finite()).then(|| v.unscale(n))
}

/// Minimum over pure states of the state gate fidelity, by multi-start simplex
/// search over unnormalized amplitudes.
pub fn min_gate_fidelity(
    target: &QuantumChannel,
    actual: &QuantumChannel,
    cfg: &MinFidelityConfig,
    exec: Exec,
) -> Result<MinFidelity> {
    check_same_dim(target, actual)?;
    let u = target_unitary(target)?;
    if cfg.restarts == 0 {
        return Err(Error::OutOfRange("at least one restart is required".into()));
    }
    let d = u.nrows();
    let nm = NelderMead {
        initial_step: 0.3,
        f_tol: cfg.f_tol,
        max_evals: cfg.max_evals,
    };
    let runs = exec.map_indexed(cfg.restarts, |r| {
        let mut rng = seeded_rng(item_seed(cfg.seed, r as u64));
        let start = random_pure_state(d, &mut rng);
        let x0: Vec<f64> = start.amplitudes().iter().flat_map(|z| [z.re, z.im]).collect();
        nm.minimize(
            |x| match vector_from_params(x) {
                Some(psi) => state_gate_fidelity(u, actual, &psi),
                None => f64::INFINITY,
            },
            &x0,
        )
    });
    let evaluations = runs.iter().map(|m| m.evaluations).sum();
    let converged_restarts = runs.iter().filter(|m| m.converged).count();
    let best = runs
        .into_iter()
        .filter(|m| m.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Numerical("gate fidelity minimization failed on every restart".into()))?;
    let psi = vector_from_params(&best.x).expect("finite optimum has nonzero amplitudes");
    Ok(MinFidelity {
        value: state_gate_fidelity(u, actual, &psi).clamp(0.0, 1.0),
        certificate: psi.iter().map(|z| [z.re, z.im]).collect(),
        restarts: cfg.restarts,
        converged_restarts,
        evaluations,
    })
}

/// `E(A)` for an arbitrary operator through the matrix-unit images.
fn act_by_linearity(units: &[ComplexMatrix], a: &ComplexMatrix) -> ComplexMatrix {
    let d = a.nrows();
    let mut out = ComplexMatrix::zeros(d, d);
    for (idx, img) in units.iter().enumerate() {
        let w = a[(idx / d, idx % d)];
        if w != ZERO {
            out += img.map(|z| z * w);
        }
    }
    out
}

/// `1/5 + (1/80) sum_j Tr(U P_j^dag U^dag E(P_j))` over the two-qubit Pauli products.
pub fn average_gate_fidelity(target: &QuantumChannel, actual: &QuantumChannel) -> Result<f64> {
    check_same_dim(target, actual)?;
    let u = target_unitary(target)?;
    if u.nrows() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4".into(),
            got: u.nrows().to_string(),
        });
    }
    if !actual.is_trace_preserving() {
        return Err(Error::InvalidChannel(
            "average gate fidelity requires a trace-preserving channel".into(),
        ));
    }
    let units = actual.matrix_unit_images();
    let sum: num_complex::Complex64 = pauli_product_basis()
        .iter()
        .map(|p| trace(&(u * p.adjoint() * u.adjoint() * act_by_linearity(&units, p))))
        .sum();
    if sum.im.abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "average gate fidelity has imaginary part {:.3e}",
            sum.im
        )));
    }
    Ok((0.2 + sum.re / 80.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

const MC_CHUNKS: usize = 64;

/// Haar average of the state gate fidelity by sampling.
pub fn haar_average_gate_fidelity(
    target: &QuantumChannel,
    actual: &QuantumChannel,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<MonteCarloEstimate> {
    check_same_dim(target, actual)?;
    let u = target_unitary(target)?;
    if samples < 2 {
        return Err(Error::OutOfRange("need at least two samples".into()));
    }
    let d = u.nrows();
    let chunks = MC_CHUNKS.min(samples);
    let partial = exec.map_indexed(chunks, |chunk| {
        let n = samples / chunks + usize::from(chunk < samples % chunks);
        let mut rng = seeded_rng(item_seed(seed, chunk as u64));
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let psi = random_pure_state(d, &mut rng);
            let f = state_gate_fidelity(u, actual, psi.amplitudes());
            s += f;
            s2 += f * f;
        }
        (s, s2)
    });
    let (s, s2) = partial
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// `R = (E (x) I)(|Psi><Psi|)` with `|Psi> = sum_j |jj> / sqrt(d)`, i.e.
/// `R = (1/d) sum_jk E(|j><k|) (x) |j><k|`, rescaled to unit trace.
pub fn jamiolkowski_state(ch: &QuantumChannel) -> Result<DensityMatrix> {
    let d = ch.dim();
    let mut r = ComplexMatrix::zeros(d * d, d * d);
    for (idx, img) in ch.matrix_unit_images().iter().enumerate() {
        r += tensor(img, &crate::linalg::matrix_unit(d, idx / d, idx % d));
    }
    let tr = trace(&r).re;
    if tr <= 1e-12 {
        return Err(Error::InvalidChannel("channel annihilates every state".into()));
    }
    DensityMatrix::from_unnormalized(crate::linalg::hermitian_part(&r))
}

/// Squared Uhlmann fidelity of the Jamiołkowski states.
pub fn process_fidelity(a: &QuantumChannel, b: &QuantumChannel) -> Result<f64> {
    check_same_dim(a, b)?;
    let f = state_fidelity(&jamiolkowski_state(a)?, &jamiolkowski_state(b)?)?;
    Ok((f * f).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateComparison {
    pub target: QuantumChannel,
    pub actual: QuantumChannel,
    pub min_gate_fidelity: f64,
    pub average_gate_fidelity: f64,
    pub process_fidelity: f64,
    pub optimizer: MinFidelity,
}

impl GateComparison {
    pub fn new(
        target: &QuantumChannel,
        actual: &QuantumChannel,
        cfg: &MinFidelityConfig,
        exec: Exec,
    ) -> Result<Self> {
        let optimizer = min_gate_fidelity(target, actual, cfg, exec)?;
        Ok(Self {
            target: target.clone(),
            actual: actual.clone(),
            min_gate_fidelity: optimizer.value,
            average_gate_fidelity: average_gate_fidelity(target, actual)?,
            process_fidelity: process_fidelity(target, actual)?,
            optimizer,
        })
    }

    /// Three-row text table.
    pub fn summary(&self) -> String {
        format!(
            "{:<28}{:>10.6}\n{:<28}{:>10.6}\n{:<28}{:>10.6}\n",
            "gate fidelity (min)",
            self.min_gate_fidelity,
            "average gate fidelity",
            self.average_gate_fidelity,
            "isomorphism fidelity",
            self.process_fidelity
        )
    }
}

/// Uniform pure states used by sampling cross-checks.
pub fn sample_min_gate_fidelity<R: Rng + ?Sized>(
    target: &QuantumChannel,
    actual: &QuantumChannel,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let u = target_unitary(target)?;
    Ok((0..samples)
        .map(|_| state_gate_fidelity(u, actual, random_pure_state(u.nrows(), rng).amplitudes()))
        .fold(f64::INFINITY, f64::min))
}
