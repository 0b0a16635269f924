//! One- and two-qubit state reconstruction from projector probabilities or
//! counts: linear (Stokes) inversion and maximum-likelihood estimation.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channels::{multinomial, Basis};
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, hermitian_part, pauli, tensor, trace, trace_of_product, ComplexMatrix,
};
use crate::optim::Bfgs;
use crate::state::{seeded_rng, DensityMatrix};

/// Single-qubit projector labels in Stokes order: `I = |H><H| + |V><V|`, `H`, `D`, `R`.
pub const PROJECTOR_LABELS: [&str; 4] = ["I", "H", "D", "R"];

/// Pauli operator measured by each projector of [`PROJECTOR_LABELS`]: I, Z, X, Y.
const PAULI_OF_PROJECTOR: [usize; 4] = [0, 3, 1, 2];

/// Maps projector probabilities `(P_0..P_3)` to Stokes parameters.
pub const STOKES_FROM_PROBABILITIES: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [-1.0, 2.0, 0.0, 0.0],
    [-1.0, 0.0, 2.0, 0.0],
    [-1.0, 0.0, 0.0, 2.0],
];

/// Single-qubit projector `mu_k`.
pub fn projector(k: usize) -> ComplexMatrix {
    let s = 0.5;
    match k {
        0 => ComplexMatrix::identity(2, 2),
        1 => crate::linalg::from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        2 => crate::linalg::from_real_rows(2, 2, &[s, s, s, s]),
        3 => crate::linalg::from_rows(2, 2, &[c(s, 0.0), c(0.0, -s), c(0.0, s), c(s, 0.0)]),
        _ => panic!("projector index {k} out of range"),
    }
}

fn projector_index(label: &str) -> Result<usize> {
    PROJECTOR_LABELS
        .iter()
        .position(|l| *l == label)
        .ok_or_else(|| Error::InvalidRecord(format!("unknown projector label {label:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordMode {
    Probability,
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyEntry {
    /// One projector label per qubit.
    pub setting: Vec<String>,
    pub value: f64,
    /// Overrides `shots_per_setting` for this entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
}

/// Projector probabilities or click counts for the `4^n` settings `mu_i (x) mu_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub mode: RecordMode,
    pub qubits: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_setting: Option<u64>,
    pub entries: Vec<TomographyEntry>,
}

/// A record resolved into setting order: index `4 i_1 + i_2`.
#[derive(Debug, Clone, PartialEq)]
struct Resolved {
    qubits: usize,
    values: Vec<f64>,
    shots: Option<Vec<u64>>,
}

impl TomographyRecord {
    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    fn resolve(&self) -> Result<Resolved> {
        let q = self.qubits as usize;
        if !(1..=2).contains(&q) {
            return Err(Error::InvalidRecord(format!("qubits must be 1 or 2, got {q}")));
        }
        let n = 4usize.pow(q as u32);
        if self.entries.len() != n {
            return Err(Error::InvalidRecord(format!(
                "expected {n} entries for {q} qubit(s), got {}",
                self.entries.len()
            )));
        }
        let mut values = vec![f64::NAN; n];
        let mut shots = vec![0u64; n];
        for (e_idx, e) in self.entries.iter().enumerate() {
            if e.setting.len() != q {
                return Err(Error::InvalidRecord(format!(
                    "entry {e_idx}: setting has {} labels, expected {q}",
                    e.setting.len()
                )));
            }
            let mut idx = 0;
            for label in &e.setting {
                idx = 4 * idx + projector_index(label)?;
            }
            if !values[idx].is_nan() {
                return Err(Error::InvalidRecord(format!(
                    "entry {e_idx}: duplicate setting {:?}",
                    e.setting
                )));
            }
            if !e.value.is_finite() || e.value < 0.0 {
                return Err(Error::InvalidRecord(format!(
                    "entry {e_idx}: value {} must be nonnegative",
                    e.value
                )));
            }
            match self.mode {
                RecordMode::Probability => {
                    if e.value > 1.0 + 1e-12 {
                        return Err(Error::InvalidRecord(format!(
                            "entry {e_idx}: probability {} exceeds 1",
                            e.value
                        )));
                    }
                }
                RecordMode::Counts => {
                    let s = e.shots.or(self.shots_per_setting).ok_or_else(|| {
                        Error::InvalidRecord(format!("entry {e_idx}: counts mode needs shots_per_setting"))
                    })?;
                    if e.value.fract() != 0.0 || e.value > s as f64 {
                        return Err(Error::InvalidRecord(format!(
                            "entry {e_idx}: count {} is not an integer in [0, {s}]",
                            e.value
                        )));
                    }
                    shots[idx] = s;
                }
            }
            values[idx] = e.value;
        }
        Ok(Resolved {
            qubits: q,
            values,
            shots: (self.mode == RecordMode::Counts).then_some(shots),
        })
    }
}

/// Linear-inversion estimate, possibly with negative eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    pub matrix: ComplexMatrix,
    pub stokes: Vec<f64>,
    pub min_eigenvalue: f64,
}

impl LinearEstimate {
    /// Physical iff the smallest eigenvalue is at least `-1e-9`.
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= -1e-9
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix.clone())
    }

    /// Closest physical state in Hilbert–Schmidt distance.
    pub fn project(&self) -> Result<DensityMatrix> {
        project_to_physical(&self.matrix)
    }
}

fn frequencies(r: &Resolved) -> Result<Vec<f64>> {
    match &r.shots {
        None => Ok(r.values.clone()),
        Some(shots) => r
            .values
            .iter()
            .zip(shots)
            .enumerate()
            .map(|(i, (v, &s))| {
                if s == 0 {
                    Err(Error::InvalidRecord(format!(
                        "setting {i} has zero shots; linear inversion needs every setting"
                    )))
                } else {
                    Ok(v / s as f64)
                }
            })
            .collect(),
    }
}

/// Stokes parameters `S_{i_1..i_n} = sum Y_{i_1 j_1} .. Y_{i_n j_n} P_{j_1..j_n}`.
pub fn stokes_parameters(probs: &[f64], qubits: usize) -> Vec<f64> {
    let y = &STOKES_FROM_PROBABILITIES;
    match qubits {
        1 => (0..4).map(|i| (0..4).map(|j| y[i][j] * probs[j]).sum()).collect(),
        2 => {
            let mut s = vec![0.0; 16];
            for i1 in 0..4 {
                for i2 in 0..4 {
                    let mut acc = 0.0;
                    for j1 in 0..4 {
                        for j2 in 0..4 {
                            acc += y[i1][j1] * y[i2][j2] * probs[4 * j1 + j2];
                        }
                    }
                    s[4 * i1 + i2] = acc;
                }
            }
            s
        }
        _ => panic!("stokes_parameters supports 1 or 2 qubits"),
    }
}

fn assemble(stokes: &[f64], qubits: usize) -> Result<ComplexMatrix> {
    let s0 = stokes[0];
    if s0.abs() < 1e-15 {
        return Err(Error::Undefined("normalization Stokes parameter is zero".into()));
    }
    let d = 1usize << qubits;
    let mut m = ComplexMatrix::zeros(d, d);
    for (idx, s) in stokes.iter().enumerate() {
        let op = if qubits == 1 {
            pauli(PAULI_OF_PROJECTOR[idx])
        } else {
            tensor(
                &pauli(PAULI_OF_PROJECTOR[idx / 4]),
                &pauli(PAULI_OF_PROJECTOR[idx % 4]),
            )
        };
        m += op.scale(s / s0);
    }
    Ok(hermitian_part(&m.unscale(d as f64)))
}

fn linear_from_resolved(r: &Resolved) -> Result<LinearEstimate> {
    let p = frequencies(r)?;
    let stokes = stokes_parameters(&p, r.qubits);
    let matrix = assemble(&stokes, r.qubits)?;
    let min_eigenvalue = *hermitian_eig(&matrix)?.values.last().expect("nonempty");
    Ok(LinearEstimate {
        matrix,
        stokes,
        min_eigenvalue,
    })
}

/// `rho = 1/2 sum_i S_i/S_0 sigma_i` from a four-entry record.
pub fn reconstruct_single_qubit(rec: &TomographyRecord) -> Result<LinearEstimate> {
    if rec.qubits != 1 {
        return Err(Error::InvalidRecord(format!(
            "expected 1 qubit, got {}",
            rec.qubits
        )));
    }
    linear_from_resolved(&rec.resolve()?)
}

/// `rho = 1/4 sum S_{i_1 i_2}/S_{00} sigma_{i_1} (x) sigma_{i_2}` from a sixteen-entry record.
pub fn reconstruct_two_qubit_linear(rec: &TomographyRecord) -> Result<LinearEstimate> {
    if rec.qubits != 2 {
        return Err(Error::InvalidRecord(format!(
            "expected 2 qubits, got {}",
            rec.qubits
        )));
    }
    linear_from_resolved(&rec.resolve()?)
}

/// Linear inversion for either qubit count.
pub fn reconstruct_linear(rec: &TomographyRecord) -> Result<LinearEstimate> {
    linear_from_resolved(&rec.resolve()?)
}

/// Euclidean projection of a real vector onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Nearest density matrix to a Hermitian matrix in Hilbert–Schmidt norm.
pub fn project_to_physical(m: &ComplexMatrix) -> Result<DensityMatrix> {
    let eig = hermitian_eig(&hermitian_part(m))?;
    let vals = project_simplex(&eig.values);
    let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let vec = eig.vector(k);
            out += (&vec * vec.adjoint()).scale(v);
        }
    }
    DensityMatrix::from_unnormalized(hermitian_part(&out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub max_evals: usize,
    pub f_tol: f64,
    pub stall_window: usize,
    /// Extra random starting points besides the projected linear estimate.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_evals: 100_000,
            f_tol: 1e-10,
            stall_window: 10,
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: DensityMatrix,
    /// Negative log-likelihood per shot at the returned state.
    pub objective: f64,
    pub start_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

const P_FLOOR: f64 = 1e-15;

/// Single-qubit basis whose outcomes realize projector `mu_k`; `mu_0 = H + V` is read from H/V.
const BASIS_OF_PROJECTOR: [Basis; 4] = [Basis::Z, Basis::Z, Basis::X, Basis::Y];
const BASES: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

fn basis_index(b: Basis) -> usize {
    match b {
        Basis::Z => 0,
        Basis::X => 1,
        Basis::Y => 2,
    }
}

/// Local bases of the measurement run that produces setting `idx`.
fn run_of_setting(idx: usize, qubits: usize) -> Vec<Basis> {
    if qubits == 1 {
        vec![BASIS_OF_PROJECTOR[idx]]
    } else {
        vec![BASIS_OF_PROJECTOR[idx / 4], BASIS_OF_PROJECTOR[idx % 4]]
    }
}

fn run_key(bases: &[Basis]) -> usize {
    bases.iter().fold(0, |k, &b| 3 * k + basis_index(b))
}

/// Projectors onto the joint outcomes of a run, outcome bits most-significant first.
fn cell_projectors(bases: &[Basis]) -> Vec<ComplexMatrix> {
    let mut cells = vec![ComplexMatrix::identity(1, 1)];
    for b in bases {
        let outcomes = b.outcomes();
        cells = cells
            .iter()
            .flat_map(|m| outcomes.iter().map(move |o| tensor(m, &o.projector())))
            .collect();
    }
    cells
}

/// Cells of the run counted by setting `idx`: outcome 0 on qubits whose projector is not `mu_0`.
fn setting_mask(idx: usize, qubits: usize) -> Vec<bool> {
    let labels: Vec<usize> = if qubits == 1 {
        vec![idx]
    } else {
        vec![idx / 4, idx % 4]
    };
    (0..1usize << qubits)
        .map(|cell| {
            labels.iter().enumerate().all(|(q, &k)| {
                let bit = (cell >> (qubits - 1 - q)) & 1;
                k == 0 || bit == 0
            })
        })
        .collect()
}

fn basis_name(bases: &[Basis]) -> String {
    bases.iter().map(|b| format!("{b:?}")).collect()
}

/// Multinomial terms `(operator, count)`; the negative log-likelihood is `-sum n log Tr(rho E)`.
struct Likelihood {
    ops: Vec<ComplexMatrix>,
    counts: Vec<f64>,
    total: f64,
    dim: usize,
}

impl Likelihood {
    /// Groups settings by the run that produced them and recovers the counts of every
    /// distinguishable outcome block of each run. Runs whose counts are not mutually
    /// consistent fall back to one binomial term per setting.
    fn new(r: &Resolved, warnings: &mut Vec<String>) -> Result<Self> {
        let shots = r
            .shots
            .as_ref()
            .ok_or_else(|| Error::InvalidRecord("maximum likelihood needs a counts record".into()))?;
        let d = 1usize << r.qubits;
        let mut runs: Vec<(Vec<Basis>, Vec<usize>)> = Vec::new();
        for (idx, &n) in shots.iter().enumerate() {
            if n == 0 {
                warnings.push(format!(
                    "setting {} has zero shots and was excluded",
                    setting_name(idx, r.qubits)
                ));
                continue;
            }
            let bases = run_of_setting(idx, r.qubits);
            match runs.iter_mut().find(|(b, _)| run_key(b) == run_key(&bases)) {
                Some((_, members)) => members.push(idx),
                None => runs.push((bases, vec![idx])),
            }
        }

        let mut lik = Self {
            ops: Vec::new(),
            counts: Vec::new(),
            total: 0.0,
            dim: d,
        };
        for (bases, members) in &runs {
            let cells = cell_projectors(bases);
            let run_shots = shots[members[0]];
            let grouped = if members.iter().all(|&i| shots[i] == run_shots) {
                block_counts(r, members, run_shots)
            } else {
                None
            };
            match grouped {
                Some(blocks) => {
                    for (mask, count) in blocks {
                        let mut op = ComplexMatrix::zeros(d, d);
                        for (cell, &inside) in cells.iter().zip(&mask) {
                            if inside {
                                op += cell;
                            }
                        }
                        lik.push(op, count);
                    }
                }
                None => {
                    warnings.push(format!(
                        "counts of the {} run are not mutually consistent; settings treated independently",
                        basis_name(bases)
                    ));
                    for &i in members {
                        let op = setting_operator(i, r.qubits);
                        let miss = ComplexMatrix::identity(d, d) - &op;
                        lik.push(op, r.values[i]);
                        lik.push(miss, shots[i] as f64 - r.values[i]);
                    }
                }
            }
        }
        if lik.total <= 0.0 {
            return Err(Error::InvalidRecord("record has no shots".into()));
        }
        Ok(lik)
    }

    fn push(&mut self, op: ComplexMatrix, count: f64) {
        self.total += count;
        self.ops.push(op);
        self.counts.push(count);
    }

    fn nll(&self, rho: &ComplexMatrix) -> f64 {
        let mut acc = 0.0;
        for (op, &n) in self.ops.iter().zip(&self.counts) {
            if n > 0.0 {
                acc -= n * trace_of_product(rho, op).re.max(P_FLOOR).ln();
            }
        }
        acc / self.total
    }

    /// Objective and gradient with respect to the packed lower-triangular factor.
    fn value_and_gradient(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let tm = unpack(t, self.dim);
        let a = tm.adjoint() * &tm;
        let tr = trace(&a).re;
        if tr.is_nan() || tr <= 1e-300 || tr.is_infinite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::INFINITY;
        }
        let rho = a.unscale(tr);
        let mut value = 0.0;
        let mut g = ComplexMatrix::zeros(self.dim, self.dim);
        let id = ComplexMatrix::identity(self.dim, self.dim);
        for (op, &n) in self.ops.iter().zip(&self.counts) {
            if n <= 0.0 {
                continue;
            }
            let p = trace_of_product(&rho, op).re.max(P_FLOOR);
            value -= n * p.ln();
            g += (op - id.scale(p)).scale(-n / p / self.total);
        }
        let gt = g.unscale(tr) * tm.adjoint();
        pack_gradient(&gt, self.dim, grad);
        value / self.total
    }
}

fn setting_operator(idx: usize, qubits: usize) -> ComplexMatrix {
    if qubits == 1 {
        projector(idx)
    } else {
        tensor(&projector(idx / 4), &projector(idx % 4))
    }
}

/// Splits a run's cells into the blocks its settings can distinguish and solves for
/// their counts. `None` if the counts are inconsistent.
fn block_counts(r: &Resolved, members: &[usize], shots: u64) -> Option<Vec<(Vec<bool>, f64)>> {
    let n_cells = 1usize << r.qubits;
    let mut events: Vec<(Vec<bool>, f64)> = vec![(vec![true; n_cells], shots as f64)];
    events.extend(members.iter().map(|&i| (setting_mask(i, r.qubits), r.values[i])));

    let mut blocks: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
    for cell in 0..n_cells {
        let signature: Vec<bool> = events.iter().map(|(m, _)| m[cell]).collect();
        match blocks.iter_mut().find(|(sig, _)| *sig == signature) {
            Some((_, mask)) => mask[cell] = true,
            None => {
                let mut mask = vec![false; n_cells];
                mask[cell] = true;
                blocks.push((signature, mask));
            }
        }
    }
    let a = DMatrix::from_fn(
        events.len(),
        blocks.len(),
        |e, b| {
            if blocks[b].0[e] {
                1.0
            } else {
                0.0
            }
        },
    );
    let rhs = DVector::from_iterator(events.len(), events.iter().map(|(_, n)| *n));
    let svd = a.clone().svd(true, true);
    if svd.singular_values.iter().any(|&s| s < 1e-9) {
        return None;
    }
    let x = svd.solve(&rhs, 1e-12).ok()?;
    let residual = (&a * &x - &rhs).amax();
    let scale = shots as f64;
    if residual > 1e-9 * scale.max(1.0) || x.iter().any(|&v| v < -1e-9 * scale.max(1.0)) {
        return None;
    }
    Some(
        blocks
            .into_iter()
            .zip(x.iter())
            .map(|((_, mask), &n)| (mask, n.max(0.0)))
            .collect(),
    )
}

fn setting_name(idx: usize, qubits: usize) -> String {
    if qubits == 1 {
        PROJECTOR_LABELS[idx].to_string()
    } else {
        format!("{}{}", PROJECTOR_LABELS[idx / 4], PROJECTOR_LABELS[idx % 4])
    }
}

/// Packing: diagonal reals first, then (re, im) of each strictly-lower entry, row-major.
fn unpack(t: &[f64], d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(t[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in 0..i {
            m[(i, j)] = c(t[k], t[k + 1]);
            k += 2;
        }
    }
    m
}

fn pack(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut t: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
    for i in 0..d {
        for j in 0..i {
            t.push(m[(i, j)].re);
            t.push(m[(i, j)].im);
        }
    }
    t
}

/// `dL/dRe T_ab = 2 Re (G T^dag)_ba`, `dL/dIm T_ab = -2 Im (G T^dag)_ba`.
fn pack_gradient(gt: &ComplexMatrix, d: usize, out: &mut [f64]) {
    for i in 0..d {
        out[i] = 2.0 * gt[(i, i)].re;
    }
    let mut k = d;
    for i in 0..d {
        for j in 0..i {
            out[k] = 2.0 * gt[(j, i)].re;
            out[k + 1] = -2.0 * gt[(j, i)].im;
            k += 2;
        }
    }
}

/// Lower-triangular `T` with `T^dag T = rho`, via Cholesky of the index-reversed matrix.
fn factor(rho: &ComplexMatrix) -> Option<ComplexMatrix> {
    let d = rho.nrows();
    let rev = ComplexMatrix::from_fn(d, d, |i, j| rho[(d - 1 - i, d - 1 - j)]);
    let l = Cholesky::new(rev)?.unpack();
    let upper = ComplexMatrix::from_fn(d, d, |i, j| l[(d - 1 - i, d - 1 - j)]);
    Some(upper.adjoint())
}

fn state_from_packed(t: &[f64], d: usize) -> Result<DensityMatrix> {
    let tm = unpack(t, d);
    DensityMatrix::from_unnormalized(hermitian_part(&(tm.adjoint() * &tm)))
}

/// Maximum-likelihood state under independent binomial click statistics per setting,
/// parameterized as `rho = T^dag T / Tr(T^dag T)` with `T` lower triangular.
pub fn mle_reconstruct(rec: &TomographyRecord, config: &MleConfig) -> Result<MleResult> {
    let resolved = rec.resolve()?;
    let mut warnings = Vec::new();
    let lik = Likelihood::new(&resolved, &mut warnings)?;
    let d = lik.dim;

    let linear = linear_from_resolved(&Resolved {
        qubits: resolved.qubits,
        values: resolved
            .values
            .iter()
            .zip(resolved.shots.as_ref().expect("counts record"))
            .map(|(v, &s)| if s == 0 { f64::NAN } else { v / s as f64 })
            .collect(),
        shots: None,
    });
    let projected = match linear {
        Ok(est) if est.matrix.iter().all(|z| z.is_finite()) => project_to_physical(&est.matrix)?,
        _ => DensityMatrix::maximally_mixed(d),
    };
    let start_objective = lik.nll(projected.matrix());

    let min_eig = *projected.eigenvalues().last().expect("nonempty");
    let seed_state = if min_eig > 1e-8 {
        projected.matrix().clone()
    } else {
        projected.matrix().scale(1.0 - 1e-3) + ComplexMatrix::identity(d, d).scale(1e-3 / d as f64)
    };
    let mut starts = vec![pack(&factor(&seed_state).ok_or_else(|| {
        Error::Numerical("Cholesky factorization of the starting state failed".into())
    })?)];
    if config.restarts > 0 {
        use rand::Rng;
        let mut rng = seeded_rng(config.seed);
        for _ in 0..config.restarts {
            starts.push((0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }

    let bfgs = Bfgs {
        f_tol: config.f_tol,
        stall_window: config.stall_window,
        grad_tol: 1e-12,
        max_evals: config.max_evals,
    };
    let mut best_state = projected.clone();
    let mut best_value = start_objective;
    let mut evaluations = 0;
    let mut converged = true;
    for start in &starts {
        let m = bfgs.minimize(|t, g| lik.value_and_gradient(t, g), start);
        evaluations += m.evaluations;
        converged &= m.converged;
        if let Ok(state) = state_from_packed(&m.x, d) {
            let value = lik.nll(state.matrix());
            if value < best_value {
                best_value = value;
                best_state = state;
            }
        }
    }
    if !converged {
        warnings.push(format!(
            "optimizer did not converge within {} evaluations; returning best iterate",
            config.max_evals
        ));
    }
    Ok(MleResult {
        state: best_state,
        objective: best_value,
        start_objective,
        evaluations,
        converged,
        warnings,
    })
}

/// Forward model. Exact mode returns projector probabilities. Shot mode runs `shots`
/// trials in each of the `3^n` local-basis combinations and reports, for every setting,
/// the clicks of its run that fall inside the setting's projector (`mu_0` counts both
/// H/V outcomes).
pub fn simulate_tomography(rho: &DensityMatrix, shots: Option<u64>, seed: u64) -> Result<TomographyRecord> {
    let qubits = match rho.dim() {
        2 => 1,
        4 => 2,
        d => {
            return Err(Error::DimensionMismatch {
                expected: "2 or 4".into(),
                got: d.to_string(),
            })
        }
    };
    let n = 4usize.pow(qubits as u32);
    let mut run_counts: Vec<(usize, Vec<u64>)> = Vec::new();
    if let Some(s) = shots {
        let mut rng = seeded_rng(seed);
        let combos: Vec<Vec<Basis>> = if qubits == 1 {
            BASES.iter().map(|&b| vec![b]).collect()
        } else {
            BASES
                .iter()
                .flat_map(|&a| BASES.iter().map(move |&b| vec![a, b]))
                .collect()
        };
        for bases in combos {
            let probs: Vec<f64> = cell_projectors(&bases)
                .iter()
                .map(|cell| rho.expectation(cell).re.max(0.0))
                .collect();
            let total: f64 = probs.iter().sum();
            let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
            run_counts.push((run_key(&bases), multinomial(&probs, s, &mut rng)?));
        }
    }
    let mut entries = Vec::with_capacity(n);
    for idx in 0..n {
        let setting = if qubits == 1 {
            vec![PROJECTOR_LABELS[idx].to_string()]
        } else {
            vec![
                PROJECTOR_LABELS[idx / 4].to_string(),
                PROJECTOR_LABELS[idx % 4].to_string(),
            ]
        };
        let value = match shots {
            None => rho.expectation(&setting_operator(idx, qubits)).re.clamp(0.0, 1.0),
            Some(_) => {
                let key = run_key(&run_of_setting(idx, qubits));
                let counts = &run_counts
                    .iter()
                    .find(|(k, _)| *k == key)
                    .expect("every run sampled")
                    .1;
                setting_mask(idx, qubits)
                    .iter()
                    .zip(counts)
                    .filter(|(inside, _)| **inside)
                    .map(|(_, &c)| c)
                    .sum::<u64>() as f64
            }
        };
        entries.push(TomographyEntry {
            setting,
            value,
            shots: None,
        });
    }
    Ok(TomographyRecord {
        mode: if shots.is_some() {
            RecordMode::Counts
        } else {
            RecordMode::Probability
        },
        qubits: qubits as u8,
        shots_per_setting: shots,
        entries,
    })
}

/// Exact probabilities scaled to (possibly fractional) counts.
pub fn probabilities_as_counts(rec: &TomographyRecord, shots: u64) -> TomographyRecord {
    TomographyRecord {
        mode: RecordMode::Counts,
        qubits: rec.qubits,
        shots_per_setting: Some(shots),
        entries: rec
            .entries
            .iter()
            .map(|e| TomographyEntry {
                setting: e.setting.clone(),
                value: (e.value * shots as f64).round(),
                shots: None,
            })
            .collect(),
    }
}
