//! Gates and noise processes as completely-positive maps in Kraus form, plus
//! analyzer settings, coincidence probabilities and finite-shot sampling.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, identity, matrix_unit, pauli, tensor, trace, trace_of_product, ComplexMatrix,
    ComplexVector, ONE, ZERO,
};
use crate::state::{DensityMatrix, PureState};

/// Tolerance on `sum_k E_k^dag E_k` against the identity.
pub const TP_TOL: f64 = 1e-9;

/// A completely-positive map stored as an ordered list of Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    label: String,
    kraus: Vec<ComplexMatrix>,
    trace_preserving: bool,
}

impl QuantumChannel {
    /// Validates that all operators share one square dimension and that
    /// `sum_k E_k^dag E_k <= I`.
    pub fn new(label: impl Into<String>, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(label, kraus, TP_TOL)
    }

    /// As [`QuantumChannel::new`] with a custom tolerance on `sum_k E_k^dag E_k`,
    /// for channels reconstructed from finite data.
    pub fn with_tolerance(label: impl Into<String>, kraus: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidChannel("no Kraus operators".into()))?;
        let dim = first.nrows();
        if kraus.iter().any(|k| k.shape() != (dim, dim)) {
            return Err(Error::InvalidChannel(
                "Kraus operators must share one square shape".into(),
            ));
        }
        let sum = kraus_completeness(&kraus);
        let eig = hermitian_eig(&sum)?;
        let max = eig.values[0];
        if max > 1.0 + tol {
            return Err(Error::InvalidChannel(format!(
                "sum of E^dag E has eigenvalue {max} > 1"
            )));
        }
        let trace_preserving = eig.values.iter().all(|v| (v - 1.0).abs() <= tol);
        Ok(Self {
            label: label.into(),
            kraus,
            trace_preserving,
        })
    }

    pub fn unitary(label: impl Into<String>, u: ComplexMatrix) -> Result<Self> {
        Self::new(label, vec![u])
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            label: "identity".into(),
            kraus: vec![identity(dim)],
            trace_preserving: true,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// The single Kraus operator of a unitary channel.
    pub fn as_unitary(&self) -> Result<&ComplexMatrix> {
        match self.kraus.as_slice() {
            [u] if crate::linalg::approx_eq(&(u.adjoint() * u), &identity(self.dim()), 1e-9) => Ok(u),
            _ => Err(Error::InvalidChannel(format!(
                "channel `{}` is not a single unitary",
                self.label
            ))),
        }
    }

    /// Linear action `sum_k E_k m E_k^dag` on an arbitrary operator.
    pub fn act(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &QuantumChannel) -> Result<QuantumChannel> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        QuantumChannel::new(format!("{}*{}", next.label, self.label), kraus)
    }

    /// Images of the matrix units `|j><k|`, row-major in `(j, k)`.
    pub fn matrix_unit_images(&self) -> Vec<ComplexMatrix> {
        let d = self.dim();
        (0..d * d)
            .map(|idx| self.act(&matrix_unit(d, idx / d, idx % d)))
            .collect()
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

pub fn kraus_completeness(kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let d = kraus[0].ncols();
    kraus
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k)
}

/// Result of [`apply_channel`].
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub state: DensityMatrix,
    /// Trace of the unnormalized output.
    pub trace: f64,
    /// Set when the channel is not trace preserving and the output was rescaled.
    pub renormalized: bool,
}

/// `E(rho) = sum_k E_k rho E_k^dag`. Non-trace-preserving channels have their
/// output renormalized and flagged.
pub fn apply_channel(ch: &QuantumChannel, rho: &DensityMatrix) -> Result<ChannelOutput> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}", ch.dim()),
            got: format!("{}", rho.dim()),
        });
    }
    let out = crate::linalg::hermitian_part(&ch.act(rho.matrix()));
    let tr = trace(&out).re;
    if ch.is_trace_preserving() {
        return Ok(ChannelOutput {
            state: DensityMatrix::new(out)?,
            trace: tr,
            renormalized: false,
        });
    }
    Ok(ChannelOutput {
        state: DensityMatrix::from_unnormalized(out)?,
        trace: tr,
        renormalized: true,
    })
}

/// Built-in single-unitary gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardGate {
    Identity,
    Cnot,
    Hadamard1,
    Hadamard2,
    X1,
    X2,
    Z1,
    Z2,
    Swap,
}

impl StandardGate {
    pub const ALL: [StandardGate; 9] = [
        StandardGate::Identity,
        StandardGate::Cnot,
        StandardGate::Hadamard1,
        StandardGate::Hadamard2,
        StandardGate::X1,
        StandardGate::X2,
        StandardGate::Z1,
        StandardGate::Z2,
        StandardGate::Swap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardGate::Identity => "identity",
            StandardGate::Cnot => "cnot",
            StandardGate::Hadamard1 => "hadamard1",
            StandardGate::Hadamard2 => "hadamard2",
            StandardGate::X1 => "x1",
            StandardGate::X2 => "x2",
            StandardGate::Z1 => "z1",
            StandardGate::Z2 => "z2",
            StandardGate::Swap => "swap",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn matrix(self) -> ComplexMatrix {
        let i2 = identity(2);
        match self {
            StandardGate::Identity => identity(4),
            StandardGate::Cnot => cnot_matrix(),
            StandardGate::Hadamard1 => tensor(&hadamard(), &i2),
            StandardGate::Hadamard2 => tensor(&i2, &hadamard()),
            StandardGate::X1 => tensor(&pauli(1), &i2),
            StandardGate::X2 => tensor(&i2, &pauli(1)),
            StandardGate::Z1 => tensor(&pauli(3), &i2),
            StandardGate::Z2 => tensor(&i2, &pauli(3)),
            StandardGate::Swap => crate::linalg::from_real_rows(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 1.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0,
                ],
            ),
        }
    }

    pub fn channel(self) -> QuantumChannel {
        QuantumChannel {
            label: self.name().to_string(),
            kraus: vec![self.matrix()],
            trace_preserving: true,
        }
    }
}

pub fn standard_gate(name: &str) -> Result<QuantumChannel> {
    Ok(StandardGate::from_name(name)?.channel())
}

/// CNOT with the first qubit as control: permutes `|10> <-> |11>`.
pub fn cnot_matrix() -> ComplexMatrix {
    crate::linalg::from_real_rows(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    )
}

pub fn hadamard() -> ComplexMatrix {
    let s = FRAC_1_SQRT_2;
    crate::linalg::from_real_rows(2, 2, &[s, s, s, -s])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemiclassicalOrientation {
    /// Measure the control and flip the target on outcome 1.
    MeasureControl,
    /// Hadamard-conjugated orientation: `{I (x) H K0 H, Z (x) H K1 H}`.
    HadamardConjugated,
}

/// Semi-classical CNOT: correct on the computational basis but incoherent.
pub fn semiclassical_cnot(orientation: SemiclassicalOrientation) -> QuantumChannel {
    let k0 = matrix_unit(2, 0, 0);
    let k1 = matrix_unit(2, 1, 1);
    let (kraus, label) = match orientation {
        SemiclassicalOrientation::MeasureControl => (
            vec![tensor(&k0, &identity(2)), tensor(&k1, &pauli(1))],
            "semiclassical_cnot",
        ),
        SemiclassicalOrientation::HadamardConjugated => {
            let h = hadamard();
            (
                vec![
                    tensor(&identity(2), &(&h * &k0 * &h)),
                    tensor(&pauli(3), &(&h * &k1 * &h)),
                ],
                "semiclassical_cnot_h",
            )
        }
    };
    QuantumChannel::new(label, kraus).expect("semi-classical Kraus sets are complete")
}

/// Random channel with `rank` Kraus operators: blocks of the first `dim` columns of a
/// Haar-random unitary on `dim * rank` levels.
pub fn random_channel<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> QuantumChannel {
    let u = crate::state::random_unitary(dim * rank, rng);
    let kraus = (0..rank)
        .map(|env| ComplexMatrix::from_fn(dim, dim, |r, col| u[(dim * env + r, col)]))
        .collect();
    QuantumChannel::with_tolerance("random", kraus, 1e-9).expect("isometry blocks form a channel")
}

/// Applies CNOT with probability `p`, otherwise does nothing.
pub fn probabilistic_cnot(p: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("probability p = {p} not in [0, 1]")));
    }
    QuantumChannel::new(
        format!("probabilistic_cnot(p={p})"),
        vec![cnot_matrix().scale(p.sqrt()), identity(4).scale((1.0 - p).sqrt())],
    )
}

/// Two-qubit depolarizing channel: `rho -> (1-q) rho + q I/4`, Kraus form
/// over the 16 Pauli products.
pub fn depolarizing(q: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(format!("depolarizing q = {q} not in [0, 1]")));
    }
    let basis = crate::linalg::pauli_product_basis();
    let mut kraus = vec![basis[0].scale((1.0 - 15.0 * q / 16.0).sqrt())];
    kraus.extend(basis[1..].iter().map(|b| b.scale((q / 16.0).sqrt())));
    QuantumChannel::new(format!("depolarizing(q={q})"), kraus)
}

/// Independent dephasing of both qubits with flip probability `q` each.
pub fn dephasing(q: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(format!("dephasing q = {q} not in [0, 1]")));
    }
    let single = [identity(2).scale((1.0 - q).sqrt()), pauli(3).scale(q.sqrt())];
    let mut kraus = Vec::with_capacity(4);
    for a in &single {
        for b in &single {
            kraus.push(tensor(a, b));
        }
    }
    QuantumChannel::new(format!("dephasing(q={q})"), kraus)
}

/// Named models beyond the standard gates, with the parameters each takes.
pub const PARAMETRIC_CHANNELS: [(&str, &[&str]); 6] = [
    ("semiclassical_cnot", &[]),
    ("semiclassical_cnot_h", &[]),
    ("probabilistic_cnot", &["p"]),
    ("depolarizing", &["q"]),
    ("dephasing", &["q"]),
    ("depolarized_cnot", &["q"]),
];

/// Every name accepted by [`builtin_channel`].
pub fn builtin_names() -> Vec<&'static str> {
    StandardGate::ALL
        .iter()
        .map(|g| g.name())
        .chain(PARAMETRIC_CHANNELS.iter().map(|(n, _)| *n))
        .collect()
}

/// Resolves a built-in model. Every listed parameter is required and no other is accepted.
pub fn builtin_channel(name: &str, params: &BTreeMap<String, f64>) -> Result<QuantumChannel> {
    let expected: &[&str] = match StandardGate::from_name(name) {
        Ok(_) => &[],
        Err(_) => PARAMETRIC_CHANNELS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::UnknownName(name.to_string()))?,
    };
    if let Some(extra) = params.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(Error::OutOfRange(format!("{name} takes no parameter `{extra}`")));
    }
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::Missing(format!("parameter `{k}` for {name}")))
    };
    match name {
        "semiclassical_cnot" => Ok(semiclassical_cnot(SemiclassicalOrientation::MeasureControl)),
        "semiclassical_cnot_h" => Ok(semiclassical_cnot(SemiclassicalOrientation::HadamardConjugated)),
        "probabilistic_cnot" => probabilistic_cnot(get("p")?),
        "depolarizing" => depolarizing(get("q")?),
        "dephasing" => dephasing(get("q")?),
        "depolarized_cnot" => {
            let q = get("q")?;
            Ok(StandardGate::Cnot
                .channel()
                .then(&depolarizing(q)?)?
                .relabel(format!("depolarized_cnot(q={q})")))
        }
        _ => standard_gate(name),
    }
}

/// Werner state `(1-p)/4 I + p |phi><phi|` for maximally entangled `phi`.
pub fn werner_state(p: f64, phi: &PureState) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("Werner weight p = {p} not in [0, 1]")));
    }
    if phi.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4".into(),
            got: phi.dim().to_string(),
        });
    }
    let proj = phi.to_density();
    let half = identity(2).unscale(2.0);
    for keep in [true, false] {
        let r = proj.reduced(keep)?;
        if crate::linalg::max_abs_diff(r.matrix(), &half) > 1e-9 {
            return Err(Error::InvalidState(
                "Werner state requires a maximally entangled pure state".into(),
            ));
        }
    }
    DensityMatrix::new(identity(4).scale((1.0 - p) / 4.0) + proj.matrix().scale(p))
}

/// Polarization shorthand for single-qubit analyzer states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Pol {
    pub const ALL: [Pol; 6] = [Pol::H, Pol::V, Pol::D, Pol::A, Pol::R, Pol::L];

    pub fn ket(self) -> ComplexVector {
        let s = FRAC_1_SQRT_2;
        let amps = match self {
            Pol::H => [ONE, ZERO],
            Pol::V => [ZERO, ONE],
            Pol::D => [c(s, 0.0), c(s, 0.0)],
            Pol::A => [c(s, 0.0), c(-s, 0.0)],
            Pol::R => [c(s, 0.0), c(0.0, s)],
            Pol::L => [c(s, 0.0), c(0.0, -s)],
        };
        ComplexVector::from_column_slice(&amps)
    }

    pub fn letter(self) -> char {
        match self {
            Pol::H => 'H',
            Pol::V => 'V',
            Pol::D => 'D',
            Pol::A => 'A',
            Pol::R => 'R',
            Pol::L => 'L',
        }
    }

    pub fn from_letter(ch: char) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.letter() == ch)
            .ok_or_else(|| Error::UnknownName(ch.to_string()))
    }

    pub fn projector(self) -> ComplexMatrix {
        let k = self.ket();
        &k * k.adjoint()
    }
}

/// Single-qubit analyzer: a named polarization or a parametric state.
///
/// The parametric analyzer `(theta, phi)` projects onto
/// `cos(theta)|0> + e^{-i phi} sin(theta)|1>`. The sign of the phase is
/// chosen so that coincidence probabilities on `(|00> + eps|11>)` take the
/// form `|cos cos + eps^* e^{-i(phi_C + phi_T)} sin sin|^2 / (1 + |eps|^2)`
/// and the equal-weight visibility is `2|eps|/(1+|eps|^2) cos(phi_C + phi_T + arg eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Analyzer {
    Pol(Pol),
    Parametric { theta: f64, phi: f64 },
}

impl Analyzer {
    /// Equal-weight analyzer (`theta = pi/4`) at phase `phi`.
    pub fn equal_weight(phi: f64) -> Self {
        Analyzer::Parametric {
            theta: FRAC_PI_4,
            phi,
        }
    }

    pub fn ket(self) -> ComplexVector {
        match self {
            Analyzer::Pol(p) => p.ket(),
            Analyzer::Parametric { theta, phi } => ComplexVector::from_column_slice(&[
                c(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), -phi),
            ]),
        }
    }

    pub fn projector(self) -> ComplexMatrix {
        let k = self.ket();
        &k * k.adjoint()
    }

    pub fn label(self) -> String {
        match self {
            Analyzer::Pol(p) => p.letter().to_string(),
            Analyzer::Parametric { theta, phi } => format!("({theta:.6},{phi:.6})"),
        }
    }
}

impl From<Pol> for Analyzer {
    fn from(p: Pol) -> Self {
        Analyzer::Pol(p)
    }
}

/// Control and target analyzers.
pub type AnalyzerSetting = (Analyzer, Analyzer);

pub fn setting(a: Pol, b: Pol) -> AnalyzerSetting {
    (Analyzer::Pol(a), Analyzer::Pol(b))
}

pub fn setting_label(s: &AnalyzerSetting) -> String {
    format!("{}{}", s.0.label(), s.1.label())
}

/// `Tr(rho (Pi_C (x) Pi_T))`, clamped to `[0, 1]`.
pub fn coincidence_probability(rho: &DensityMatrix, setting: &AnalyzerSetting) -> f64 {
    let proj = tensor(&setting.0.projector(), &setting.1.projector());
    trace_of_product(rho.matrix(), &proj).re.clamp(0.0, 1.0)
}

/// One group of mutually exclusive outcomes (a multinomial trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeGroup {
    pub name: String,
    pub outcomes: Vec<(String, f64)>,
}

/// Probabilities or counts keyed by analyzer-setting labels such as `"HH"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRecord {
    pub groups: Vec<OutcomeGroup>,
    /// `Some(n)` when values are counts out of `n` shots per group.
    pub shots: Option<u64>,
}

/// Local measurement basis for both qubits at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub fn outcomes(self) -> [Pol; 2] {
        match self {
            Basis::Z => [Pol::H, Pol::V],
            Basis::X => [Pol::D, Pol::A],
            Basis::Y => [Pol::R, Pol::L],
        }
    }
}

impl ProbabilityRecord {
    /// Exact probabilities for the four outcomes of each two-qubit basis pair.
    pub fn from_bases(rho: &DensityMatrix, bases: &[(Basis, Basis)]) -> Self {
        let groups = bases
            .iter()
            .map(|&(a, b)| {
                let settings: Vec<AnalyzerSetting> = a
                    .outcomes()
                    .iter()
                    .flat_map(|&x| b.outcomes().map(move |y| setting(x, y)))
                    .collect();
                Self::group_for(rho, format!("{a:?}{b:?}"), &settings)
            })
            .collect();
        Self { groups, shots: None }
    }

    /// Exact probabilities for a single complete group of settings.
    pub fn group_for(rho: &DensityMatrix, name: String, settings: &[AnalyzerSetting]) -> OutcomeGroup {
        OutcomeGroup {
            name,
            outcomes: settings
                .iter()
                .map(|s| (setting_label(s), coincidence_probability(rho, s)))
                .collect(),
        }
    }

    /// Probability for a label; counts are divided by the shot number.
    pub fn probability(&self, key: &str) -> Option<f64> {
        let scale = self.shots.map_or(1.0, |n| n as f64);
        self.groups
            .iter()
            .flat_map(|g| g.outcomes.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v / scale)
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.probability(key)
            .ok_or_else(|| Error::Missing(format!("probability for setting {key}")))
    }

    pub fn keys(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.outcomes.iter().map(|(k, _)| k.clone()))
            .collect()
    }
}

/// Multinomial draw of `shots` trials per group, by sequential binomial
/// decomposition: outcome `k` gets `Binomial(remaining, p_k / p_remaining)`.
pub fn sample_counts<R: Rng + ?Sized>(
    probabilities: &ProbabilityRecord,
    shots: u64,
    rng: &mut R,
) -> Result<ProbabilityRecord> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be positive".into()));
    }
    let mut groups = Vec::with_capacity(probabilities.groups.len());
    for g in &probabilities.groups {
        let probs: Vec<f64> = g.outcomes.iter().map(|(_, p)| *p).collect();
        let counts = multinomial(&probs, shots, rng)
            .map_err(|e| Error::InvalidRecord(format!("group {}: {e}", g.name)))?;
        groups.push(OutcomeGroup {
            name: g.name.clone(),
            outcomes: g
                .outcomes
                .iter()
                .zip(counts)
                .map(|((k, _), n)| (k.clone(), n as f64))
                .collect(),
        });
    }
    Ok(ProbabilityRecord {
        groups,
        shots: Some(shots),
    })
}

/// Multinomial counts for one group of probabilities summing to 1 (1e-9).
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    if let Some(p) = probs.iter().find(|p| **p < 0.0 || !p.is_finite()) {
        return Err(Error::OutOfRange(format!("negative probability {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::OutOfRange(format!("probabilities sum to {total}")));
    }
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let n = if remaining == 0 || p <= 0.0 {
            0
        } else if mass <= p {
            remaining
        } else {
            Binomial::new(remaining, (p / mass).clamp(0.0, 1.0))
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(rng)
        };
        counts.push(n);
        remaining -= n;
        mass -= p;
    }
    Ok(counts)
}

/// Binomial estimate of a single projector probability from `shots` trials.
pub fn sample_binomial<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> Result<u64> {
    Ok(multinomial(&[p.clamp(0.0, 1.0), 1.0 - p.clamp(0.0, 1.0)], shots, rng)?[0])
}

/// Parity-analyzer phases `phi` and `phi + pi`.
pub fn parity_settings(phi: f64) -> [AnalyzerSetting; 4] {
    let a = Analyzer::equal_weight(phi);
    let b = Analyzer::equal_weight(phi + PI);
    [(a, a), (a, b), (b, a), (b, b)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{approx_eq, max_abs_diff};
    use crate::state::{random_state, seeded_rng, Bell, Purity};

    fn basis_density(i: usize) -> DensityMatrix {
        PureState::basis(4, i).to_density()
    }

    #[test]
    fn identity_and_cnot_actions() {
        let rho = random_state(4, Purity::Mixed, &mut seeded_rng(2));
        let out = apply_channel(&QuantumChannel::identity(4), &rho).unwrap();
        assert!(approx_eq(out.state.matrix(), rho.matrix(), 1e-15));
        assert!(!out.renormalized);

        let cnot = standard_gate("cnot").unwrap();
        let out = apply_channel(&cnot, &basis_density(2)).unwrap();
        assert!(approx_eq(out.state.matrix(), basis_density(3).matrix(), 0.0));
    }

    #[test]
    fn semiclassical_kills_control_coherence() {
        let plus = PureState::from_slice(&[ONE, ONE]).unwrap();
        let input = plus.tensor(&PureState::basis(2, 0)).unwrap().to_density();
        let ch = semiclassical_cnot(SemiclassicalOrientation::MeasureControl);
        let out = apply_channel(&ch, &input).unwrap().state;
        let mut want = ComplexMatrix::zeros(4, 4);
        want[(0, 0)] = c(0.5, 0.0);
        want[(3, 3)] = c(0.5, 0.0);
        assert!(approx_eq(out.matrix(), &want, 1e-15));
    }

    #[test]
    fn cnot_twice_is_identity_on_matrix_units() {
        let cnot = StandardGate::Cnot.channel();
        let twice = cnot.then(&cnot).unwrap();
        for (idx, img) in twice.matrix_unit_images().iter().enumerate() {
            assert!(approx_eq(img, &matrix_unit(4, idx / 4, idx % 4), 0.0));
        }
    }

    #[test]
    fn cnot_entangles_control_superposition() {
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let input = PureState::from_slice(&[alpha, ZERO, beta, ZERO]).unwrap();
        let out = input.apply(&cnot_matrix()).unwrap();
        let want = ComplexVector::from_column_slice(&[alpha, ZERO, ZERO, beta]);
        assert!((out.amplitudes() - want).norm() < 1e-15);
    }

    #[test]
    fn hadamard_conjugated_cnot_is_controlled_z() {
        let h2 = StandardGate::Hadamard2.matrix();
        assert!(approx_eq(&(&h2 * &h2), &identity(4), 1e-15));
        let cz = &h2 * cnot_matrix() * &h2;
        let ket11 = PureState::basis(4, 3);
        let out = &cz * ket11.amplitudes();
        assert!((out[3] + ONE).norm() < 1e-15);
        assert!(approx_eq(
            &cz,
            &ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&[ONE, ONE, ONE, -ONE])),
            1e-15
        ));
    }

    #[test]
    fn unknown_gate_name() {
        assert!(matches!(standard_gate("toffoli"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn probabilistic_cnot_cases() {
        assert!(probabilistic_cnot(1.5).is_err());
        let half = probabilistic_cnot(0.5).unwrap();
        assert!(half.is_trace_preserving());
        let out = apply_channel(&half, &basis_density(2)).unwrap().state;
        let want = ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(&[
            ZERO,
            ZERO,
            c(0.5, 0.0),
            c(0.5, 0.0),
        ]));
        assert!(approx_eq(out.matrix(), &want, 1e-15));
        let rho = random_state(4, Purity::Mixed, &mut seeded_rng(5));
        let p0 = apply_channel(&probabilistic_cnot(0.0).unwrap(), &rho)
            .unwrap()
            .state;
        assert!(approx_eq(p0.matrix(), rho.matrix(), 1e-15));
    }

    #[test]
    fn werner_cases() {
        let phi = Bell::PhiPlus.state();
        let w0 = werner_state(0.0, &phi).unwrap();
        assert!(approx_eq(w0.matrix(), &identity(4).unscale(4.0), 1e-15));
        let w1 = werner_state(1.0, &phi).unwrap();
        assert!(approx_eq(w1.matrix(), &phi.projector(), 1e-15));
        let w = werner_state(0.6, &phi).unwrap();
        assert!((w.purity() - (1.0 + 3.0 * 0.36) / 4.0).abs() < 1e-12);
        let product = PureState::basis(4, 0);
        assert!(werner_state(0.5, &product).is_err());
    }

    #[test]
    fn non_trace_preserving_output_is_flagged() {
        let k = matrix_unit(4, 0, 0);
        let ch = QuantumChannel::new("postselect", vec![k.clone()]).unwrap();
        assert!(!ch.is_trace_preserving());
        let rho = DensityMatrix::maximally_mixed(4);
        let out = apply_channel(&ch, &rho).unwrap();
        assert!(out.renormalized);
        assert!((out.trace - 0.25).abs() < 1e-15);
        assert!(approx_eq(out.state.matrix(), &k, 1e-15));
    }

    #[test]
    fn over_complete_kraus_rejected() {
        let k = identity(4).scale(1.1);
        assert!(QuantumChannel::new("bad", vec![k]).is_err());
    }

    #[test]
    fn coincidence_examples() {
        let phi = Bell::PhiPlus.state().to_density();
        assert!((coincidence_probability(&phi, &setting(Pol::H, Pol::H)) - 0.5).abs() < 1e-15);
        assert!(coincidence_probability(&phi, &setting(Pol::R, Pol::R)).abs() < 1e-15);
    }

    #[test]
    fn coincidence_matches_closed_form_for_eps_states() {
        for eps in [c(1.0, 0.0), c(0.5, 0.0), Complex64::from_polar(0.7, 1.1)] {
            let out = PureState::from_slice(&[ONE, ZERO, ZERO, eps])
                .unwrap()
                .to_density();
            for (tc, tt, pc, pt) in [(FRAC_PI_4, FRAC_PI_4, 0.3, -0.9), (0.2, 1.1, 2.0, 0.4)] {
                let s = (
                    Analyzer::Parametric { theta: tc, phi: pc },
                    Analyzer::Parametric { theta: tt, phi: pt },
                );
                let closed = (c(tc.cos() * tt.cos(), 0.0)
                    + eps.conj() * Complex64::from_polar(1.0, -(pc + pt)) * tc.sin() * tt.sin())
                .norm_sqr()
                    / (1.0 + eps.norm_sqr());
                assert!((coincidence_probability(&out, &s) - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_bounds_and_determinism() {
        let rec = ProbabilityRecord {
            groups: vec![OutcomeGroup {
                name: "g".into(),
                outcomes: vec![("a".into(), 0.5), ("b".into(), 0.5)],
            }],
            shots: None,
        };
        let counts = sample_counts(&rec, 1_000_000, &mut seeded_rng(11)).unwrap();
        let a = counts.groups[0].outcomes[0].1;
        // sigma = sqrt(n p (1-p)) = 500
        assert!((a - 500_000.0).abs() < 5.0 * 500.0);
        assert_eq!(counts.groups[0].outcomes.iter().map(|o| o.1).sum::<f64>(), 1e6);

        let one = sample_counts(&rec, 1, &mut seeded_rng(3)).unwrap();
        assert_eq!(one.groups[0].outcomes.iter().filter(|o| o.1 > 0.0).count(), 1);

        let again = sample_counts(&rec, 1_000_000, &mut seeded_rng(11)).unwrap();
        assert_eq!(counts, again);
    }

    #[test]
    fn sampling_rejects_negative_probability() {
        assert!(multinomial(&[1.2, -0.2], 10, &mut seeded_rng(0)).is_err());
        assert!(multinomial(&[0.2, 0.2], 10, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn probabilistic_cnot_is_mixture_of_actions() {
        let rho = random_state(4, Purity::Mixed, &mut seeded_rng(8));
        let cnot = apply_channel(&StandardGate::Cnot.channel(), &rho).unwrap().state;
        for p in [0.0, 0.3, 1.0] {
            let out = apply_channel(&probabilistic_cnot(p).unwrap(), &rho)
                .unwrap()
                .state;
            let want = cnot.matrix().scale(p) + rho.matrix().scale(1.0 - p);
            assert!(max_abs_diff(out.matrix(), &want) < 1e-12);
        }
    }

    #[test]
    fn registry_resolves_names_and_params() {
        let none = BTreeMap::new();
        for name in builtin_names() {
            let params: BTreeMap<String, f64> = PARAMETRIC_CHANNELS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, ps)| ps.iter().map(|p| (p.to_string(), 0.5)).collect())
                .unwrap_or_default();
            let ch = builtin_channel(name, &params).unwrap();
            assert!(ch.is_trace_preserving(), "{name}");
        }
        assert!(matches!(
            builtin_channel("toffoli", &none),
            Err(Error::UnknownName(_))
        ));
        assert!(matches!(
            builtin_channel("probabilistic_cnot", &none),
            Err(Error::Missing(_))
        ));
        let extra = BTreeMap::from([("p".to_string(), 0.5)]);
        assert!(builtin_channel("cnot", &extra).is_err());
        let bad = BTreeMap::from([("p".to_string(), 1.5)]);
        assert!(matches!(
            builtin_channel("probabilistic_cnot", &bad),
            Err(Error::OutOfRange(_))
        ));
        let full = BTreeMap::from([("q".to_string(), 0.0)]);
        let dc = builtin_channel("depolarized_cnot", &full).unwrap();
        assert!(approx_eq(&dc.act(&identity(4)), &identity(4), 1e-12));
    }
}
