use clap::ValueEnum;
use gatebench::channels::{Basis, OutcomeGroup, ProbabilityRecord};
use gatebench::io::{matrix_to_rows, MatrixRows};
use gatebench::linalg::{tensor, trace_of_product, ComplexMatrix};
use gatebench::measures::{
    bell_fidelity, bell_fidelity_from_six, chsh_from_tangle, linear_entropy, tangle,
    witness_expectation_from_six, witness_for_bell, witness_settings, SIX_FIDELITY_SETTINGS,
};
use gatebench::state::{Bell, DensityMatrix};
use gatebench::statetomo::{
    mle_reconstruct, probabilities_as_counts, reconstruct_linear, MleConfig, RecordMode, TomographyRecord,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::indicators::{self, margin, Indicator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

#[derive(Debug, Clone, Serialize)]
pub struct MleSummary {
    pub objective: f64,
    pub start_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// The same Bell-state quantity by two routes.
#[derive(Debug, Clone, Serialize)]
pub struct TwoRoutes {
    pub state: &'static str,
    /// Six coincidence probabilities taken from the data by linear inversion.
    pub six_probability: f64,
    pub density_matrix: f64,
    pub settings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateReport {
    pub method: Method,
    pub qubits: u8,
    pub record_mode: RecordMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots_per_setting: Option<u64>,
    pub linear_inversion_physical: bool,
    pub linear_min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle: Option<MleSummary>,
    pub warnings: Vec<String>,
    pub indicators: Vec<Indicator>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bell_fidelities: Vec<TwoRoutes>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<TwoRoutes>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub density_matrix: MatrixRows,
}

/// Probabilities of every analyzer pair in the Z, X and Y bases, from a matrix that
/// need not be positive.
fn coincidences(m: &ComplexMatrix) -> ProbabilityRecord {
    let groups = [Basis::Z, Basis::X, Basis::Y]
        .iter()
        .map(|&b| OutcomeGroup {
            name: format!("{b:?}{b:?}"),
            outcomes: b
                .outcomes()
                .iter()
                .flat_map(|&x| b.outcomes().map(move |y| (x, y)))
                .map(|(x, y)| {
                    let proj = tensor(&x.projector(), &y.projector());
                    (
                        format!("{}{}", x.letter(), y.letter()),
                        trace_of_product(m, &proj).re,
                    )
                })
                .collect(),
        })
        .collect();
    ProbabilityRecord { groups, shots: None }
}

const EXACT_WEIGHT: u64 = 1_000_000_000;

pub fn parse_record(text: &str) -> CliResult<TomographyRecord> {
    serde_json::from_str(text).map_err(|e| CliError::schema(format!("tomography record: {e}")))
}

pub fn state_report(rec: &TomographyRecord, method: Method) -> CliResult<(StateReport, DensityMatrix)> {
    let linear = reconstruct_linear(rec).map_err(|e| CliError::schema(e.to_string()))?;
    let mut warnings = Vec::new();
    let mut mle = None;
    let state = match method {
        Method::Mle => {
            let r = match rec.mode {
                RecordMode::Counts => mle_reconstruct(rec, &MleConfig::default())?,
                RecordMode::Probability => {
                    warnings.push(format!(
                        "probability record weighted as {EXACT_WEIGHT} counts per setting for maximum likelihood"
                    ));
                    mle_reconstruct(&probabilities_as_counts(rec, EXACT_WEIGHT), &MleConfig::default())?
                }
            };
            if !r.converged {
                return Err(CliError::numerical(format!(
                    "maximum likelihood did not converge after {} evaluations (objective {:.6e})",
                    r.evaluations, r.objective
                )));
            }
            warnings.extend(r.warnings.iter().cloned());
            mle = Some(MleSummary {
                objective: r.objective,
                start_objective: r.start_objective,
                evaluations: r.evaluations,
                converged: r.converged,
            });
            r.state
        }
        Method::Linear if linear.is_physical() => linear.density()?,
        Method::Linear => {
            warnings.push(format!(
                "linear inversion is not physical (smallest eigenvalue {:.3e}); measures use the closest \
                 physical state, rerun with --method mle",
                linear.min_eigenvalue
            ));
            linear.project()?
        }
    };

    let shots = match rec.mode {
        RecordMode::Counts => rec
            .shots_per_setting
            .or_else(|| rec.entries.iter().filter_map(|e| e.shots).min()),
        RecordMode::Probability => None,
    };
    let tol = margin(shots);
    let s_l = linear_entropy(&state);
    let mut indicators = vec![Indicator::new(
        "linear entropy",
        "S_L",
        s_l,
        indicators::LINEAR_ENTROPY,
        tol,
    )];
    let mut bell_fidelities = Vec::new();
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    if rec.qubits == 2 {
        let t = tangle(&state)?;
        indicators.push(Indicator::new("tangle", "T", t, indicators::TANGLE, tol));
        match chsh_from_tangle(t, &state) {
            Ok(b) => indicators.push(
                Indicator::new("Bell inequality", "B", b, indicators::BELL_INEQUALITY, tol)
                    .note("pure-state relation to the tangle"),
            ),
            Err(_) => notes.push("Bell parameter omitted: the pure-state relation needs a pure state".into()),
        }
        let six = coincidences(&linear.matrix);
        let fids = bell_fidelity_from_six(&six)?;
        for which in Bell::ALL {
            bell_fidelities.push(TwoRoutes {
                state: which.label(),
                six_probability: fids.get(which),
                density_matrix: bell_fidelity(&state, which),
                settings: SIX_FIDELITY_SETTINGS.iter().map(|s| s.to_string()).collect(),
            });
            witnesses.push(TwoRoutes {
                state: which.label(),
                six_probability: witness_expectation_from_six(&six, which)?,
                density_matrix: witness_for_bell(which).expectation(&state),
                settings: witness_settings(which).iter().map(|s| s.to_string()).collect(),
            });
        }
        notes.push(
            "six-probability values need six coincidence settings; density-matrix values use the full reconstruction"
                .into(),
        );
    }
    let report = StateReport {
        method,
        qubits: rec.qubits,
        record_mode: rec.mode,
        shots_per_setting: shots,
        linear_inversion_physical: linear.is_physical(),
        linear_min_eigenvalue: linear.min_eigenvalue,
        mle,
        warnings,
        indicators,
        bell_fidelities,
        witnesses,
        notes,
        density_matrix: matrix_to_rows(state.matrix()),
    };
    Ok((report, state))
}

pub fn render(r: &StateReport) -> String {
    let mut out = format!("state reconstruction ({:?}, {} qubit(s))\n", r.method, r.qubits);
    out.push_str(&format!(
        "  linear inversion physical: {} (smallest eigenvalue {:.3e})\n",
        r.linear_inversion_physical, r.linear_min_eigenvalue
    ));
    if let Some(m) = &r.mle {
        out.push_str(&format!(
            "  likelihood objective {:.6e} after {} evaluations\n",
            m.objective, m.evaluations
        ));
    }
    out.push_str(&indicators::render(&r.indicators));
    if !r.bell_fidelities.is_empty() {
        out.push_str(&format!(
            "  {:<22}{:>16}{:>16}\n",
            "Bell fidelity", "six-probability", "density matrix"
        ));
        for f in &r.bell_fidelities {
            let name = format!("F_{}", f.state);
            out.push_str(&format!(
                "  {name:<22}{:>16.6}{:>16.6}\n",
                f.six_probability, f.density_matrix
            ));
        }
        out.push_str(&format!(
            "  {:<22}{:>16}{:>16}\n",
            "witness", "six-probability", "density matrix"
        ));
        for w in &r.witnesses {
            let name = format!("<W_{}>", w.state);
            out.push_str(&format!(
                "  {name:<22}{:>16.6}{:>16.6}\n",
                w.six_probability, w.density_matrix
            ));
        }
    }
    for n in &r.notes {
        out.push_str(&format!("  note: {n}\n"));
    }
    for w in &r.warnings {
        out.push_str(&format!("  warning: {w}\n"));
    }
    out
}
