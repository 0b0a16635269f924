use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use gatebench::channels::{
    apply_channel, multinomial, sample_counts, Basis, ProbabilityRecord, QuantumChannel, StandardGate,
};
use gatebench::exec::{item_seed, Exec};
use gatebench::gatemetrics::{GateComparison, MinFidelity, MinFidelityConfig};
use gatebench::measures::{
    bell_fidelity_from_six, inquisition, logical_visibility, truth_table_of_channel,
    witness_expectation_from_six, witness_settings, TruthTable, SIX_FIDELITY_SETTINGS,
};
use gatebench::proctomo::{run_sqpt, SqptMode};
use gatebench::state::{seeded_rng, Bell, DensityMatrix, PureState};
use gatebench::statetomo::simulate_tomography;
use serde::Serialize;

use crate::channel_spec::ChannelInfo;
use crate::error::{CliError, CliResult};
use crate::indicators::{self, margin, Indicator};
use crate::output::{write_json, write_text};
use crate::state_report::{self, Method, StateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Truthtable,
    Simple,
    Statetomo,
    Proctomo,
    Metrics,
    All,
}

impl Tier {
    fn includes(self, other: Tier) -> bool {
        self == other || self == Tier::All
    }
}

pub struct RunConfig {
    pub tier: Tier,
    pub shots: Option<u64>,
    pub seed: u64,
    pub target: String,
    pub exec: Exec,
}

const LOGICAL: [&str; 4] = ["HH", "HV", "VH", "VV"];
const SIMPLE_SETTINGS: [&str; 10] = ["HH", "HV", "VH", "VV", "DD", "DA", "AD", "AA", "RR", "LL"];
const SUPERPOSITION_INPUT: &str = "DH: control (|0> + |1>)/sqrt(2), target |0>";

#[derive(Debug, Clone, Serialize)]
pub struct TruthTableSection {
    pub title: &'static str,
    pub inputs: [&'static str; 4],
    pub outputs: [&'static str; 4],
    pub rows: [[f64; 4]; 4],
    pub inquisition: Indicator,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimpleSection {
    pub title: &'static str,
    pub input: &'static str,
    pub settings: Vec<String>,
    pub coincidences: BTreeMap<String, f64>,
    pub indicators: Vec<Indicator>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSection {
    pub title: &'static str,
    pub input: &'static str,
    pub report: StateReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessSection {
    pub title: &'static str,
    pub mode: SqptMode,
    pub chi_trace: f64,
    pub chi_eigenvalues: Vec<f64>,
    pub kraus_rank: usize,
    pub dropped_eigenvalues: usize,
    pub clamped_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_from: Option<[f64; 2]>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsSection {
    pub title: &'static str,
    pub target: String,
    pub evaluated: &'static str,
    pub indicators: Vec<Indicator>,
    pub optimizer: MinFidelity,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizeReport {
    pub channel: ChannelInfo,
    pub tier: Tier,
    pub shots: Option<u64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_table: Option<TruthTableSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simple_measures: Option<SimpleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_tomography: Option<StateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process_tomography: Option<ProcessSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate_metrics: Option<MetricsSection>,
}

pub fn characterize(
    ch: &QuantumChannel,
    info: ChannelInfo,
    cfg: &RunConfig,
    out: &Path,
) -> CliResult<CharacterizeReport> {
    let tier = cfg.tier;
    let truth_table = tier
        .includes(Tier::Truthtable)
        .then(|| truth_table_section(ch, cfg))
        .transpose()?;
    let simple_measures = tier
        .includes(Tier::Simple)
        .then(|| simple_section(ch, cfg))
        .transpose()?;
    let state_tomography = tier
        .includes(Tier::Statetomo)
        .then(|| state_section(ch, cfg))
        .transpose()?;
    let needs_sqpt = tier.includes(Tier::Proctomo) || (tier == Tier::Metrics && cfg.shots.is_some());
    let mut reconstructed = None;
    let process_tomography = if needs_sqpt {
        let (section, rec) = process_section(ch, cfg, out)?;
        reconstructed = Some(rec);
        Some(section)
    } else {
        None
    };
    let gate_metrics = if tier.includes(Tier::Metrics) {
        let (actual, evaluated) = match (&reconstructed, cfg.shots) {
            (Some(r), Some(_)) => (r, "reconstructed channel"),
            _ => (ch, "channel"),
        };
        Some(metrics_section(actual, evaluated, cfg, out)?)
    } else {
        None
    };
    Ok(CharacterizeReport {
        channel: info,
        tier,
        shots: cfg.shots,
        seed: cfg.seed,
        truth_table,
        simple_measures,
        state_tomography,
        process_tomography,
        gate_metrics,
    })
}

fn sampled_truth_table(ch: &QuantumChannel, cfg: &RunConfig) -> CliResult<TruthTable> {
    let exact = truth_table_of_channel(ch)?;
    let Some(shots) = cfg.shots else {
        return Ok(exact);
    };
    let mut rng = seeded_rng(item_seed(cfg.seed, 0));
    let mut rows = [[0.0; 4]; 4];
    for (row, probs) in rows.iter_mut().zip(exact.rows()) {
        let total: f64 = probs.iter().sum();
        let norm: Vec<f64> = probs.iter().map(|p| p / total).collect();
        for (slot, n) in row.iter_mut().zip(multinomial(&norm, shots, &mut rng)?) {
            *slot = n as f64 / shots as f64;
        }
    }
    Ok(TruthTable::new(rows)?)
}

fn inquisition_indicator(table: &TruthTable, shots: Option<u64>) -> Indicator {
    let value = inquisition(table, &TruthTable::ideal_cnot());
    Indicator::new("inquisition", "I", value, indicators::INQUISITION, margin(shots)).settings(&LOGICAL)
}

fn truth_table_section(ch: &QuantumChannel, cfg: &RunConfig) -> CliResult<TruthTableSection> {
    let table = sampled_truth_table(ch, cfg)?;
    Ok(TruthTableSection {
        title: "truth table",
        inputs: LOGICAL,
        outputs: LOGICAL,
        rows: *table.rows(),
        inquisition: inquisition_indicator(&table, cfg.shots),
    })
}

fn superposition_output(ch: &QuantumChannel) -> CliResult<DensityMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = gatebench::linalg::ComplexVector::from_column_slice(&[
        gatebench::linalg::c(s, 0.0),
        gatebench::linalg::c(s, 0.0),
    ]);
    let zero = PureState::basis(2, 0);
    let input = PureState::new(gatebench::linalg::tensor_vec(&plus, zero.amplitudes()))?;
    Ok(apply_channel(ch, &input.to_density())?.state)
}

fn simple_section(ch: &QuantumChannel, cfg: &RunConfig) -> CliResult<SimpleSection> {
    let tol = margin(cfg.shots);
    let table = sampled_truth_table(ch, cfg)?;
    let rho = superposition_output(ch)?;
    let exact = ProbabilityRecord::from_bases(
        &rho,
        &[(Basis::Z, Basis::Z), (Basis::X, Basis::X), (Basis::Y, Basis::Y)],
    );
    let record = match cfg.shots {
        Some(n) => sample_counts(&exact, n, &mut seeded_rng(item_seed(cfg.seed, 1)))?,
        None => exact,
    };
    let p = |k: &str| record.require(k);

    let even = p("HH")? + p("VV")?;
    let odd = p("HV")? + p("VH")?;
    let v_l = logical_visibility(even, odd)?;
    let (dd, da, ad, aa) = (p("DD")?, p("DA")?, p("AD")?, p("AA")?);
    let v_e = if dd + da > 0.0 { (dd - da) / (dd + da) } else { 0.0 };
    let parity = dd + aa - da - ad;
    let fidelity = bell_fidelity_from_six(&record)?.get(Bell::PhiPlus);
    let witness = witness_expectation_from_six(&record, Bell::PhiPlus)?;

    let mut flags = Vec::new();
    if parity.abs() <= tol {
        flags.push("fails parity".to_string());
    }
    if witness >= -tol {
        flags.push("witness does not detect entanglement".to_string());
    }
    let indicators = vec![
        inquisition_indicator(&table, cfg.shots),
        Indicator::new(
            "logical visibility",
            "V_L",
            v_l,
            indicators::LOGICAL_VISIBILITY,
            tol,
        )
        .settings(&LOGICAL),
        Indicator::new(
            "equal-weight visibility",
            "V_E(0)",
            v_e,
            indicators::EQUAL_WEIGHT_VISIBILITY,
            tol,
        )
        .settings(&["DD", "DA"]),
        Indicator::new("parity", "Pi(0)", parity, indicators::PARITY, tol)
            .settings(&["DD", "DA", "AD", "AA"]),
        Indicator::new(
            "Bell-state fidelity",
            "F_phi+",
            fidelity,
            indicators::BELL_FIDELITY,
            tol,
        )
        .settings(&SIX_FIDELITY_SETTINGS),
        Indicator::new(
            "entanglement witness",
            "<W_phi+>",
            witness,
            indicators::WITNESS,
            tol,
        )
        .settings(&witness_settings(Bell::PhiPlus)),
    ];
    let coincidences = SIMPLE_SETTINGS
        .iter()
        .map(|k| Ok((k.to_string(), p(k)?)))
        .collect::<CliResult<_>>()?;
    Ok(SimpleSection {
        title: "simple measures",
        input: SUPERPOSITION_INPUT,
        settings: SIMPLE_SETTINGS.iter().map(|s| s.to_string()).collect(),
        coincidences,
        indicators,
        flags,
    })
}

fn state_section(ch: &QuantumChannel, cfg: &RunConfig) -> CliResult<StateSection> {
    let rho = superposition_output(ch)?;
    let record = simulate_tomography(&rho, cfg.shots, item_seed(cfg.seed, 2))?;
    let method = if cfg.shots.is_some() {
        Method::Mle
    } else {
        Method::Linear
    };
    let (report, _) = state_report::state_report(&record, method)?;
    Ok(StateSection {
        title: "state tomography",
        input: SUPERPOSITION_INPUT,
        report,
    })
}

fn sqpt_mode(cfg: &RunConfig) -> SqptMode {
    match cfg.shots {
        Some(shots) => SqptMode::Shots {
            shots,
            seed: cfg.seed,
        },
        None => SqptMode::Exact,
    }
}

/// Runs process tomography, writes its artifacts and returns the reconstructed channel.
pub fn process_section(
    ch: &QuantumChannel,
    cfg: &RunConfig,
    out: &Path,
) -> CliResult<(ProcessSection, QuantumChannel)> {
    let mode = sqpt_mode(cfg);
    let res = run_sqpt(ch, mode, cfg.exec)?;
    write_json(out, "dataset.json", &res.dataset)?;
    write_json(out, "chi.json", &res.chi)?;
    write_text(out, "chi.txt", &res.chi.pretty())?;
    write_json(out, "kraus.json", &res.kraus)?;
    let section = ProcessSection {
        title: "process tomography",
        mode,
        chi_trace: res.chi.trace(),
        chi_eigenvalues: res.chi.eigenvalues(),
        kraus_rank: res.kraus.channel.kraus().len(),
        dropped_eigenvalues: res.kraus.dropped,
        clamped_mass: res.kraus.clamped_mass,
        normalized_from: res.kraus.normalized_from,
        warnings: res.warnings,
        files: ["dataset.json", "chi.json", "chi.txt", "kraus.json"]
            .map(String::from)
            .to_vec(),
    };
    Ok((section, res.kraus.channel))
}

pub fn metrics_section(
    actual: &QuantumChannel,
    evaluated: &'static str,
    cfg: &RunConfig,
    out: &Path,
) -> CliResult<MetricsSection> {
    let target = StandardGate::from_name(&cfg.target)
        .map_err(|_| CliError::schema(format!("unknown target gate `{}`", cfg.target)))?
        .channel();
    let opt = MinFidelityConfig {
        seed: cfg.seed,
        ..MinFidelityConfig::default()
    };
    let cmp = GateComparison::new(&target, actual, &opt, cfg.exec)?;
    write_json(out, "gate_comparison.json", &cmp)?;
    let tol = margin(cfg.shots);
    Ok(MetricsSection {
        title: "gate metrics",
        target: cfg.target.clone(),
        evaluated,
        indicators: vec![
            Indicator::new(
                "gate fidelity",
                "F_g",
                cmp.min_gate_fidelity,
                indicators::GATE_FIDELITY,
                tol,
            )
            .note("minimum over pure inputs; the optimizer certificate attains it"),
            Indicator::new(
                "average gate fidelity",
                "F_avg",
                cmp.average_gate_fidelity,
                indicators::AVERAGE_GATE_FIDELITY,
                tol,
            ),
            Indicator::new(
                "isomorphism fidelity",
                "F_i",
                cmp.process_fidelity,
                indicators::ISOMORPHISM_FIDELITY,
                tol,
            ),
        ],
        optimizer: cmp.optimizer,
        files: vec!["gate_comparison.json".into()],
    })
}

pub fn render(r: &CharacterizeReport) -> String {
    let mut out = format!(
        "channel {} ({}, Kraus rank {})\ntier {:?}, {}, seed {}\n",
        r.channel.spec,
        r.channel.label,
        r.channel.kraus_rank,
        r.tier,
        r.shots.map_or("exact probabilities".to_string(), |n| format!(
            "{n} shots per setting"
        )),
        r.seed
    );
    if let Some(t) = &r.truth_table {
        out.push_str(&format!(
            "\n[{}]\n        {}\n",
            t.title,
            t.outputs.join("        ")
        ));
        for (label, row) in t.inputs.iter().zip(&t.rows) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>10.6}")).collect();
            out.push_str(&format!("  {label}  {}\n", cells.join("")));
        }
        out.push_str(&indicators::render(std::slice::from_ref(&t.inquisition)));
    }
    if let Some(s) = &r.simple_measures {
        out.push_str(&format!("\n[{}]\n  input {}\n", s.title, s.input));
        out.push_str(&indicators::render(&s.indicators));
        for f in &s.flags {
            out.push_str(&format!("  flag: {f}\n"));
        }
    }
    if let Some(s) = &r.state_tomography {
        out.push_str(&format!("\n[{}]\n  input {}\n", s.title, s.input));
        out.push_str(&state_report::render(&s.report));
    }
    if let Some(p) = &r.process_tomography {
        out.push_str(&format!("\n[{}]\n", p.title));
        out.push_str(&render_process(p));
    }
    if let Some(m) = &r.gate_metrics {
        out.push_str(&format!("\n[{}]\n", m.title));
        out.push_str(&render_metrics(m));
    }
    out
}

pub fn render_process(p: &ProcessSection) -> String {
    let mut leading: Vec<f64> = p.chi_eigenvalues.iter().copied().filter(|v| *v > 1e-10).collect();
    leading.sort_by(|a, b| b.total_cmp(a));
    let eig: Vec<String> = leading.iter().map(|v| format!("{v:.6}")).collect();
    let mut out = format!(
        "  chi trace {:.9}, Kraus rank {}, leading eigenvalues [{}]\n",
        p.chi_trace,
        p.kraus_rank,
        eig.join(", ")
    );
    for w in &p.warnings {
        out.push_str(&format!("  warning: {w}\n"));
    }
    out.push_str(&format!("  files: {}\n", p.files.join(", ")));
    out
}

pub fn render_metrics(m: &MetricsSection) -> String {
    let mut out = format!("  {} against {}\n", m.evaluated, m.target);
    out.push_str(&indicators::render(&m.indicators));
    out.push_str(&format!(
        "  optimizer: {} restarts, {} converged, {} evaluations\n",
        m.optimizer.restarts, m.optimizer.converged_restarts, m.optimizer.evaluations
    ));
    out
}
