//! Acceptance suite. Runs without the libtest harness so every criterion prints
//! exactly one PASS/FAIL line; the process exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use gatebench::channels::werner_state;
use gatebench::channels::{
    apply_channel, probabilistic_cnot, random_channel, semiclassical_cnot, Basis, ProbabilityRecord,
    QuantumChannel, SemiclassicalOrientation, StandardGate,
};
use gatebench::exec::Exec;
use gatebench::gatemetrics::{
    average_gate_fidelity, haar_average_gate_fidelity, min_gate_fidelity, process_fidelity,
    sample_min_gate_fidelity, MinFidelityConfig,
};
use gatebench::linalg::{c, hermitian_eig, max_abs_diff, pauli, psd_sqrt, tensor, trace, ComplexMatrix};
use gatebench::measures::{
    bell_fidelity, bell_fidelity_from_six, chsh_from_tangle, epsilon_output_state, equal_weight_visibility,
    fit_two_phi_fringe, inquisition, linear_entropy, parity, parity_fringe, tangle, truth_table_of_channel,
    witness_expectation_from_six, witness_for_bell, TruthTable,
};
use gatebench::plane::{generate_plane, werner_linear_entropy, werner_tangle, Family, PlaneConfig};
use gatebench::proctomo::{chi_block, chi_via_beta, exact_dataset, kraus_from_chi, run_sqpt, SqptMode};
use gatebench::state::{random_state, seeded_rng, Bell, DensityMatrix, PureState, Purity};
use gatebench::statetomo::{mle_reconstruct, reconstruct_linear, simulate_tomography, MleConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// `(4 - 3p)/4` at `(II, II)` and `±p/4` on the `{II, IX, ZI, ZX}` block.
fn analytic_chi(p: f64) -> ComplexMatrix {
    let idx = [0usize, 1, 12, 13];
    let sign = [1.0, 1.0, 1.0, -1.0];
    let mut m = ComplexMatrix::zeros(16, 16);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            m[(ia, ib)] = c(p * sign[a] * sign[b] / 4.0, 0.0);
        }
    }
    m[(0, 0)] = c((4.0 - 3.0 * p) / 4.0, 0.0);
    m
}

fn c1_probabilistic_cnot_chi() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for p in [0.0, 0.25, 0.5, 1.0] {
        let t = Instant::now();
        let res = run_sqpt(
            &probabilistic_cnot(p).map_err(err)?,
            SqptMode::Exact,
            Exec::default(),
        )
        .map_err(err)?;
        let secs = t.elapsed().as_secs_f64();
        let e = max_abs_diff(res.chi.matrix(), &analytic_chi(p));
        ensure(e < 1e-9, || format!("p = {p}: max error {e:.3e}"))?;
        ensure(secs < 5.0, || format!("p = {p}: {secs:.2} s"))?;
        worst = worst.max(e);
        slowest = slowest.max(secs);
    }
    Ok(format!("max error {worst:.1e}, slowest {slowest:.3} s"))
}

fn c2_kraus_round_trip() -> Outcome {
    let chi = chi_block(&exact_dataset(&probabilistic_cnot(1.0).map_err(err)?).map_err(err)?).map_err(err)?;
    let ex = kraus_from_chi(&chi).map_err(err)?;
    let ops = ex.channel.kraus();
    ensure(ops.len() == 1, || format!("{} Kraus operators", ops.len()))?;
    let overlap = trace(&(ops[0].adjoint() * StandardGate::Cnot.matrix())).norm() / 4.0;
    ensure(overlap > 1.0 - 1e-9, || format!("|Tr(E^dag CNOT)|/4 = {overlap}"))?;
    Ok(format!("single operator, |Tr(E^dag CNOT)|/4 = {overlap:.12}"))
}

fn c3_method_agreement() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded_rng(2024);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let ch = random_channel(4, 1 + k % 4, &mut rng);
        let ds = exact_dataset(&ch).map_err(err)?;
        let a = chi_block(&ds).map_err(err)?;
        let b = chi_via_beta(&ds).map_err(err)?;
        worst = worst.max(max_abs_diff(a.matrix(), b.matrix()));
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(worst < 1e-8, || format!("max difference {worst:.3e}"))?;
    ensure(secs < 60.0, || format!("{secs:.1} s"))?;
    Ok(format!("50 maps, max difference {worst:.1e}, {secs:.2} s"))
}

fn six_record(rho: &DensityMatrix) -> ProbabilityRecord {
    ProbabilityRecord::from_bases(
        rho,
        &[(Basis::Z, Basis::Z), (Basis::X, Basis::X), (Basis::Y, Basis::Y)],
    )
}

fn c4_witness_identity() -> Outcome {
    let mut rng = seeded_rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rho = random_state(4, Purity::Mixed, &mut rng);
        for b in Bell::ALL {
            let d = witness_for_bell(b).expectation(&rho) - (0.5 - bell_fidelity(&rho, b));
            worst = worst.max(d.abs());
        }
    }
    ensure(worst < 1e-12, || format!("max |diff| {worst:.3e}"))?;
    Ok(format!("1000 states x 4 labels, max |diff| {worst:.1e}"))
}

fn c5_six_probability() -> Outcome {
    let mut rng = seeded_rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rho = random_state(4, Purity::Mixed, &mut rng);
        let rec = six_record(&rho);
        let six = bell_fidelity_from_six(&rec).map_err(err)?;
        for b in Bell::ALL {
            worst = worst.max((six.get(b) - bell_fidelity(&rho, b)).abs());
            let w = witness_expectation_from_six(&rec, b).map_err(err)?;
            worst = worst.max((w - witness_for_bell(b).expectation(&rho)).abs());
        }
    }
    ensure(worst < 1e-12, || format!("max |diff| {worst:.3e}"))?;
    Ok(format!(
        "1000 states, fidelities and witnesses, max |diff| {worst:.1e}"
    ))
}

fn c6_semiclassical() -> Outcome {
    let plus_zero = PureState::from_slice(&[
        c(FRAC_1_SQRT_2, 0.0),
        c(0.0, 0.0),
        c(FRAC_1_SQRT_2, 0.0),
        c(0.0, 0.0),
    ])
    .map_err(err)?
    .to_density();
    let ideal = TruthTable::ideal_cnot();

    let measure = semiclassical_cnot(SemiclassicalOrientation::MeasureControl);
    let inq = inquisition(&truth_table_of_channel(&measure).map_err(err)?, &ideal);
    ensure((inq - 1.0).abs() < 1e-12, || {
        format!("measure-control inquisition {inq}")
    })?;
    let out = apply_channel(&measure, &plus_zero).map_err(err)?.state;
    let max_par = (0..16)
        .map(|k| parity(&out, PI * k as f64 / 16.0).abs())
        .fold(0.0, f64::max);
    ensure(max_par < 1e-12, || {
        format!("measure-control parity reaches {max_par:.3e}")
    })?;

    let hadamard = semiclassical_cnot(SemiclassicalOrientation::HadamardConjugated);
    let inq_h = inquisition(&truth_table_of_channel(&hadamard).map_err(err)?, &ideal);
    ensure(inq_h < 1.0 - 1e-6, || {
        format!("hadamard-conjugated inquisition {inq_h}")
    })?;
    let out_h = apply_channel(&hadamard, &plus_zero).map_err(err)?.state;
    let fringe = parity_fringe(&out_h, 16);
    let amp = fringe.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let (_, b, cc) = fit_two_phi_fringe(&fringe);
    let two_phi = b.hypot(cc);
    ensure(amp > 0.5, || {
        format!("hadamard-conjugated parity amplitude {amp}")
    })?;
    ensure(two_phi > 1e-3, || format!("no 2phi component ({two_phi:.3e})"))?;
    Ok(format!(
        "measure-control: inquisition 1, |parity| <= {max_par:.1e}; hadamard-conjugated: inquisition {inq_h:.3}, parity amplitude {amp:.3}, cos/sin 2phi weight {two_phi:.3}"
    ))
}

/// Largest CHSH value: `2 sqrt(m1 + m2)` over the two largest eigenvalues of `T^T T`,
/// `T_ij = <sigma_i (x) sigma_j>`.
fn horodecki_chsh(rho: &DensityMatrix) -> f64 {
    let t = nalgebra::DMatrix::<f64>::from_fn(3, 3, |i, j| {
        rho.expectation(&tensor(&pauli(i + 1), &pauli(j + 1))).re
    });
    let mut ev: Vec<f64> = (t.transpose() * t)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    2.0 * (ev[0] + ev[1]).sqrt()
}

fn c7_chsh() -> Outcome {
    let bell = Bell::PhiPlus.state().to_density();
    let product = PureState::basis(4, 0).to_density();
    let top = chsh_from_tangle(1.0, &bell).map_err(err)?;
    let bottom = chsh_from_tangle(0.0, &product).map_err(err)?;
    ensure((top - 2.0 * 2f64.sqrt()).abs() < 1e-12, || {
        format!("T = 1 gives {top}")
    })?;
    ensure((bottom - 2.0).abs() < 1e-12, || format!("T = 0 gives {bottom}"))?;
    let mut rng = seeded_rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_state(4, Purity::Pure, &mut rng);
        let b = chsh_from_tangle(tangle(&rho).map_err(err)?, &rho).map_err(err)?;
        worst = worst.max((b - horodecki_chsh(&rho)).abs());
    }
    ensure(worst < 1e-6, || {
        format!("max |diff| vs Horodecki oracle {worst:.3e}")
    })?;
    Ok(format!(
        "endpoints 2sqrt2 and 2; 100 pure states, max |diff| {worst:.1e}"
    ))
}

fn c8_tomography() -> Outcome {
    let mut rng = seeded_rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let rho = random_state(4, Purity::Mixed, &mut rng);
        let rec = simulate_tomography(&rho, None, 0).map_err(err)?;
        let est = reconstruct_linear(&rec).map_err(err)?;
        worst = worst.max(max_abs_diff(&est.matrix, rho.matrix()));
    }
    ensure(worst < 1e-10, || {
        format!("linear inversion max error {worst:.3e}")
    })?;
    let phi = Bell::PhiPlus.state();
    let truth = phi.to_density();
    let mut fids = Vec::new();
    for seed in 0..5 {
        let rec = simulate_tomography(&truth, Some(1_000_000), seed).map_err(err)?;
        let mle = mle_reconstruct(&rec, &MleConfig::default()).map_err(err)?;
        fids.push(mle.state.expectation(&phi.projector()).re);
    }
    let min = fids.iter().copied().fold(1.0, f64::min);
    ensure(min > 0.999, || format!("MLE fidelities {fids:?}"))?;
    Ok(format!(
        "500 states, linear max error {worst:.1e}; MLE fidelity >= {min:.6} on 5 seeds"
    ))
}

/// `(Tr sqrt(sqrt(rho) rho~ sqrt(rho)))`-style concurrence from the Hermitian form.
fn brute_force_tangle(rho: &DensityMatrix) -> f64 {
    let yy = tensor(&pauli(2), &pauli(2));
    let flipped = &yy * rho.matrix().map(|z| z.conj()) * &yy;
    let root = psd_sqrt(rho.matrix()).unwrap();
    let inner = &root * flipped * &root;
    let h = (&inner + inner.adjoint()).scale(0.5);
    let mut l: Vec<f64> = hermitian_eig(&h)
        .unwrap()
        .values
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0).powi(2)
}

fn c9_werner() -> Outcome {
    let phi = Bell::PhiPlus.state();
    let mut worst: f64 = 0.0;
    for k in 0..=20 {
        let p = k as f64 / 20.0;
        let rho = werner_state(p, &phi).map_err(err)?;
        let t_closed = (0.5 * (3.0 * p - 1.0)).max(0.0).powi(2);
        let s_closed = 4.0 / 3.0 * (1.0 - (1.0 + 3.0 * p * p) / 4.0);
        let purity = trace(&(rho.matrix() * rho.matrix())).re;
        let s_direct = 4.0 / 3.0 * (1.0 - purity);
        for d in [
            brute_force_tangle(&rho) - t_closed,
            tangle(&rho).map_err(err)? - t_closed,
            werner_tangle(p) - t_closed,
            s_direct - s_closed,
            linear_entropy(&rho) - s_closed,
            werner_linear_entropy(p) - s_closed,
        ] {
            worst = worst.max(d.abs());
        }
    }
    ensure(worst < 1e-10, || format!("closed forms off by {worst:.3e}"))?;
    let cfg = PlaneConfig {
        samples_per_family: 300,
        seed: 9,
        ..Default::default()
    };
    let data = generate_plane(&[Family::Werner], &cfg, Exec::default()).map_err(err)?;
    let mut off: f64 = 0.0;
    let mut checked = 0;
    for s in &data.samples {
        let p = (1.0 - s.linear_entropy).sqrt();
        if p >= 1.0 / 3.0 {
            checked += 1;
            off = off.max((s.tangle - werner_tangle(p)).abs());
        }
    }
    ensure(off < 1e-9, || {
        format!("plane samples off the Werner curve by {off:.3e}")
    })?;
    let on_curve = data
        .werner_curve
        .iter()
        .all(|&(sl, t)| (t - werner_tangle((1.0 - sl).sqrt())).abs() < 1e-9);
    ensure(on_curve, || {
        "emitted Werner curve inconsistent with closed form".into()
    })?;
    Ok(format!(
        "21 weights, max |diff| {worst:.1e}; {checked} plane samples within {off:.1e} of the curve"
    ))
}

fn c10_gate_metrics() -> Outcome {
    let cnot = StandardGate::Cnot.channel();
    let id = QuantumChannel::identity(4);
    let mut notes = Vec::new();
    for (k, p) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let ch = probabilistic_cnot(p).map_err(err)?;
        let fg = min_gate_fidelity(&cnot, &ch, &MinFidelityConfig::default(), Exec::default())
            .map_err(err)?
            .value;
        let sampled =
            sample_min_gate_fidelity(&cnot, &ch, 100_000, &mut seeded_rng(100 + k as u64)).map_err(err)?;
        ensure((fg - p).abs() < 2e-3, || format!("F_g({p}) = {fg}"))?;
        ensure(fg <= sampled + 1e-12, || {
            format!("F_g({p}) = {fg} above sampled minimum {sampled}")
        })?;
        notes.push(format!("F_g({p})={fg:.6}"));
    }
    let avg = average_gate_fidelity(&cnot, &id).map_err(err)?;
    ensure((avg - 0.4).abs() < 1e-9, || format!("F_avg(CNOT, I) = {avg}"))?;
    let mc = haar_average_gate_fidelity(&cnot, &id, 1_000_000, 10, Exec::default()).map_err(err)?;
    ensure((mc.mean - 0.4).abs() < 3.0 * mc.std_error, || {
        format!("Haar estimate {mc:?}")
    })?;
    let mut rng = seeded_rng(10);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let ch = random_channel(4, 1 + k % 4, &mut rng);
        let a = average_gate_fidelity(&cnot, &ch).map_err(err)?;
        let f = process_fidelity(&cnot, &ch).map_err(err)?;
        worst = worst.max((a - (4.0 * f + 1.0) / 5.0).abs());
    }
    ensure(worst < 1e-9, || format!("F_avg vs F_pro off by {worst:.3e}"))?;
    Ok(format!(
        "{}; F_avg(CNOT,I)={avg:.12}, Haar {:.5}±{:.5}; identity max |diff| {worst:.1e}",
        notes.join(" "),
        mc.mean,
        mc.std_error
    ))
}

fn c11_equal_weight() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [
        c(1.0, 0.0),
        c(0.5, 0.0),
        num_complex::Complex64::from_polar(0.5, PI / 3.0),
    ] {
        let rho = epsilon_output_state(eps).to_density();
        let (r, xi) = eps.to_polar();
        for k in 0..16 {
            let phi = PI * k as f64 / 16.0;
            let v = equal_weight_visibility(&rho, phi, phi).map_err(err)?;
            let closed = 2.0 * r / (1.0 + r * r) * (2.0 * phi + xi).cos();
            worst = worst.max((v - closed).abs());
        }
    }
    ensure(worst < 1e-10, || format!("max |diff| {worst:.3e}"))?;
    Ok(format!("3 amplitudes x 16 phases, max |diff| {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "process matrix of the probabilistic CNOT",
            c1_probabilistic_cnot_chi,
        ),
        ("Kraus round trip recovers CNOT", c2_kraus_round_trip),
        ("block and beta-inversion routes agree", c3_method_agreement),
        ("witness-fidelity identity", c4_witness_identity),
        ("six-probability formulas", c5_six_probability),
        ("semi-classical CNOT discrimination", c6_semiclassical),
        ("pure-state CHSH relation", c7_chsh),
        ("tomography round trip", c8_tomography),
        ("Werner-family analytics", c9_werner),
        ("gate metrics", c10_gate_metrics),
        ("equal-weight visibility closed form", c11_equal_weight),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {:>2}  {name}: {detail} [{secs:.2} s]", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {:>2}  {name}: {detail} [{secs:.2} s]", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
