use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gatebench"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &str, doc: &Value) {
    let schema = read_json(&repo(&format!("docs/schemas/{schema}")));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn indicator<'a>(list: &'a Value, symbol: &str) -> &'a Value {
    list.as_array()
        .unwrap()
        .iter()
        .find(|i| i["symbol"] == symbol)
        .unwrap_or_else(|| panic!("no indicator {symbol}"))
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

/// `(error kind, exit code)` of a failing run, after checking the stderr document.
fn failure(args: &[&str]) -> (String, i32) {
    let out = run(args);
    let code = out.status.code().unwrap();
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_valid("error.schema.json", &err);
    assert_eq!(err["error"]["exit_code"], code);
    (err["error"]["kind"].as_str().unwrap().to_string(), code)
}

#[test]
fn cnot_simple_tier_hits_ideal_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "characterize",
        "--channel",
        "cnot",
        "--tier",
        "simple",
        "--out",
        out,
    ]);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("characterize_report.schema.json", &report);
    let s = &report["simple_measures"];
    for (symbol, want) in [
        ("I", 1.0),
        ("V_L", 1.0),
        ("V_E(0)", 1.0),
        ("Pi(0)", 1.0),
        ("F_phi+", 1.0),
        ("<W_phi+>", -0.5),
    ] {
        let i = indicator(&s["indicators"], symbol);
        assert!((f(&i["value"]) - want).abs() < 1e-12, "{symbol}");
        assert_eq!(i["within_bounds"], true);
    }
    assert!(s["settings"].as_array().unwrap().len() <= 10);
    assert!(s["flags"].as_array().unwrap().is_empty());
    assert!(fs::read_to_string(dir.path().join("report.txt"))
        .unwrap()
        .contains("1 >= |V_L| > 0"));
}

#[test]
fn semiclassical_gate_fails_parity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "characterize",
        "--channel",
        "semiclassical_cnot",
        "--tier",
        "simple",
        "--out",
        out,
    ]);
    let s = &read_json(&dir.path().join("report.json"))["simple_measures"];
    assert!((f(&indicator(&s["indicators"], "I")["value"]) - 1.0).abs() < 1e-12);
    assert!(f(&indicator(&s["indicators"], "Pi(0)")["value"]).abs() < 1e-12);
    assert!(s["flags"].as_array().unwrap().iter().any(|v| v == "fails parity"));
}

fn chi_oracle(p: f64) -> Vec<Vec<f64>> {
    let labels: Vec<String> = ["I", "X", "Y", "Z"]
        .iter()
        .flat_map(|a| ["I", "X", "Y", "Z"].iter().map(move |b| format!("{a}{b}")))
        .collect();
    let idx = |l: &str| labels.iter().position(|x| x == l).unwrap();
    let mut cnot = [0.0; 16];
    for (l, a) in [("II", 0.5), ("IX", 0.5), ("ZI", 0.5), ("ZX", -0.5)] {
        cnot[idx(l)] = a;
    }
    (0..16)
        .map(|m| {
            (0..16)
                .map(|n| p * cnot[m] * cnot[n] + if m == 0 && n == 0 { 1.0 - p } else { 0.0 })
                .collect()
        })
        .collect()
}

#[test]
fn probabilistic_cnot_process_matrix_matches_analytic_form() {
    for p in ["0", "0.5", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let param = format!("p={p}");
        ok(&[
            "characterize",
            "--channel",
            "probabilistic_cnot",
            "--param",
            &param,
            "--tier",
            "proctomo",
            "--out",
            out,
        ]);
        let chi = read_json(&dir.path().join("chi.json"));
        assert_valid("chi.schema.json", &chi);
        let want = chi_oracle(p.parse().unwrap());
        for (m, row) in chi["matrix"].as_array().unwrap().iter().enumerate() {
            for (n, z) in row.as_array().unwrap().iter().enumerate() {
                assert!((f(&z[0]) - want[m][n]).abs() < 1e-9, "p={p} ({m},{n})");
                assert!(f(&z[1]).abs() < 1e-9);
            }
        }
        assert_valid(
            "process_dataset.schema.json",
            &read_json(&dir.path().join("dataset.json")),
        );
        assert_valid(
            "kraus_extraction.schema.json",
            &read_json(&dir.path().join("kraus.json")),
        );
        let report = read_json(&dir.path().join("report.json"));
        assert_valid("characterize_report.schema.json", &report);
        let rank = if p == "0" || p == "1" { 1 } else { 2 };
        assert_eq!(report["process_tomography"]["kraus_rank"], rank);
        assert!(fs::read_to_string(dir.path().join("chi.txt"))
            .unwrap()
            .contains("ZX"));
    }
}

#[test]
fn process_tomo_command_reports_gate_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let file = repo("docs/examples/channel_noisy_cnot.json");
    ok(&["process-tomo", "--channel", file.to_str().unwrap(), "--out", out]);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("process_report.schema.json", &report);
    assert_valid(
        "gate_comparison.schema.json",
        &read_json(&dir.path().join("gate_comparison.json")),
    );
    let m = &report["gate_metrics"]["indicators"];
    let (fg, favg, fi) = (
        f(&indicator(m, "F_g")["value"]),
        f(&indicator(m, "F_avg")["value"]),
        f(&indicator(m, "F_i")["value"]),
    );
    // CNOT then depolarizing with q = 0.1: F_i = 1 - 15q/16 and F_avg = (4 F_i + 1)/5.
    assert!((fi - (1.0 - 1.5 / 16.0)).abs() < 1e-6, "{fi}");
    assert!((favg - (4.0 * fi + 1.0) / 5.0).abs() < 1e-6);
    assert!(fg <= favg + 1e-9);
}

#[test]
fn sampled_runs_are_byte_reproducible_across_exec_modes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "characterize".to_string(),
            "--channel".into(),
            "probabilistic_cnot".into(),
            "--param".into(),
            "p=0.8".into(),
            "--tier".into(),
            "all".into(),
            "--shots".into(),
            "2000".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let out_a = bin().args(args(a.path())).output().unwrap();
    assert!(
        out_a.status.success(),
        "{}",
        String::from_utf8_lossy(&out_a.stderr)
    );
    let mut seq = args(b.path());
    seq.push("--sequential".into());
    assert!(bin().args(seq).output().unwrap().status.success());
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
    let report = read_json(&a.path().join("report.json"));
    assert_valid("characterize_report.schema.json", &report);
    assert_eq!(report["gate_metrics"]["evaluated"], "reconstructed channel");
}

#[test]
fn example_documents_match_their_schemas() {
    let pairs = [
        (
            "record_phi_plus_probability.json",
            "tomography_record.schema.json",
        ),
        ("record_werner_counts.json", "tomography_record.schema.json"),
        (
            "record_phi_plus_counts_low_shots.json",
            "tomography_record.schema.json",
        ),
        ("channel_noisy_cnot.json", "channel.schema.json"),
        ("error_unknown_channel.json", "error.schema.json"),
    ];
    for (doc, schema) in pairs {
        assert_valid(schema, &read_json(&repo(&format!("docs/examples/{doc}"))));
    }
    for entry in fs::read_dir(repo("docs/examples")).unwrap() {
        let dir = entry.unwrap().path();
        if !dir.is_dir() {
            continue;
        }
        let report = read_json(&dir.join("report.json"));
        let schema = if dir
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with("state_tomo")
        {
            "state_report.schema.json"
        } else if dir
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with("process_tomo")
        {
            "process_report.schema.json"
        } else {
            "characterize_report.schema.json"
        };
        assert_valid(schema, &report);
    }
}

#[test]
fn state_tomo_exact_phi_plus_gives_unit_fidelity_by_both_routes() {
    for method in ["linear", "mle"] {
        let dir = tempfile::tempdir().unwrap();
        let record = repo("docs/examples/record_phi_plus_probability.json");
        ok(&[
            "state-tomo",
            "--in",
            record.to_str().unwrap(),
            "--method",
            method,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        let report = read_json(&dir.path().join("report.json"));
        assert_valid("state_report.schema.json", &report);
        assert_valid(
            "density_matrix.schema.json",
            &read_json(&dir.path().join("state.json")),
        );
        let phi = &report["bell_fidelities"][0];
        assert_eq!(phi["state"], "phi+");
        assert!((f(&phi["six_probability"]) - 1.0).abs() < 1e-9);
        assert!((f(&phi["density_matrix"]) - 1.0).abs() < 1e-6, "{method}");
    }
}

#[test]
fn state_tomo_counts_routes_agree_statistically() {
    let dir = tempfile::tempdir().unwrap();
    let record = repo("docs/examples/record_werner_counts.json");
    ok(&[
        "state-tomo",
        "--in",
        record.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["mle"]["converged"], true);
    for r in report["bell_fidelities"].as_array().unwrap() {
        let gap = (f(&r["six_probability"]) - f(&r["density_matrix"])).abs();
        assert!(gap < 4.0 / 500f64.sqrt(), "{r}");
    }
    // Werner state with p = 0.8 around phi+: fidelity (1 + 3p)/4.
    assert!((f(&report["bell_fidelities"][0]["density_matrix"]) - 0.85).abs() < 0.05);
    assert!(report["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("six")));
}

#[test]
fn nonphysical_linear_inversion_warns_and_suggests_mle() {
    let dir = tempfile::tempdir().unwrap();
    let record = repo("docs/examples/record_phi_plus_counts_low_shots.json");
    ok(&[
        "state-tomo",
        "--in",
        record.to_str().unwrap(),
        "--method",
        "linear",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["linear_inversion_physical"], false);
    let warnings = report["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("--method mle")));
}

#[test]
fn plane_csv_has_samples_and_both_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.csv");
    ok(&[
        "plane",
        "--families",
        "werner,random,pure",
        "--n",
        "60",
        "--seed",
        "4",
        "--curve-points",
        "41",
        "--out",
        path.to_str().unwrap(),
    ]);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let num = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    let boundary: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| &r[0] == "numerical boundary")
        .map(|r| (num(r, 3), num(r, 4)))
        .collect();
    assert_eq!(boundary.len(), 41);
    assert_eq!(rows.iter().filter(|r| &r[0] == "werner curve").count(), 41);
    let samples: Vec<_> = rows.iter().filter(|r| &r[0] == "sample").collect();
    assert_eq!(samples.len(), 180);
    for r in samples {
        let (s_l, t) = (num(r, 3), num(r, 4));
        assert!((0.0..=1.0).contains(&s_l) && (0.0..=1.0 + 1e-12).contains(&t));
        // The boundary decreases with entropy, so its value at the grid point just below
        // the sample's entropy bounds the sample from above.
        let bound = boundary
            .iter()
            .filter(|(s, _)| *s <= s_l + 1e-12)
            .map(|(_, b)| *b)
            .fold(f64::INFINITY, f64::min);
        assert!(t <= bound + 1e-7, "{r:?} above {bound}");
        match &r[1] {
            "werner" => {
                let p: f64 = r[2][2..].parse().unwrap();
                let s_closed = 1.0 - p * p;
                let t_closed = if p > 1.0 / 3.0 {
                    ((3.0 * p - 1.0) / 2.0).powi(2)
                } else {
                    0.0
                };
                assert!((s_l - s_closed).abs() < 1e-9, "{p}: {s_l} vs {s_closed}");
                assert!((t - t_closed).abs() < 1e-9);
            }
            "random_pure" => assert!(s_l < 1e-9),
            _ => {}
        }
    }
}

#[test]
fn plane_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&[
        "plane",
        "--families",
        "random",
        "--n",
        "30",
        "--seed",
        "2",
        "--curve-points",
        "11",
        "--out",
        a.to_str().unwrap(),
    ]);
    ok(&[
        "plane",
        "--families",
        "random",
        "--n",
        "30",
        "--seed",
        "2",
        "--curve-points",
        "11",
        "--sequential",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn errors_carry_kind_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        failure(&[
            "characterize",
            "--channel",
            "toffoli",
            "--tier",
            "simple",
            "--out",
            out
        ]),
        ("schema".to_string(), 2)
    );
    assert_eq!(
        failure(&[
            "characterize",
            "--channel",
            "probabilistic_cnot",
            "--tier",
            "simple",
            "--out",
            out
        ]),
        ("schema".to_string(), 2)
    );
    assert_eq!(
        failure(&[
            "characterize",
            "--channel",
            "cnot",
            "--tier",
            "nonsense",
            "--out",
            out
        ]),
        ("usage".to_string(), 2)
    );
    assert_eq!(
        failure(&["state-tomo", "--in", "/nonexistent/record.json", "--out", out]),
        ("io".to_string(), 1)
    );
    assert_eq!(
        failure(&["plane", "--families", "ghz", "--out", "x.csv"]),
        ("schema".to_string(), 2)
    );

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"mode\": \"counts\",\n  \"qubits\": 2,\n  \"entries\": [\n    {\"setting\": [\"I\"], \"value\": }\n  ]\n}\n").unwrap();
    let stderr = run(&["state-tomo", "--in", bad.to_str().unwrap(), "--out", out]).stderr;
    let err: Value = serde_json::from_slice(&stderr).unwrap();
    assert!(
        err["error"]["message"].as_str().unwrap().contains("line 5"),
        "{err}"
    );

    let short = dir.path().join("short.json");
    fs::write(
        &short,
        r#"{"mode": "probability", "qubits": 2, "entries": [{"setting": ["I", "I"], "value": 1.0}]}"#,
    )
    .unwrap();
    assert_eq!(
        failure(&["state-tomo", "--in", short.to_str().unwrap(), "--out", out]),
        ("schema".to_string(), 2)
    );
}

#[test]
fn non_trace_preserving_file_is_rejected_for_process_tomography() {
    let dir = tempfile::tempdir().unwrap();
    let ch = dir.path().join("lossy.json");
    let half = [0.5f64.sqrt(), 0.0];
    let z = [0.0, 0.0];
    let k: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { half } else { z }).collect())
        .collect();
    fs::write(
        &ch,
        serde_json::json!({"label": "lossy", "kraus": [k]}).to_string(),
    )
    .unwrap();
    let (kind, code) = failure(&[
        "process-tomo",
        "--channel",
        ch.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!((kind.as_str(), code), ("schema", 2));
}
