use gatebench::exec::Exec;
use gatebench::plane::{generate_plane, Family, PlaneConfig};

use crate::error::{CliError, CliResult};

/// Rows `series,family,label,linear_entropy,tangle`: every sample, then the Werner
/// curve and the numerical boundary.
pub fn plane_csv(
    families: &[Family],
    n: usize,
    seed: u64,
    curve_points: usize,
    exec: Exec,
) -> CliResult<String> {
    let cfg = PlaneConfig {
        samples_per_family: n,
        seed,
        curve_points,
        ..PlaneConfig::default()
    };
    let data = generate_plane(families, &cfg, exec)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::numerical(format!("writing CSV: {e}"));
    w.write_record(["series", "family", "label", "linear_entropy", "tangle"])
        .map_err(csv_err)?;
    for s in &data.samples {
        w.write_record([
            "sample",
            s.family.name(),
            &s.label,
            &format!("{:.12}", s.linear_entropy),
            &format!("{:.12}", s.tangle),
        ])
        .map_err(csv_err)?;
    }
    for (series, points) in [
        ("werner curve", &data.werner_curve),
        ("numerical boundary", &data.boundary),
    ] {
        for (k, (s_l, t)) in points.iter().enumerate() {
            w.write_record([
                series,
                "",
                &k.to_string(),
                &format!("{s_l:.12}"),
                &format!("{t:.12}"),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::numerical(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}
