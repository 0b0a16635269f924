//! Tangle versus linear entropy: sampled state families, the Werner curve and a
//! numerically maximized upper boundary.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::werner_state;
use crate::error::{Error, Result};
use crate::exec::{item_seed, Exec};
use crate::linalg::{c, ComplexMatrix};
use crate::measures::{linear_entropy, tangle};
use crate::optim::NelderMead;
use crate::state::{random_state, seeded_rng, Bell, DensityMatrix, Purity};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `p |phi+><phi+| + (1 - p) I/4`, `p` uniform on `[0, 1]`.
    Werner,
    /// Hilbert–Schmidt random mixed states.
    RandomMixed,
    /// Haar-random pure states.
    RandomPure,
    /// Random members of the state family searched for the boundary.
    MemsProbe,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Werner,
        Family::RandomMixed,
        Family::RandomPure,
        Family::MemsProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Werner => "werner",
            Family::RandomMixed => "random_mixed",
            Family::RandomPure => "random_pure",
            Family::MemsProbe => "mems_probe",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "werner" => Ok(Family::Werner),
            "random" | "random_mixed" => Ok(Family::RandomMixed),
            "pure" | "random_pure" => Ok(Family::RandomPure),
            "mems" | "mems_probe" => Ok(Family::MemsProbe),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSample {
    pub family: Family,
    pub label: String,
    pub linear_entropy: f64,
    pub tangle: f64,
}

impl PlaneSample {
    pub fn of_state(family: Family, label: String, rho: &DensityMatrix) -> Result<Self> {
        Ok(Self {
            family,
            label,
            linear_entropy: linear_entropy(rho).clamp(0.0, 1.0),
            tangle: tangle(rho)?.clamp(0.0, 1.0),
        })
    }
}

/// Closed-form tangle of the Werner state with weight `p`.
pub fn werner_tangle(p: f64) -> f64 {
    (0.5 * (3.0 * p - 1.0)).max(0.0).powi(2)
}

/// Closed-form normalized linear entropy of the Werner state with weight `p`.
pub fn werner_linear_entropy(p: f64) -> f64 {
    4.0 / 3.0 * (1.0 - (1.0 + 3.0 * p * p) / 4.0)
}

/// `(S_L, T)` along the Werner family for `n` evenly spaced weights in `[0, 1]`.
pub fn werner_curve(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let p = k as f64 / (n - 1) as f64;
            (werner_linear_entropy(p), werner_tangle(p))
        })
        .collect()
}

/// Real X state with populations `pop` on `|00>, |01>, |10>, |11>` and coherence `z`
/// between `|00>` and `|11>`.
pub fn x_state(pop: [f64; 4], z: f64) -> Result<DensityMatrix> {
    let mut m = ComplexMatrix::zeros(4, 4);
    for (k, &p) in pop.iter().enumerate() {
        m[(k, k)] = c(p, 0.0);
    }
    m[(0, 3)] = c(z, 0.0);
    m[(3, 0)] = c(z, 0.0);
    DensityMatrix::new(m)
}

fn softmax(x: &[f64]) -> [f64; 4] {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let e = [(-m).exp(), (x[0] - m).exp(), (x[1] - m).exp(), (x[2] - m).exp()];
    let s: f64 = e.iter().sum();
    [e[0] / s, e[1] / s, e[2] / s, e[3] / s]
}

/// `lambda |psi><psi| + (1 - lambda) diag(d)` with `psi = cos(theta)|00> + sin(theta)|11>`,
/// returned as X-state populations and coherence.
fn mixture(theta: f64, d: &[f64; 4], lambda: f64) -> ([f64; 4], f64) {
    let (cs, sn) = (theta.cos(), theta.sin());
    let rest = 1.0 - lambda;
    (
        [
            lambda * cs * cs + rest * d[0],
            rest * d[1],
            rest * d[2],
            lambda * sn * sn + rest * d[3],
        ],
        lambda * cs * sn,
    )
}

/// Largest mixing weight giving purity `target`, or the size of the shortfall.
fn weight_for_purity(theta: f64, d: &[f64; 4], target: f64) -> std::result::Result<f64, f64> {
    let overlap = theta.cos().powi(2) * d[0] + theta.sin().powi(2) * d[3];
    let sq: f64 = d.iter().map(|v| v * v).sum();
    let qa = 1.0 - 2.0 * overlap + sq;
    let qb = 2.0 * (overlap - sq);
    let qc = sq - target;
    if qa < 1e-15 {
        return if qc.abs() < 1e-15 { Ok(1.0) } else { Err(qc.abs()) };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(-disc / (4.0 * qa));
    }
    let lambda = (-qb + disc.sqrt()) / (2.0 * qa);
    if (-1e-12..=1.0 + 1e-12).contains(&lambda) {
        Ok(lambda.clamp(0.0, 1.0))
    } else {
        Err((lambda - lambda.clamp(0.0, 1.0)).abs())
    }
}

fn x_concurrence(pop: &[f64; 4], z: f64) -> f64 {
    2.0 * (z.abs() - (pop[1] * pop[2]).sqrt()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            restarts: 12,
            seed: 7,
        }
    }
}

/// Largest tangle at linear entropy exactly `s`, searched over mixtures of a pure
/// `|00>, |11>` superposition with a diagonal state; the mixing weight is solved
/// from the entropy constraint.
pub fn boundary_at(s: f64, cfg: &BoundaryConfig) -> Result<(f64, DensityMatrix)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(format!("linear entropy {s} not in [0, 1]")));
    }
    if s == 1.0 {
        return Ok((0.0, DensityMatrix::maximally_mixed(4)));
    }
    let purity = 1.0 - 0.75 * s;
    let objective = |x: &[f64]| {
        let d = softmax(&x[1..]);
        match weight_for_purity(x[0], &d, purity) {
            Ok(lambda) => {
                let (pop, z) = mixture(x[0], &d, lambda);
                -x_concurrence(&pop, z).powi(2)
            }
            Err(shortfall) => 1.0 + shortfall,
        }
    };
    let nm = NelderMead {
        initial_step: 0.7,
        f_tol: 1e-15,
        max_evals: 6000,
    };
    let mut rng = seeded_rng(cfg.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let mut x0: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        x0[0] = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let m = nm.minimize(objective, &x0);
        if best.as_ref().is_none_or(|b| m.value < b.0) {
            best = Some((m.value, m.x));
        }
    }
    let (value, x) = best.expect("at least one restart");
    if value > 0.0 {
        return Err(Error::Numerical(format!(
            "no state found with linear entropy {s}"
        )));
    }
    let d = softmax(&x[1..]);
    let lambda = weight_for_purity(x[0], &d, purity).expect("feasible optimum");
    let (pop, z) = mixture(x[0], &d, lambda);
    let rho = x_state(pop, z)?;
    Ok((tangle(&rho)?, rho))
}

/// `(S_L, T_max)` on `n` evenly spaced entropies.
pub fn numerical_boundary(n: usize, cfg: &BoundaryConfig, exec: Exec) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    exec.map_indexed(n, |k| {
        let s = k as f64 / (n - 1) as f64;
        boundary_at(s, cfg).map(|(t, _)| (s, t))
    })
    .into_iter()
    .collect()
}

fn sample_family(family: Family, seed: u64, index: usize) -> Result<PlaneSample> {
    let mut rng = seeded_rng(seed);
    match family {
        Family::Werner => {
            let p: f64 = rng.random_range(0.0..=1.0);
            let rho = werner_state(p, &Bell::PhiPlus.state())?;
            PlaneSample::of_state(family, format!("p={p}"), &rho)
        }
        Family::RandomMixed => PlaneSample::of_state(
            family,
            format!("mixed#{index}"),
            &random_state(4, Purity::Mixed, &mut rng),
        ),
        Family::RandomPure => PlaneSample::of_state(
            family,
            format!("pure#{index}"),
            &random_state(4, Purity::Pure, &mut rng),
        ),
        Family::MemsProbe => {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let lambda = rng.random_range(0.0..=1.0);
            let (pop, z) = mixture(theta, &softmax(&x), lambda);
            PlaneSample::of_state(family, format!("x#{index}"), &x_state(pop, z)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneData {
    pub samples: Vec<PlaneSample>,
    pub werner_curve: Vec<(f64, f64)>,
    pub boundary: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneConfig {
    pub samples_per_family: usize,
    pub seed: u64,
    pub curve_points: usize,
    pub boundary: BoundaryConfig,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self {
            samples_per_family: 500,
            seed: 0,
            curve_points: 101,
            boundary: BoundaryConfig::default(),
        }
    }
}

/// Samples every requested family, builds both overlay series and checks that no
/// sample lies above the boundary at its own entropy.
pub fn generate_plane(families: &[Family], cfg: &PlaneConfig, exec: Exec) -> Result<PlaneData> {
    let n = cfg.samples_per_family;
    let jobs: Vec<(Family, usize, u64)> = families
        .iter()
        .enumerate()
        .flat_map(|(f, &fam)| {
            let base = item_seed(cfg.seed, f as u64);
            (0..n).map(move |i| (fam, i, item_seed(base, i as u64)))
        })
        .collect();
    let samples = exec
        .map_slice(&jobs, |&(fam, i, seed)| sample_family(fam, seed, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let data = PlaneData {
        werner_curve: werner_curve(cfg.curve_points),
        boundary: numerical_boundary(cfg.curve_points, &cfg.boundary, exec)?,
        samples,
    };
    check_below_boundary(&data.samples, &cfg.boundary, exec)?;
    Ok(data)
}

/// Tolerance for the post-hoc boundary check.
pub const BOUNDARY_TOL: f64 = 1e-7;

pub fn check_below_boundary(samples: &[PlaneSample], cfg: &BoundaryConfig, exec: Exec) -> Result<()> {
    let violations = exec.map_slice(samples, |s| -> Result<Option<String>> {
        let (bound, _) = boundary_at(s.linear_entropy, cfg)?;
        Ok((s.tangle > bound + BOUNDARY_TOL).then(|| {
            format!(
                "{} sample {} has tangle {:.9} above boundary {:.9} at S_L = {:.6}",
                s.family.name(),
                s.label,
                s.tangle,
                bound,
                s.linear_entropy
            )
        }))
    });
    for v in violations {
        if let Some(msg) = v? {
            return Err(Error::Numerical(msg));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Known maximally entangled mixed state frontier in these coordinates.
    fn mems_oracle(s: f64) -> f64 {
        if s <= 16.0 / 27.0 {
            let r = 0.5 + (0.25 - 3.0 * s / 8.0).sqrt();
            r * r
        } else {
            (1.5 * (8.0 / 9.0 - s)).max(0.0)
        }
    }

    #[test]
    fn werner_closed_forms_match_direct_computation() {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let rho = werner_state(p, &Bell::PhiPlus.state()).unwrap();
            assert!((tangle(&rho).unwrap() - werner_tangle(p)).abs() < 1e-10);
            assert!((linear_entropy(&rho) - werner_linear_entropy(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_matches_known_frontier() {
        let cfg = BoundaryConfig::default();
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let (t, rho) = boundary_at(s, &cfg).unwrap();
            assert!((linear_entropy(&rho) - s).abs() < 1e-9);
            assert!(
                (t - mems_oracle(s)).abs() < 1e-6,
                "s = {s}: {t} vs {}",
                mems_oracle(s)
            );
        }
    }

    #[test]
    fn plane_families() {
        let cfg = PlaneConfig {
            samples_per_family: 40,
            seed: 3,
            curve_points: 21,
            ..Default::default()
        };
        let data = generate_plane(&Family::ALL, &cfg, Exec::default()).unwrap();
        assert_eq!(data.samples.len(), 160);
        for s in &data.samples {
            match s.family {
                Family::RandomPure => assert!(s.linear_entropy < 1e-9),
                Family::Werner => {
                    let p: f64 = s.label[2..].parse().unwrap();
                    let p_exact = ((1.0 - 0.75 * s.linear_entropy - 0.25) / 0.75).sqrt();
                    assert!((p - p_exact).abs() < 1e-6);
                    assert!((s.tangle - werner_tangle(p_exact)).abs() < 1e-9);
                }
                _ => {}
            }
        }
        let again = generate_plane(&Family::ALL, &cfg, Exec::Sequential).unwrap();
        assert_eq!(data, again);
    }

    #[test]
    fn family_names() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert_eq!("random".parse::<Family>().unwrap(), Family::RandomMixed);
        assert!("gibbs".parse::<Family>().is_err());
    }
}
