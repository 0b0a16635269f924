//! Small unconstrained minimizers: Nelder–Mead simplex and BFGS.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            f_tol: 1e-12,
            max_evals: 20_000,
        }
    }
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }

        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if (worst - best).abs() <= self.f_tol * (1.0 + best.abs()) {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for entry in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = x_best
                    .iter()
                    .zip(&entry.0)
                    .map(|(b, xi)| b + sigma * (xi - b))
                    .collect();
                let v = eval(&x, &mut evals);
                *entry = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evaluations: evals,
            converged,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Bfgs {
    /// Stop when the objective improves by less than this over `stall_window` iterations.
    pub f_tol: f64,
    pub stall_window: usize,
    pub grad_tol: f64,
    pub max_evals: usize,
}

impl Default for Bfgs {
    fn default() -> Self {
        Self {
            f_tol: 1e-10,
            stall_window: 10,
            grad_tol: 1e-10,
            max_evals: 100_000,
        }
    }
}

impl Bfgs {
    /// `fg` returns the objective and writes the gradient into its second argument.
    pub fn minimize<F: FnMut(&[f64], &mut [f64]) -> f64>(&self, mut fg: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 1usize;
        let mut x = x0.to_vec();
        let mut g = vec![0.0; n];
        let mut fx = fg(&x, &mut g);
        let mut h = identity_flat(n);
        let mut history = vec![fx];
        let mut converged = false;

        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        while evals < self.max_evals {
            if norm(&g) <= self.grad_tol {
                converged = true;
                break;
            }
            let mut d = mat_vec(&h, &g, n);
            d.iter_mut().for_each(|v| *v = -*v);
            let mut slope = dot(&g, &d);
            if slope >= 0.0 {
                h = identity_flat(n);
                d = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }

            let mut step = 1.0;
            let mut accepted = false;
            while evals < self.max_evals {
                for i in 0..n {
                    x_new[i] = x[i] + step * d[i];
                }
                let f_new = fg(&x_new, &mut g_new);
                evals += 1;
                if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                    let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                    let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-16 * norm(&s) * norm(&y) && sy > 0.0 {
                        update_inverse_hessian(&mut h, &s, &y, sy, n);
                    }
                    x.copy_from_slice(&x_new);
                    g.copy_from_slice(&g_new);
                    fx = f_new;
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    break;
                }
            }
            if !accepted {
                if h != identity_flat(n) {
                    h = identity_flat(n);
                    continue;
                }
                converged = true;
                break;
            }
            history.push(fx);
            if history.len() > self.stall_window {
                let past = history[history.len() - 1 - self.stall_window];
                if past - fx < self.f_tol {
                    converged = true;
                    break;
                }
            }
        }
        Minimum {
            x,
            value: fx,
            evaluations: evals,
            converged,
        }
    }
}

fn identity_flat(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(h: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

fn update_inverse_hessian(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}
