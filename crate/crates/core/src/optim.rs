//! Derivative-free simplex search followed by quasi-Newton polishing.
//!
//! Objectives are minimized. An objective returns `f64::INFINITY` (or NaN)
//! for infeasible points; both stages treat such points as rejections.

use nalgebra::{DMatrix, DVector};

/// Newton iterations attempted when the quasi-Newton stage ends unconverged.
const NEWTON_POLISH_STEPS: usize = 8;

/// Consecutive sub-`tol` iterations tolerated while the gradient is still large.
const MAX_STALLED: usize = 25;

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    /// Cap on quasi-Newton iterations.
    pub max_iters: usize,
    /// Absolute objective improvement below which an iteration counts as stalled.
    pub tol: f64,
    /// Gradient norm required for convergence.
    pub grad_tol: f64,
    /// Function-evaluation budget of the simplex stage, per coordinate.
    pub simplex_evals_per_dim: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6, grad_tol: 1e-4, simplex_evals_per_dim: 300 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl OptimResult {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.gradient)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Finite-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Central-difference gradient and diagonal curvature. Falls back to a
/// one-sided difference when one neighbour is infeasible.
fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut Counted<F>, x: &[f64], fx: f64) -> (Vec<f64>, Vec<f64>) {
    let mut g = vec![0.0; x.len()];
    let mut curv = vec![f64::NAN; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let up = f.eval(&probe);
        probe[i] = x[i] - h;
        let down = f.eval(&probe);
        probe[i] = x[i];
        g[i] = match (up.is_finite(), down.is_finite()) {
            (true, true) => {
                curv[i] = (up - 2.0 * fx + down) / (h * h);
                (up - down) / (2.0 * h)
            }
            (true, false) => (up - fx) / h,
            (false, true) => (fx - down) / h,
            (false, false) => 0.0,
        };
    }
    (g, curv)
}

/// Gradient of `f` at `x` by central differences (used for diagnostics).
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut c = Counted { f, calls: 0 };
    let fx = c.eval(x);
    gradient(&mut c, x, fx).0
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut Counted<F>, x0: &[f64], budget: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f.eval(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-3 { 0.1 * v[i].abs() } else { 0.1 };
        v[i] += step;
        let mut fv = f.eval(&v);
        if !fv.is_finite() {
            v[i] = x0[i] - step;
            fv = f.eval(&v);
        }
        simplex.push((v, fv));
    }
    let start = f.calls;
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while f.calls - start < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along =
            |t: f64, from: &[f64]| -> Vec<f64> { centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha, &simplex[n].0);
        let fr = f.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma, &simplex[n].0);
            let fe = f.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(rho, &simplex[n].0);
                let fc = f.eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho, &simplex[n].0);
                let fc = f.eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&x_best) {
                        *x = b + sigma * (*x - b);
                    }
                    *fv = f.eval(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Minimizes `f` from `x0`. Returns `None` when `x0` itself is infeasible.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &OptimOptions) -> Option<OptimResult> {
    let mut f = Counted { f, calls: 0 };
    if !f.eval(x0).is_finite() {
        return None;
    }
    let n = x0.len();
    let (mut x, mut fx) = nelder_mead(&mut f, x0, opts.simplex_evals_per_dim * n);

    let (mut g, curv) = gradient(&mut f, &x, fx);
    let diag_inverse = |curv: &[f64]| -> Vec<Vec<f64>> {
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            let c = curv[i];
            h[i][i] = if c.is_finite() && c > 1e-8 { 1.0 / c } else { 1e-4 };
        }
        h
    };
    let mut hinv = diag_inverse(&curv);
    let mut iterations = 0;
    let mut stalled = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        let mut p: Vec<f64> = hinv.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            // lost descent: restart from the diagonal curvature
            let (_, c) = gradient(&mut f, &x, fx);
            hinv = diag_inverse(&c);
            p = hinv.iter().map(|row| -dot(row, &g)).collect();
            slope = dot(&p, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            let fxn = f.eval(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fxn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            converged = norm(&g) < opts.grad_tol;
            break;
        };
        let improvement = fx - fxn;
        let (gn, _) = gradient(&mut f, &xn, fxn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            // BFGS inverse-Hessian update
            let hy: Vec<f64> = hinv.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x = xn;
        fx = fxn;
        g = gn;
        let small_grad = norm(&g) < opts.grad_tol;
        if improvement < opts.tol {
            if small_grad {
                converged = true;
                break;
            }
            stalled += 1;
            if stalled >= MAX_STALLED {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if !converged {
        for _ in 0..NEWTON_POLISH_STEPS {
            let Some((xn, fxn, gn)) = newton_step(&mut f, &x, fx, &g) else {
                break;
            };
            iterations += 1;
            let improvement = fx - fxn;
            (x, fx, g) = (xn, fxn, gn);
            if norm(&g) < opts.grad_tol && improvement < opts.tol {
                converged = true;
                break;
            }
        }
        converged = converged || (norm(&g) < opts.grad_tol && stalled > 0);
    }

    Some(OptimResult { x, value: fx, gradient: g, iterations, evaluations: f.calls, converged })
}

/// Damped Newton step with the finite-difference Hessian. `None` when the
/// Hessian is not positive definite or no step makes progress. Near the
/// optimum the predicted decrease can fall below the rounding level of `f`,
/// so a full step that keeps `f` within a few ulps is taken when it shrinks
/// the gradient.
fn newton_step<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x: &[f64],
    fx: f64,
    g: &[f64],
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let hess = numerical_hessian(|p| f.eval(p), x)?;
    let p = hess.cholesky()?.solve(&DVector::from_column_slice(g));
    let slack = 8.0 * f64::EPSILON * fx.abs().max(1.0);
    let mut step = 1.0;
    for _ in 0..30 {
        let xn: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a - step * b).collect();
        let fxn = f.eval(&xn);
        if fxn.is_finite() && fxn < fx {
            let gn = gradient(f, &xn, fxn).0;
            return Some((xn, fxn, gn));
        }
        if step == 1.0 && fxn.is_finite() && fxn <= fx + slack {
            let gn = gradient(f, &xn, fxn).0;
            if norm(&gn) < norm(g) {
                return Some((xn, fxn, gn));
            }
        }
        step *= 0.5;
    }
    None
}

/// Step used by [`numerical_hessian`] for coordinate value `x`.
pub fn hessian_step(x: f64) -> f64 {
    (1e-4 * x.abs()).max(1e-5)
}

/// Central-difference Hessian of `f` at `x`; `None` if any probe is non-finite.
pub fn numerical_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Option<DMatrix<f64>> {
    let k = x.len();
    let f0 = f(x);
    let h: Vec<f64> = x.iter().map(|v| hessian_step(*v)).collect();
    let mut probe = x.to_vec();
    let mut eval = |probe: &mut Vec<f64>, steps: &[(usize, f64)]| {
        for &(i, s) in steps {
            probe[i] = x[i] + s;
        }
        let v = f(probe);
        for &(i, _) in steps {
            probe[i] = x[i];
        }
        v
    };
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        let up = eval(&mut probe, &[(i, h[i])]);
        let down = eval(&mut probe, &[(i, -h[i])]);
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let pp = eval(&mut probe, &[(i, h[i]), (j, h[j])]);
            let pm = eval(&mut probe, &[(i, h[i]), (j, -h[j])]);
            let mp = eval(&mut probe, &[(i, -h[i]), (j, h[j])]);
            let mm = eval(&mut probe, &[(i, -h[i]), (j, -h[j])]);
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.iter().all(|v| v.is_finite()).then_some(hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], &OptimOptions { tol: 1e-12, grad_tol: 1e-6, ..Default::default() })
            .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
        assert!(r.converged);
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of (x-1)^2 lies outside the allowed half-line x <= 0.5
        let f = |x: &[f64]| if x[0] > 0.5 { f64::INFINITY } else { (x[0] - 1.0).powi(2) };
        let r = minimize(f, &[-2.0], &OptimOptions::default()).unwrap();
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.49, "{:?}", r.x);
    }

    #[test]
    fn infeasible_start_returns_none() {
        assert!(minimize(|_: &[f64]| f64::INFINITY, &[0.0], &OptimOptions::default()).is_none());
    }

    #[test]
    fn badly_scaled_quadratic() {
        let f = |x: &[f64]| 1e5 * (x[0] - 3.0).powi(2) + 1e-2 * (x[1] + 2.0).powi(2) + x[0] * x[1] * 1e-1;
        let r = minimize(f, &[0.0, 0.0], &OptimOptions::default()).unwrap();
        let g = numerical_gradient(f, &r.x);
        assert!(norm(&g) < 1e-4, "{g:?}");
    }
}
