//! Constrained maximum-likelihood estimation.
//!
//! The optimizer runs in an unconstrained space:
//!
//! | family  | coordinates                                          |
//! |---------|------------------------------------------------------|
//! | GARCH   | ln ω, logit(α+β), logit(α/(α+β)), [ln(ν−2)]          |
//! | IGARCH  | ln ω, α, logit β, [ln(ν−2)]                          |
//! | FIGARCH | ln ω, α, logit β, logit d, [ln(ν−2)]                 |
//!
//! IGARCH and FIGARCH leave α unrestricted in sign; their feasible set is
//! cut out by nonnegativity of the ARCH(∞) weights instead.

use libm::erfc;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{self, numerical_hessian, OptimOptions};
use crate::series::ReturnSeries;
use crate::volmodel::{Innovation, Likelihood, ModelFamily, ParamVector, VarianceRecursion, DEFAULT_TRUNCATION};

/// Minimum series length accepted by [`fit`].
pub const MIN_FIT_OBS: usize = 50;

/// α̂+β̂ above this raises the persistence flag.
pub const PERSISTENCE_THRESHOLD: f64 = 0.98;

/// ν̂ above this is reported as near-Gaussian.
pub const NEAR_GAUSSIAN_NU: f64 = 100.0;

/// d̂ within this distance of 0 or 1 is flagged as boundary-suspect.
pub const D_BOUNDARY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct FitConfig {
    pub family: ModelFamily,
    pub innovation: Innovation,
    pub horizon: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Holds d fixed for a FIGARCH fit.
    pub fixed_d: Option<f64>,
}

impl FitConfig {
    pub fn new(family: ModelFamily) -> Self {
        Self {
            family,
            innovation: Innovation::StudentT,
            horizon: DEFAULT_TRUNCATION,
            max_iters: 500,
            tol: 1e-6,
            restarts: 2,
            seed: 0,
            fixed_d: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Domain("tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Domain("truncation horizon must be >= 1".into()));
        }
        if let Some(d) = self.fixed_d {
            if self.family != ModelFamily::Figarch {
                return Err(Error::Domain("a fixed d only applies to FIGARCH".into()));
            }
            if d == 1.0 {
                return Err(Error::Domain("FIGARCH with d = 1 is IGARCH; use the IGARCH family".into()));
            }
            if d == 0.0 {
                return Err(Error::Domain("FIGARCH with d = 0 is GARCH; use the GARCH family".into()));
            }
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Domain(format!("d must lie in [0,1] (got {d})")));
            }
        }
        Ok(())
    }
}

/// Maps between [`ParamVector`] and the optimizer's coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Parameterization {
    pub family: ModelFamily,
    pub student: bool,
    pub fixed_d: Option<f64>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn open_unit(name: &str, v: f64) -> Result<f64> {
    if v <= 0.0 || v >= 1.0 {
        if v == 0.0 || v == 1.0 {
            return Err(Error::Boundary(format!("{name} = {v}")));
        }
        return Err(Error::Infeasible(format!("{name} = {v} outside (0,1)")));
    }
    Ok(logit(v))
}

impl Parameterization {
    pub fn new(family: ModelFamily, innovation: Innovation) -> Self {
        Self { family, student: innovation == Innovation::StudentT, fixed_d: None }
    }

    fn free_d(&self) -> bool {
        self.family == ModelFamily::Figarch && self.fixed_d.is_none()
    }

    /// Names of the free parameters in coordinate order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut v = vec!["omega", "alpha", "beta"];
        if self.free_d() {
            v.push("d");
        }
        if self.student {
            v.push("nu");
        }
        v
    }

    pub fn dim(&self) -> usize {
        self.names().len()
    }

    /// Free parameter values in coordinate order.
    pub fn values(&self, p: &ParamVector) -> Vec<f64> {
        let mut v = vec![p.omega, p.alpha, p.beta];
        if self.free_d() {
            v.push(p.d);
        }
        if self.student {
            v.push(p.nu.unwrap_or(f64::NAN));
        }
        v
    }

    pub fn to_unconstrained(&self, p: &ParamVector) -> Result<Vec<f64>> {
        if !(p.omega > 0.0) {
            return Err(Error::Infeasible(format!("omega = {} must be > 0", p.omega)));
        }
        let mut u = vec![p.omega.ln()];
        match self.family {
            ModelFamily::Garch => {
                if p.alpha == 0.0 || p.beta == 0.0 {
                    return Err(Error::Boundary(format!("alpha = {}, beta = {}", p.alpha, p.beta)));
                }
                if p.alpha < 0.0 || p.beta < 0.0 {
                    return Err(Error::Infeasible("GARCH needs alpha, beta > 0".into()));
                }
                let s = p.alpha + p.beta;
                u.push(open_unit("alpha + beta", s)?);
                u.push(logit(p.alpha / s));
            }
            ModelFamily::Igarch | ModelFamily::Figarch => {
                u.push(p.alpha);
                u.push(open_unit("beta", p.beta)?);
            }
        }
        if self.free_d() {
            u.push(open_unit("d", p.d)?);
        }
        if self.student {
            let nu = p.nu.ok_or_else(|| Error::Domain("Student-t coordinates need nu".into()))?;
            if nu <= 2.0 {
                return Err(Error::Infeasible(format!("nu = {nu} must be > 2")));
            }
            u.push((nu - 2.0).ln());
        }
        Ok(u)
    }

    pub fn from_unconstrained(&self, u: &[f64]) -> ParamVector {
        let omega = u[0].exp();
        let (alpha, beta) = match self.family {
            ModelFamily::Garch => {
                let s = logistic(u[1]);
                let r = logistic(u[2]);
                (s * r, s * (1.0 - r))
            }
            _ => (u[1], logistic(u[2])),
        };
        let mut i = 3;
        let d = match self.family {
            ModelFamily::Garch => 0.0,
            ModelFamily::Igarch => 1.0,
            ModelFamily::Figarch => match self.fixed_d {
                Some(d) => d,
                None => {
                    i += 1;
                    logistic(u[3])
                }
            },
        };
        let nu = self.student.then(|| 2.0 + u[i].exp());
        ParamVector { omega, alpha, beta, d, nu }
    }

    /// Jacobian of the free parameters with respect to the coordinates.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let k = self.dim();
        let mut j = DMatrix::zeros(k, k);
        j[(0, 0)] = u[0].exp();
        match self.family {
            ModelFamily::Garch => {
                let s = logistic(u[1]);
                let r = logistic(u[2]);
                let ds = s * (1.0 - s);
                let dr = r * (1.0 - r);
                j[(1, 1)] = ds * r;
                j[(1, 2)] = s * dr;
                j[(2, 1)] = ds * (1.0 - r);
                j[(2, 2)] = -s * dr;
            }
            _ => {
                let b = logistic(u[2]);
                j[(1, 1)] = 1.0;
                j[(2, 2)] = b * (1.0 - b);
            }
        }
        let mut i = 3;
        if self.free_d() {
            let d = logistic(u[3]);
            j[(3, 3)] = d * (1.0 - d);
            i += 1;
        }
        if self.student {
            j[(i, i)] = u[i].exp();
        }
        j
    }
}

/// Unconstrained coordinates of `params`; boundary values are rejected.
pub fn transform_to_unconstrained(params: &ParamVector, family: ModelFamily) -> Result<Vec<f64>> {
    Parameterization::new(family, params.innovation()).to_unconstrained(params)
}

pub fn transform_from_unconstrained(u: &[f64], family: ModelFamily, innovation: Innovation) -> ParamVector {
    Parameterization::new(family, innovation).from_unconstrained(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Significance {
    #[serde(rename = "1%")]
    OnePercent,
    #[serde(rename = "5%")]
    FivePercent,
    #[serde(rename = "none")]
    None,
}

impl Significance {
    pub fn from_pvalue(p: f64) -> Self {
        if p < 0.01 {
            Significance::OnePercent
        } else if p < 0.05 {
            Significance::FivePercent
        } else {
            Significance::None
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            Significance::OnePercent => "**",
            Significance::FivePercent => "*",
            Significance::None => "",
        }
    }
}

/// Two-sided p-value of the asymptotic normal ratio `estimate / stderr`.
pub fn normal_pvalue(estimate: f64, stderr: f64) -> f64 {
    let z = (estimate / stderr).abs();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamEstimate {
    pub name: &'static str,
    pub value: f64,
    pub stderr: Option<f64>,
    pub pvalue: Option<f64>,
    pub significance: Significance,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FitDiagnostics {
    /// Negative Hessian was positive definite at the optimum.
    pub hessian_pd: bool,
    pub grad_norm: f64,
    pub d_boundary_suspect: bool,
    pub near_gaussian: bool,
    /// Number of starts that produced a feasible optimum.
    pub feasible_starts: usize,
    /// Best objective after each start, in start order.
    pub start_logliks: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub family: ModelFamily,
    pub innovation: Innovation,
    pub params: ParamVector,
    pub estimates: Vec<ParamEstimate>,
    /// Covariance of the free parameters, in `estimates` order.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn estimate(&self, name: &str) -> Option<&ParamEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    fn covariance_of(&self, a: &str, b: &str) -> Option<f64> {
        let ia = self.estimates.iter().position(|e| e.name == a)?;
        let ib = self.estimates.iter().position(|e| e.name == b)?;
        self.covariance.as_ref().map(|c| c[ia][ib])
    }
}

/// Standard errors derived from the curvature of a log-likelihood.
#[derive(Debug, Clone)]
pub struct StdErrors {
    pub stderr: Vec<f64>,
    pub pvalues: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Standard errors from the inverse negative Hessian of `loglik` at `u`,
/// mapped to parameter space with `jacobian` (delta method). `None` when
/// the negative Hessian is not positive definite.
pub fn hessian_standard_errors<F: FnMut(&[f64]) -> f64>(
    loglik: F,
    u: &[f64],
    values: &[f64],
    jacobian: &DMatrix<f64>,
) -> Option<StdErrors> {
    let mut ll = loglik;
    let neg = numerical_hessian(|x| -ll(x), u)?;
    let chol = neg.cholesky()?;
    let cov_u = chol.inverse();
    let cov = jacobian * cov_u * jacobian.transpose();
    let stderr: Vec<f64> = (0..values.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    if stderr.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let pvalues = values.iter().zip(&stderr).map(|(v, s)| normal_pvalue(*v, *s)).collect();
    Some(StdErrors { stderr, pvalues, covariance: cov })
}

struct Problem<'a> {
    lik: &'a Likelihood,
    param: Parameterization,
}

impl Problem<'_> {
    fn params(&self, u: &[f64]) -> ParamVector {
        self.param.from_unconstrained(u)
    }

    fn loglik(&self, u: &[f64]) -> f64 {
        let p = self.params(u);
        if p.check_feasible(self.param.family, self.lik.horizon()).is_err() {
            return f64::NEG_INFINITY;
        }
        self.lik.log_likelihood(&p).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Candidate `(alpha, beta, d)` starts. The first entry of each family is
/// the conventional warm start; the rest cover the region on a coarse grid.
fn start_candidates(family: ModelFamily, fixed_d: Option<f64>) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    match family {
        ModelFamily::Garch => {
            out.push((0.05, 0.90, 0.0));
            for a in [0.02, 0.05, 0.1, 0.2] {
                for b in [0.5, 0.7, 0.85, 0.93] {
                    if a + b < 0.999 {
                        out.push((a, b, 0.0));
                    }
                }
            }
        }
        ModelFamily::Igarch => {
            // alpha = phi - beta; phi = 0 is classical IGARCH
            out.push((0.05 - 0.90, 0.90, 1.0));
            for b in [0.3, 0.6, 0.8, 0.9, 0.95] {
                for phi in [0.0, 0.1, 0.3] {
                    out.push((phi - b, b, 1.0));
                }
            }
        }
        ModelFamily::Figarch => {
            let ds: Vec<f64> = match fixed_d {
                Some(d) => vec![d],
                None => vec![0.2, 0.4, 0.6, 0.8],
            };
            out.push((0.05, 0.90, fixed_d.unwrap_or(0.5)));
            for &d in &ds {
                for b in [0.1, 0.3, 0.5, 0.7] {
                    // first ARCH weight lambda_1 = d + alpha
                    for lambda1 in [0.1, 0.25, 0.4] {
                        out.push((lambda1 - d, b, d));
                    }
                }
            }
        }
    }
    out
}

/// Best-scoring feasible candidate, with omega matched to the sample variance.
fn starting_point(problem: &Problem, config: &FitConfig) -> Option<ParamVector> {
    let var = problem.lik.sample_variance();
    let nu = (config.innovation == Innovation::StudentT).then_some(8.0);
    let mut best: Option<(f64, ParamVector)> = None;
    for (alpha, beta, d) in start_candidates(config.family, config.fixed_d) {
        let mut p = ParamVector { omega: 1.0, alpha, beta, d, nu };
        let Ok(rec) = VarianceRecursion::new(config.family, &p, config.horizon) else {
            continue;
        };
        let Some(level) = rec.stationary_level() else {
            continue;
        };
        p.omega = var / level;
        let Ok(u) = problem.param.to_unconstrained(&p) else {
            continue;
        };
        let ll = problem.loglik(&u);
        if ll.is_finite() && best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, p));
        }
    }
    best.map(|(_, p)| p)
}

fn jitter(p: &ParamVector, family: ModelFamily, rng: &mut ChaCha8Rng) -> ParamVector {
    let mut f = || rng.random_range(0.8..1.2);
    let mut q = *p;
    q.omega *= f();
    q.alpha *= f();
    q.beta = (q.beta * f()).min(0.999);
    if family == ModelFamily::Garch && q.alpha + q.beta >= 0.999 {
        let s = q.alpha + q.beta;
        q.alpha *= 0.998 / s;
        q.beta *= 0.998 / s;
    }
    if family == ModelFamily::Figarch {
        let d = q.d * f();
        q.d = d.clamp(0.01, 0.99);
    }
    if let Some(nu) = q.nu {
        q.nu = Some(2.0 + (nu - 2.0) * f());
    }
    q
}

struct Candidate {
    u: Vec<f64>,
    loglik: f64,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
}

/// Fits `config.family` to `series` by maximum likelihood.
pub fn fit(series: &ReturnSeries, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if series.len() < MIN_FIT_OBS {
        return Err(Error::InsufficientData { needed: MIN_FIT_OBS, got: series.len() });
    }
    let lik = Likelihood::new(config.family, &series.returns, config.horizon)?;
    let scale = series.returns.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    // a spread at rounding level means the series is constant
    if !(lik.sample_variance() > (1e-10 * scale).powi(2)) {
        return Err(Error::DataQuality("returns have zero variance".into()));
    }
    let param = Parameterization { fixed_d: config.fixed_d, ..Parameterization::new(config.family, config.innovation) };
    let problem = Problem { lik: &lik, param };

    let base = starting_point(&problem, config)
        .ok_or_else(|| Error::DataQuality("log-likelihood is not finite at any starting candidate".into()))?;

    let opts = OptimOptions { max_iters: config.max_iters, tol: config.tol, ..OptimOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<Candidate> = None;
    let mut diagnostics = FitDiagnostics::default();
    for start in 0..=config.restarts {
        let p0 = if start == 0 {
            Some(base)
        } else {
            // a handful of draws to land on a feasible jittered start
            (0..20)
                .map(|_| jitter(&base, config.family, &mut rng))
                .find(|p| param.to_unconstrained(p).map(|u| problem.loglik(&u).is_finite()).unwrap_or(false))
        };
        let result = p0
            .and_then(|p| param.to_unconstrained(&p).ok())
            .and_then(|u0| optim::minimize(|u| -problem.loglik(u), &u0, &opts));
        let Some(r) = result.filter(|r| r.value.is_finite()) else {
            diagnostics.start_logliks.push(None);
            continue;
        };
        diagnostics.feasible_starts += 1;
        let cand = Candidate {
            loglik: -r.value,
            grad_norm: r.grad_norm(),
            converged: r.converged,
            iterations: r.iterations,
            u: r.x,
        };
        // strict improvement keeps the lowest start index on ties
        if best.as_ref().is_none_or(|b| cand.loglik > b.loglik) {
            best = Some(cand);
        }
        diagnostics.start_logliks.push(best.as_ref().map(|b| b.loglik));
    }
    let best = best.ok_or_else(|| Error::EstimationFailed("every start was infeasible".into()))?;

    let params = param.from_unconstrained(&best.u);
    let loglik = lik.log_likelihood(&params)?;
    let values = param.values(&params);
    let se = hessian_standard_errors(|u| problem.loglik(u), &best.u, &values, &param.jacobian(&best.u));

    diagnostics.hessian_pd = se.is_some();
    diagnostics.grad_norm = best.grad_norm;
    diagnostics.d_boundary_suspect = config.family == ModelFamily::Figarch
        && config.fixed_d.is_none()
        && (params.d < D_BOUNDARY_TOL || params.d > 1.0 - D_BOUNDARY_TOL);
    diagnostics.near_gaussian = params.nu.is_some_and(|nu| nu > NEAR_GAUSSIAN_NU);

    let estimates = param
        .names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let stderr = se.as_ref().map(|s| s.stderr[i]);
            let pvalue = se.as_ref().map(|s| s.pvalues[i]);
            ParamEstimate {
                name,
                value: values[i],
                stderr,
                pvalue,
                significance: pvalue.map_or(Significance::None, Significance::from_pvalue),
            }
        })
        .collect();
    let covariance = se.map(|s| {
        let c = s.covariance;
        (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect()
    });

    Ok(FitResult {
        family: config.family,
        innovation: config.innovation,
        params,
        estimates,
        covariance,
        loglik,
        converged: best.converged,
        iterations: best.iterations,
        n_obs: series.len(),
        diagnostics,
    })
}

/// Recomputes standard errors for `params` on `series`.
pub fn standard_errors(series: &ReturnSeries, config: &FitConfig, params: &ParamVector) -> Result<Option<StdErrors>> {
    let lik = Likelihood::new(config.family, &series.returns, config.horizon)?;
    let param = Parameterization { fixed_d: config.fixed_d, ..Parameterization::new(config.family, config.innovation) };
    let u = param.to_unconstrained(params)?;
    let problem = Problem { lik: &lik, param };
    Ok(hessian_standard_errors(|x| problem.loglik(x), &u, &param.values(params), &param.jacobian(&u)))
}

/// Gradient norm of the log-likelihood in unconstrained coordinates.
pub fn unconstrained_gradient_norm(series: &ReturnSeries, config: &FitConfig, params: &ParamVector) -> Result<f64> {
    let lik = Likelihood::new(config.family, &series.returns, config.horizon)?;
    let param = Parameterization { fixed_d: config.fixed_d, ..Parameterization::new(config.family, config.innovation) };
    let u = param.to_unconstrained(params)?;
    let problem = Problem { lik: &lik, param };
    let g = optim::numerical_gradient(|x| -problem.loglik(x), &u);
    Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct PersistenceCheck {
    pub sum: f64,
    pub stderr: Option<f64>,
    /// α̂+β̂ exceeds [`PERSISTENCE_THRESHOLD`]; the IGARCH and FIGARCH fits are the next step.
    pub flagged: bool,
}

/// Persistence of a GARCH fit: `alpha + beta`, with a delta-method standard
/// error when the covariance is available.
pub fn persistence_check(fit: &FitResult) -> PersistenceCheck {
    let var = match (
        fit.covariance_of("alpha", "alpha"),
        fit.covariance_of("beta", "beta"),
        fit.covariance_of("alpha", "beta"),
    ) {
        (Some(a), Some(b), Some(ab)) => Some(a + b + 2.0 * ab),
        _ => None,
    };
    persistence_from(fit.params.alpha, fit.params.beta, var)
}

/// The flag needs the sum to exceed the threshold by more than rounding
/// noise, so `0.05 + 0.93` sits on the boundary and is not flagged.
pub fn persistence_from(alpha: f64, beta: f64, sum_variance: Option<f64>) -> PersistenceCheck {
    let sum = alpha + beta;
    PersistenceCheck {
        sum,
        stderr: sum_variance.map(|v| v.max(0.0).sqrt()),
        flagged: sum - PERSISTENCE_THRESHOLD > 1e-12,
    }
}
