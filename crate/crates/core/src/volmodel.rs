//! GARCH(1,1), IGARCH(1,1) and FIGARCH(1,d,1) conditional variances and
//! likelihoods.
//!
//! All three families share one recursion,
//!
//! ```text
//! sigma2[t] = omega + beta * sigma2[t-1] + sum_{j=1..k} delta[j] * e2[t-j]
//! delta(L)  = 1 - beta*L - (1 - (alpha+beta)*L) * (1-L)^d
//! ```
//!
//! which is the FIGARCH variance equation multiplied through by `(1 - beta*L)`.
//! Dividing by `(1 - beta*L)` instead gives the ARCH(inf) weights `lambda`,
//! used for the nonnegativity check. With `d = 0` the polynomial collapses to
//! `alpha*L` (GARCH), with `d = 1` to `(1+alpha)L - (alpha+beta)L^2`
//! (IGARCH). Trailing zero coefficients are dropped, so the nested cases
//! run in O(n).
//!
//! Pre-sample squared innovations and `sigma2[-1]` are set to the sample
//! mean of the squared demeaned returns.

use libm::lgamma as ln_gamma;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default number of lags retained for the fractional polynomial.
pub const DEFAULT_TRUNCATION: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ModelFamily {
    #[serde(rename = "GARCH")]
    Garch,
    #[serde(rename = "IGARCH")]
    Igarch,
    #[serde(rename = "FIGARCH")]
    Figarch,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Garch, ModelFamily::Igarch, ModelFamily::Figarch];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Garch => "GARCH",
            ModelFamily::Igarch => "IGARCH",
            ModelFamily::Figarch => "FIGARCH",
        }
    }

    /// The fractional difference parameter is pinned for GARCH and IGARCH.
    pub fn pinned_d(self) -> Option<f64> {
        match self {
            ModelFamily::Garch => Some(0.0),
            ModelFamily::Igarch => Some(1.0),
            ModelFamily::Figarch => None,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "garch" => Ok(ModelFamily::Garch),
            "igarch" => Ok(ModelFamily::Igarch),
            "figarch" => Ok(ModelFamily::Figarch),
            other => Err(Error::Domain(format!("unknown model family '{other}' (expected garch, igarch or figarch)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Innovation {
    Gaussian,
    StudentT,
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Innovation::Gaussian),
            "student" | "student-t" | "t" => Ok(Innovation::StudentT),
            other => Err(Error::Domain(format!("unknown innovation law '{other}' (expected gaussian or student)"))),
        }
    }
}

/// Model parameters. `nu` is `None` for Gaussian innovations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamVector {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub nu: Option<f64>,
}

impl ParamVector {
    pub fn garch(omega: f64, alpha: f64, beta: f64) -> Self {
        Self { omega, alpha, beta, d: 0.0, nu: None }
    }

    pub fn igarch(omega: f64, alpha: f64, beta: f64) -> Self {
        Self { omega, alpha, beta, d: 1.0, nu: None }
    }

    pub fn figarch(omega: f64, alpha: f64, beta: f64, d: f64) -> Self {
        Self { omega, alpha, beta, d, nu: None }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn innovation(&self) -> Innovation {
        match self.nu {
            Some(_) => Innovation::StudentT,
            None => Innovation::Gaussian,
        }
    }

    /// Box constraints of each family. ARCH-weight nonnegativity for the
    /// fractional families is a separate check, see [`ParamVector::check_feasible`].
    pub fn validate(&self, family: ModelFamily) -> Result<()> {
        let bad = |msg: String| Err(Error::Infeasible(msg));
        let ParamVector { omega, alpha, beta, d, nu } = *self;
        if ![omega, alpha, beta, d].iter().all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if omega <= 0.0 {
            return bad(format!("omega must be > 0 (got {omega})"));
        }
        if let Some(nu) = nu {
            if !(nu.is_finite() && nu > 2.0) {
                return bad(format!("nu must be > 2 (got {nu})"));
            }
        }
        match family {
            ModelFamily::Garch => {
                if d != 0.0 {
                    return bad(format!("GARCH has d = 0 (got {d})"));
                }
                if alpha < 0.0 || beta < 0.0 {
                    return bad(format!("GARCH needs alpha >= 0 and beta >= 0 (got {alpha}, {beta})"));
                }
                if alpha + beta >= 1.0 {
                    return bad(format!("GARCH needs alpha + beta < 1 (got {})", alpha + beta));
                }
            }
            ModelFamily::Igarch | ModelFamily::Figarch => {
                if family == ModelFamily::Igarch && d != 1.0 {
                    return bad(format!("IGARCH has d = 1 (got {d})"));
                }
                if !(0.0..=1.0).contains(&d) {
                    return bad(format!("d must lie in [0,1] (got {d})"));
                }
                if !(0.0..1.0).contains(&beta) {
                    return bad(format!("beta must lie in [0,1) (got {beta})"));
                }
            }
        }
        Ok(())
    }

    /// Full feasibility: box constraints plus, for IGARCH and FIGARCH,
    /// nonnegative ARCH(inf) weights up to the truncation horizon.
    pub fn check_feasible(&self, family: ModelFamily, horizon: usize) -> Result<()> {
        self.validate(family)?;
        if family == ModelFamily::Garch {
            return Ok(());
        }
        let w = frac_weights(self.d, horizon)?.arch_weights(self.alpha, self.beta);
        if let Some((j, l)) = w.lambda.iter().enumerate().find(|(_, l)| **l < 0.0) {
            return Err(Error::Infeasible(format!("ARCH weight lambda[{}] = {l:.3e} is negative", j + 1)));
        }
        Ok(())
    }
}

/// Coefficients of `(1-L)^d` up to lag `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracWeights {
    pub d: f64,
    pub pi: Vec<f64>,
}

/// Lag polynomials derived from [`FracWeights`] at given `(alpha, beta)`.
/// `delta[j-1]` and `lambda[j-1]` hold the lag-`j` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchWeights {
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn frac_weights(d: f64, horizon: usize) -> Result<FracWeights> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Domain(format!("d must lie in [0,1] (got {d})")));
    }
    if horizon == 0 {
        return Err(Error::Domain("truncation horizon must be >= 1".into()));
    }
    let mut pi = Vec::with_capacity(horizon + 1);
    pi.push(1.0);
    for j in 1..=horizon {
        let jf = j as f64;
        pi.push(pi[j - 1] * (jf - 1.0 - d) / jf);
    }
    Ok(FracWeights { d, pi })
}

impl FracWeights {
    pub fn horizon(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn arch_weights(&self, alpha: f64, beta: f64) -> ArchWeights {
        let phi = alpha + beta;
        let pi = &self.pi;
        let mut delta = Vec::with_capacity(self.horizon());
        delta.push(phi - beta - pi[1]);
        for j in 2..pi.len() {
            delta.push(-(pi[j] - phi * pi[j - 1]));
        }
        let mut lambda = Vec::with_capacity(delta.len());
        let mut prev = 0.0;
        for &dj in &delta {
            prev = dj + beta * prev;
            lambda.push(prev);
        }
        ArchWeights { delta, lambda }
    }
}

/// Conditional variances and total log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePath {
    pub sigma2: Vec<f64>,
    pub loglik: f64,
}

/// Dot product with independent partial sums, so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// The shared variance recursion for one parameter vector.
#[derive(Debug, Clone)]
pub struct VarianceRecursion {
    omega: f64,
    beta: f64,
    /// Lag polynomial in reverse order: the last entry multiplies lag 1.
    delta_rev: Vec<f64>,
}

impl VarianceRecursion {
    pub fn new(family: ModelFamily, params: &ParamVector, horizon: usize) -> Result<Self> {
        params.validate(family)?;
        let mut delta = match family {
            ModelFamily::Garch => vec![params.alpha],
            ModelFamily::Igarch | ModelFamily::Figarch => {
                frac_weights(params.d, horizon)?.arch_weights(params.alpha, params.beta).delta
            }
        };
        while delta.len() > 1 && *delta.last().unwrap() == 0.0 {
            delta.pop();
        }
        delta.reverse();
        Ok(Self { omega: params.omega, beta: params.beta, delta_rev: delta })
    }

    /// Number of lagged squared innovations the recursion reads.
    pub fn lags(&self) -> usize {
        self.delta_rev.len()
    }

    /// Long-run level `omega / (1 - beta - sum(delta))` of the truncated
    /// recursion, if finite and positive.
    pub fn stationary_level(&self) -> Option<f64> {
        let denom = 1.0 - self.beta - self.delta_rev.iter().sum::<f64>();
        let level = self.omega / denom;
        (denom > 0.0 && level.is_finite()).then_some(level)
    }

    /// Next variance given the previous one and a squared-innovation
    /// history whose last element is lag 1. `history` must hold at least
    /// `lags()` values.
    #[inline]
    pub fn next(&self, prev_sigma2: f64, history: &[f64]) -> f64 {
        let window = &history[history.len() - self.lags()..];
        self.omega + self.beta * prev_sigma2 + dot(&self.delta_rev, window)
    }

    /// Runs the recursion over the prepared squared innovations.
    fn filter(&self, data: &PreparedReturns) -> Vec<f64> {
        let k = self.lags();
        let n = data.len();
        let mut out = Vec::with_capacity(n);
        let mut prev = data.presample;
        if k > data.pad {
            let mut buf = vec![data.presample; k];
            buf.extend_from_slice(data.e2());
            for t in 0..n {
                prev = self.next(prev, &buf[..k + t]);
                out.push(prev);
            }
        } else {
            for t in 0..n {
                prev = self.next(prev, &data.padded[..data.pad + t]);
                out.push(prev);
            }
        }
        out
    }
}

/// Demeaned squared returns behind a block of pre-sample values.
pub struct PreparedReturns {
    padded: Vec<f64>,
    pad: usize,
    pub presample: f64,
}

impl PreparedReturns {
    /// Demeans `returns`; recursions with up to `max_lags` lags run without copying.
    pub fn new(returns: &[f64], max_lags: usize) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Empty);
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::DataQuality("non-finite return".into()));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let e2: Vec<f64> = returns.iter().map(|r| (r - mean) * (r - mean)).collect();
        let presample = e2.iter().sum::<f64>() / n;
        let pad = max_lags.max(2);
        let mut padded = vec![presample; pad];
        padded.extend(e2);
        Ok(Self { padded, pad, presample })
    }

    pub fn e2(&self) -> &[f64] {
        &self.padded[self.pad..]
    }

    pub fn len(&self) -> usize {
        self.padded.len() - self.pad
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Compensated summation.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Log-density of the innovation law at `z` (unit variance).
pub fn innovation_log_density(z: f64, nu: Option<f64>) -> f64 {
    match nu {
        None => -0.5 * (2.0 * PI).ln() - 0.5 * z * z,
        Some(nu) => student_t_constant(nu) - 0.5 * (nu + 1.0) * (z * z / (nu - 2.0)).ln_1p(),
    }
}

fn student_t_constant(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * (nu - 2.0)).ln()
}

/// Likelihood evaluator bound to one return series.
pub struct Likelihood {
    family: ModelFamily,
    horizon: usize,
    data: PreparedReturns,
}

impl Likelihood {
    pub fn new(family: ModelFamily, returns: &[f64], horizon: usize) -> Result<Self> {
        Ok(Self { family, horizon, data: PreparedReturns::new(returns, horizon)? })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_obs(&self) -> usize {
        self.data.len()
    }

    pub fn sample_variance(&self) -> f64 {
        self.data.presample
    }

    pub fn variance_path(&self, params: &ParamVector) -> Result<VariancePath> {
        let rec = VarianceRecursion::new(self.family, params, self.horizon)?;
        let sigma2 = rec.filter(&self.data);
        if let Some((t, s)) = sigma2.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Infeasible(format!("sigma2[{t}] = {s:e} is not positive")));
        }
        let loglik = match params.nu {
            None => {
                let c = -0.5 * (2.0 * PI).ln();
                neumaier_sum(sigma2.iter().zip(self.data.e2()).map(|(s, e2)| c - 0.5 * s.ln() - 0.5 * e2 / s))
            }
            Some(nu) => {
                let c = student_t_constant(nu);
                let k = 0.5 * (nu + 1.0);
                let scale = 1.0 / (nu - 2.0);
                neumaier_sum(
                    sigma2.iter().zip(self.data.e2()).map(|(s, e2)| c - 0.5 * s.ln() - k * (e2 * scale / s).ln_1p()),
                )
            }
        };
        if !loglik.is_finite() {
            return Err(Error::Infeasible("non-finite log-likelihood".into()));
        }
        Ok(VariancePath { sigma2, loglik })
    }

    pub fn log_likelihood(&self, params: &ParamVector) -> Result<f64> {
        self.variance_path(params).map(|p| p.loglik)
    }
}

/// Conditional variance path of `returns` (demeaned internally).
pub fn variance_path(
    family: ModelFamily,
    params: &ParamVector,
    returns: &[f64],
    horizon: usize,
) -> Result<VariancePath> {
    Likelihood::new(family, returns, horizon)?.variance_path(params)
}

pub fn log_likelihood(family: ModelFamily, params: &ParamVector, returns: &[f64], horizon: usize) -> Result<f64> {
    variance_path(family, params, returns, horizon).map(|p| p.loglik)
}
