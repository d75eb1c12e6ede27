//! Seeded simulation of GARCH-family paths and squared-return autocorrelations.

use chrono::{Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::ReturnSeries;
use crate::volmodel::{
    innovation_log_density, ModelFamily, ParamVector, VariancePath, VarianceRecursion, DEFAULT_TRUNCATION,
};

pub const DEFAULT_BURN_IN: usize = 2000;

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub family: ModelFamily,
    pub params: ParamVector,
    pub n: usize,
    pub burn_in: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(family: ModelFamily, params: ParamVector, n: usize, seed: u64) -> Self {
        Self { family, params, n, burn_in: DEFAULT_BURN_IN, horizon: DEFAULT_TRUNCATION, seed }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub series: ReturnSeries,
    pub variance: VariancePath,
}

enum Innovations {
    Normal,
    Student { dist: StudentT<f64>, scale: f64 },
}

impl Innovations {
    fn new(nu: Option<f64>) -> Result<Self> {
        Ok(match nu {
            None => Innovations::Normal,
            Some(nu) => Innovations::Student {
                dist: StudentT::new(nu).map_err(|e| Error::Domain(e.to_string()))?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Innovations::Normal => StandardNormal.sample(rng),
            Innovations::Student { dist, scale } => dist.sample(rng) * scale,
        }
    }
}

/// First date stamped on simulated series.
pub fn simulation_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// Draws a path `e[t] = z[t] * sigma[t]` with the shared variance recursion.
/// The first `burn_in` draws are discarded.
pub fn simulate_path(config: &SimConfig) -> Result<SimulatedPath> {
    if config.n == 0 {
        return Err(Error::Domain("path length must be >= 1".into()));
    }
    let p = &config.params;
    p.check_feasible(config.family, config.horizon).map_err(|e| Error::Domain(e.to_string()))?;
    let rec = VarianceRecursion::new(config.family, p, config.horizon)?;
    let level = rec.stationary_level().unwrap_or(p.omega / (1.0 - p.beta));
    let innovations = Innovations::new(p.nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let total = config.burn_in + config.n;
    let mut history = vec![level; rec.lags()];
    history.reserve(total);
    let mut returns = Vec::with_capacity(config.n);
    let mut sigma2 = Vec::with_capacity(config.n);
    let mut loglik = 0.0;
    let mut prev = level;
    for t in 0..total {
        let s2 = rec.next(prev, &history);
        if !(s2.is_finite() && s2 > 0.0) {
            return Err(Error::Infeasible(format!("simulated sigma2 = {s2:e} at step {t}")));
        }
        let z = innovations.draw(&mut rng);
        let e = z * s2.sqrt();
        history.push(e * e);
        prev = s2;
        if t >= config.burn_in {
            returns.push(e);
            sigma2.push(s2);
            loglik += innovation_log_density(z, p.nu) - 0.5 * s2.ln();
        }
    }
    let epoch = simulation_epoch();
    let dates = (0..config.n as u64).map(|i| epoch + Days::new(i)).collect();
    let id = format!("sim-{}-seed{}", config.family.name().to_ascii_lowercase(), config.seed);
    let series = ReturnSeries::new(id, dates, returns, "simulate")?;
    Ok(SimulatedPath { series, variance: VariancePath { sigma2, loglik } })
}

/// Sample autocorrelations of `x` at lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::InsufficientData { needed: max_lag + 1, got: x.len() });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = c.iter().map(|v| v * v).sum();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::UndefinedAutocorrelation);
    }
    Ok((0..=max_lag).map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / denom).collect())
}

/// Autocorrelations of squared returns at lags `1..=max_lag`.
pub fn squared_autocorr(returns: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 {
        return Err(Error::Domain("max_lag must be >= 1".into()));
    }
    let sq: Vec<f64> = returns.iter().map(|r| r * r).collect();
    let mut acf = autocorrelation(&sq, max_lag)?;
    acf.remove(0);
    Ok(acf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_var(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn iid_unit_variance() {
        let cfg = SimConfig::new(ModelFamily::Garch, ParamVector::garch(1.0, 0.0, 0.0), 100_000, 11);
        let s = simulate_path(&cfg).unwrap();
        let v = sample_var(&s.series.returns);
        assert!((0.97..=1.03).contains(&v), "{v}");
        assert!(s.variance.sigma2.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg =
            SimConfig::new(ModelFamily::Figarch, ParamVector::figarch(1e-6, -0.3, 0.4, 0.6).with_nu(6.0), 3000, 5);
        let a = simulate_path(&cfg).unwrap();
        let b = simulate_path(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.variance, b.variance);
        let c = simulate_path(&SimConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.series.returns, c.series.returns);
    }

    #[test]
    fn garch_unconditional_variance() {
        let cfg = SimConfig::new(ModelFamily::Garch, ParamVector::garch(1e-6, 0.08, 0.91), 100_000, 3);
        let v = sample_var(&simulate_path(&cfg).unwrap().series.returns);
        assert!((v / 1e-4 - 1.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn infeasible_rejected_before_drawing() {
        let cfg = SimConfig::new(ModelFamily::Figarch, ParamVector::figarch(1e-6, 0.1, 0.5, 1.2), 10, 1);
        let err = simulate_path(&cfg).unwrap_err();
        assert!(err.to_string().contains("d must lie in [0,1]"), "{err}");
        let cfg = SimConfig::new(ModelFamily::Garch, ParamVector::garch(1e-6, 0.5, 0.6), 10, 1);
        assert!(matches!(simulate_path(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn white_noise_has_flat_squared_acf() {
        let cfg = SimConfig::new(ModelFamily::Garch, ParamVector::garch(1.0, 0.0, 0.0), 100_000, 21);
        let acf = squared_autocorr(&simulate_path(&cfg).unwrap().series.returns, 20).unwrap();
        assert_eq!(acf.len(), 20);
        assert!(acf.iter().all(|a| a.abs() <= 0.02), "{acf:?}");
    }

    #[test]
    fn lag_zero_is_one_and_constant_is_undefined() {
        let acf = autocorrelation(&[1.0, 3.0, 2.0, 5.0], 2).unwrap();
        assert!((acf[0] - 1.0).abs() < 1e-15);
        assert!(acf.iter().all(|a| (-1.0..=1.0).contains(a)));
        assert!(matches!(squared_autocorr(&[0.5; 10], 3), Err(Error::UndefinedAutocorrelation)));
        assert!(squared_autocorr(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn standardized_residuals_reproduce_gaussian_kurtosis() {
        let cfg = SimConfig::new(ModelFamily::Garch, ParamVector::garch(1e-6, 0.08, 0.91), 1_000_000, 2);
        let s = simulate_path(&cfg).unwrap();
        let z: Vec<f64> = s.series.returns.iter().zip(&s.variance.sigma2).map(|(e, v)| e / v.sqrt()).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let m2 = z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64;
        let m4 = z.iter().map(|v| (v - m).powi(4)).sum::<f64>() / z.len() as f64;
        let k = m4 / (m2 * m2);
        assert!((2.9..=3.1).contains(&k), "{k}");
    }
}
