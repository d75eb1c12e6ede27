use volentropy::estimate::{persistence_check, standard_errors, unconstrained_gradient_norm};
use volentropy::simulate::{simulate_path, SimConfig};
use volentropy::volmodel::log_likelihood;
use volentropy::{fit, FitConfig, Innovation, ModelFamily, ParamVector, ReturnSeries};

fn garch_path(n: usize, seed: u64) -> ReturnSeries {
    let truth = ParamVector::garch(1e-6, 0.08, 0.91).with_nu(8.0);
    simulate_path(&SimConfig::new(ModelFamily::Garch, truth, n, seed)).unwrap().series
}

#[test]
fn garch_recovers_simulated_parameters() {
    let series = garch_path(50_000, 7);
    let f = fit(&series, &FitConfig::new(ModelFamily::Garch)).unwrap();
    assert!(f.converged);
    assert!((f.params.alpha - 0.08).abs() <= 0.02, "{:?}", f.params);
    assert!((f.params.beta - 0.91).abs() <= 0.02, "{:?}", f.params);
    assert!((6.0..=11.0).contains(&f.params.nu.unwrap()));

    // the returned log-likelihood is the one at the returned parameters
    let again = log_likelihood(ModelFamily::Garch, &f.params, &series.returns, 1000).unwrap();
    assert!((again - f.loglik).abs() <= 1e-8 * f.loglik.abs().max(1.0));

    let check = persistence_check(&f);
    assert!(check.flagged && (0.97..1.0).contains(&check.sum), "{check:?}");
    assert!(check.stderr.unwrap() > 0.0);

    for e in &f.estimates {
        assert!(e.stderr.unwrap() > 0.0);
        assert!((0.0..=1.0).contains(&e.pvalue.unwrap()));
    }
    let se = standard_errors(&series, &FitConfig::new(ModelFamily::Garch), &f.params).unwrap().unwrap();
    assert!((se.stderr[1] - f.estimate("alpha").unwrap().stderr.unwrap()).abs() < 1e-12);
}

#[test]
fn figarch_recovers_fractional_parameter() {
    let truth = ParamVector::figarch(1e-6, -0.3, 0.4, 0.6).with_nu(8.0);
    let series = simulate_path(&SimConfig::new(ModelFamily::Figarch, truth, 50_000, 3)).unwrap().series;
    let mut config = FitConfig::new(ModelFamily::Figarch);
    config.restarts = 0;
    let f = fit(&series, &config).unwrap();
    assert!((0.5..=0.7).contains(&f.params.d), "{:?}", f.params);
    assert!(!f.diagnostics.d_boundary_suspect);
    f.params.check_feasible(ModelFamily::Figarch, 1000).unwrap();
    if f.converged {
        assert!(unconstrained_gradient_norm(&series, &config, &f.params).unwrap() < 1e-3);
    }
}

#[test]
fn fit_beats_small_grid_search() {
    let series = garch_path(200, 11);
    let r = &series.returns;
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64;
    let mut best_grid = f64::NEG_INFINITY;
    for alpha in [0.05, 0.1, 0.2] {
        for beta in [0.5, 0.7, 0.85] {
            if alpha + beta >= 1.0 {
                continue;
            }
            for scale in [0.5, 1.0, 2.0] {
                let p = ParamVector::garch(scale * var * (1.0 - alpha - beta), alpha, beta);
                let ll = log_likelihood(ModelFamily::Garch, &p, r, 1000).unwrap();
                best_grid = best_grid.max(ll);
            }
        }
    }
    let mut config = FitConfig::new(ModelFamily::Garch);
    config.innovation = Innovation::Gaussian;
    let f = fit(&series, &config).unwrap();
    assert!(f.loglik >= best_grid, "{} < {best_grid}", f.loglik);
}

#[test]
fn converged_fits_are_stationary_points_in_every_family() {
    let series = garch_path(2_000, 5);
    for family in ModelFamily::ALL {
        for innovation in [Innovation::Gaussian, Innovation::StudentT] {
            let mut config = FitConfig::new(family);
            config.innovation = innovation;
            config.restarts = 1;
            let f = fit(&series, &config).unwrap();
            f.params.check_feasible(family, config.horizon).unwrap();
            assert_eq!(f.params.innovation(), innovation);
            // best objective never decreases across starts
            let lls: Vec<f64> = f.diagnostics.start_logliks.iter().flatten().copied().collect();
            assert!(lls.windows(2).all(|w| w[1] >= w[0]));
            if f.converged {
                let g = unconstrained_gradient_norm(&series, &config, &f.params).unwrap();
                assert!(g < 1e-3, "{family} {innovation:?}: {g}");
            }
        }
    }
}

#[test]
fn true_parameters_are_a_strict_local_maximum() {
    let garch = ParamVector::garch(1e-6, 0.08, 0.91).with_nu(8.0);
    let figarch = ParamVector::figarch(1e-6, 0.2, 0.5, 0.6).with_nu(8.0);
    for (family, truth) in [(ModelFamily::Garch, garch), (ModelFamily::Figarch, figarch)] {
        let series = simulate_path(&SimConfig::new(family, truth, 50_000, 17)).unwrap().series;
        let ll = |p: &ParamVector| log_likelihood(family, p, &series.returns, 1000).unwrap_or(f64::NEG_INFINITY);
        let base = ll(&truth);
        for factor in [0.8, 1.2] {
            let mut probes = vec![
                ParamVector { omega: truth.omega * factor, ..truth },
                ParamVector { alpha: truth.alpha * factor, ..truth },
                ParamVector { beta: truth.beta * factor, ..truth },
                ParamVector { nu: truth.nu.map(|v| v * factor), ..truth },
            ];
            if family == ModelFamily::Figarch {
                probes.push(ParamVector { d: truth.d * factor, ..truth });
            }
            for p in probes {
                assert!(ll(&p) < base, "{family} {p:?}");
            }
        }
    }
}

#[test]
fn standard_errors_cover_true_alpha() {
    let reps = 50;
    let mut covered = 0;
    let mut config = FitConfig::new(ModelFamily::Garch);
    config.restarts = 0;
    for seed in 0..reps {
        let f = fit(&garch_path(50_000, 1000 + seed), &config).unwrap();
        let a = f.estimate("alpha").unwrap();
        if let Some(se) = a.stderr {
            if (a.value - 0.08).abs() <= 3.0 * se {
                covered += 1;
            }
        }
    }
    assert!(covered * 10 >= reps * 8, "{covered}/{reps}");
}

#[test]
fn short_and_flat_series_are_rejected() {
    let short = garch_path(49, 1);
    assert!(fit(&short, &FitConfig::new(ModelFamily::Garch)).is_err());
    let dates = garch_path(60, 1).dates;
    let flat = ReturnSeries::new("flat", dates, vec![0.001; 60], "test").unwrap();
    assert!(fit(&flat, &FitConfig::new(ModelFamily::Garch)).is_err());
}
