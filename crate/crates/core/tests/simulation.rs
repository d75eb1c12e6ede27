use volentropy::simulate::{simulate_path, squared_autocorr, SimConfig};
use volentropy::volmodel::innovation_log_density;
use volentropy::{ModelFamily, ParamVector};

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn student_density_integrates_to_one() {
    let density = |z: f64| innovation_log_density(z, Some(5.0)).exp();
    let mass = adaptive_simpson(&density, -50.0, 50.0, 1e-12);
    assert!((mass - 1.0).abs() <= 1e-6, "{mass}");
}

fn geometric_fit(acf: &[f64]) -> (f64, f64) {
    // least squares of ln acf on lag
    let pts: Vec<(f64, f64)> = acf.iter().enumerate().map(|(i, v)| ((i + 1) as f64, v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    ((my - slope * mx).exp(), slope.exp())
}

#[test]
fn fractional_paths_outlast_geometric_envelope() {
    let params = ParamVector::figarch(1e-6, 0.2, 0.5, 0.6);
    let seeds = 4;
    let mut mean_acf = vec![0.0; 100];
    for seed in 0..seeds {
        let path = simulate_path(&SimConfig::new(ModelFamily::Figarch, params, 100_000, seed)).unwrap();
        let acf = squared_autocorr(&path.series.returns, 100).unwrap();
        for (m, v) in mean_acf.iter_mut().zip(acf) {
            *m += v / seeds as f64;
        }
    }
    let (a, r) = geometric_fit(&mean_acf[..5]);
    for lag in 50..=100 {
        let envelope = a * r.powi(lag as i32);
        assert!(mean_acf[lag - 1] > envelope, "lag {lag}: {} <= {envelope}", mean_acf[lag - 1]);
    }
}

#[test]
fn long_memory_outlasts_short_memory_at_lag_100() {
    let fractional = ParamVector::figarch(1e-6, -0.3, 0.4, 0.6);
    let short = ParamVector::garch(1e-6, 0.1, 0.8);
    let f = simulate_path(&SimConfig::new(ModelFamily::Figarch, fractional, 100_000, 1)).unwrap();
    let g = simulate_path(&SimConfig::new(ModelFamily::Garch, short, 100_000, 2)).unwrap();
    let af = squared_autocorr(&f.series.returns, 100).unwrap();
    let ag = squared_autocorr(&g.series.returns, 100).unwrap();
    assert!(af[99] > ag[99], "{} vs {}", af[99], ag[99]);
}

#[test]
fn simulated_csv_reloads_as_returns() {
    let path =
        simulate_path(&SimConfig::new(ModelFamily::Garch, ParamVector::garch(1e-6, 0.08, 0.91), 500, 9)).unwrap();
    let mut buf = Vec::new();
    path.series.write_csv(&mut buf).unwrap();
    let back = volentropy::series::read_returns(
        buf.as_slice(),
        &volentropy::ColumnMapping::new("date", "return"),
        &path.series.id,
        "memory",
    )
    .unwrap();
    assert_eq!(back.dates, path.series.dates);
    assert_eq!(back.returns, path.series.returns);
}
