use ks_radial::functionals::{
    dissipation_d, energy_identity_residual, energy_sample, fit_blowup_ode, lower_bound_check,
    lp_gronwall_check, lp_norm, lyapunov_f, pointwise_bound_check, theta, EnergySample,
};
use ks_radial::grid::RadialGrid;
use ks_radial::nonlinearity::NonlinearitySpec;
use ks_radial::solver::State;
use ks_radial::Error;

fn sample(t: f64, f: f64, d: f64) -> EnergySample {
    EnergySample {
        t,
        f,
        d,
        f_norm2: d,
        g_norm2: 0.0,
        mass_u: 1.0,
        mass_v: 1.0,
        sup_u: 1.0,
        sup_v: 1.0,
        grad_v_norm2: 0.0,
        lp_norm: None,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn theta_examples_and_domain() {
    assert!((theta(3, 2.0).unwrap() - 20.0 / 23.0).abs() < 1e-15);
    assert!((theta(4, 3.0).unwrap() - 1.0 / (1.0 + 4.0 / 36.0)).abs() < 1e-15);
    assert!(matches!(theta(2, 1.0), Err(Error::Hypothesis(_))));
    let err = theta(3, 0.5).unwrap_err().to_string();
    assert!(err.contains("kappa must exceed n-2"), "{err}");
}

#[test]
fn constant_state_energy_and_dissipation() {
    // semilinear, s0 = 1: G(s) = s ln s − s + 1; with u, v constant ∇v = 0 and f = u − v
    let grid = RadialGrid::new(3, 1.0, 40).unwrap();
    let spec = NonlinearitySpec::semilinear();
    let (u, v) = (2.0, 1.0);
    let state = State::new(0.0, grid.constant(u), grid.constant(v));
    let vol = 4.0 * std::f64::consts::PI / 3.0;
    let g = u * u.ln() - u + 1.0;
    let f = lyapunov_f(&state, &spec, &grid).unwrap();
    assert!(close(f, vol * (0.5 * v * v - u * v + g), 1e-12), "{f}");
    let d = dissipation_d(&state, None, &spec, &grid).unwrap();
    assert!(close(d.f_norm2, vol * (u - v) * (u - v), 1e-12));
    assert_eq!(d.g_norm2, 0.0);
    assert_eq!(d.d, d.f_norm2 + d.g_norm2);

    let s = energy_sample(&state, None, &spec, &grid, Some(4.0)).unwrap();
    assert!(close(s.mass_u, vol * u, 1e-13));
    assert!(close(s.lp_norm.unwrap(), u * vol.powf(0.25), 1e-13));
    assert_eq!(s.sup_v, v);
}

#[test]
fn lp_norm_of_a_power_matches_the_radial_integral() {
    // ∫_B r^{2a} = 4π / (2a + 3)
    let grid = RadialGrid::new(3, 1.0, 2000).unwrap();
    let a = 0.5;
    let values: Vec<f64> = grid.centers().iter().map(|r| r.powf(a)).collect();
    let exact = (4.0 * std::f64::consts::PI / (2.0 * a + 3.0)).sqrt();
    assert!(close(lp_norm(&values, 2.0, &grid), exact, 1e-5));
}

#[test]
fn identity_residual_vanishes_on_an_exact_pair() {
    // F = −t², D = 2t: ΔF/Δt = −(t_k + t_{k+1}) equals the midpoint D exactly
    let series: Vec<EnergySample> = (0..50)
        .map(|k| {
            let t = 0.01 * k as f64;
            sample(t, -t * t, 2.0 * t)
        })
        .collect();
    let r = energy_identity_residual(&series).unwrap();
    assert!(r.max < 1e-12, "{}", r.max);
    assert!(energy_identity_residual(&series[..2]).is_err());
}

#[test]
fn identity_residual_flags_a_mismatch() {
    let series: Vec<EnergySample> = (0..10)
        .map(|k| sample(k as f64, -(k as f64), 0.0))
        .collect();
    let r = energy_identity_residual(&series).unwrap();
    assert!(close(r.max, 1.0, 1e-12));
    assert_eq!(r.per_interval.len(), 9);
}

#[test]
fn ode_fit_recovers_the_comparison_solution() {
    // y = y0 (1 − t/T)^{−k} with k = θ/(1−θ) solves y' = (k/T) y0^{−1/k} y^{1/θ}
    let th = theta(3, 1.5).unwrap();
    let k = th / (1.0 - th);
    let (y0, t_star) = (2.0, 1e-3);
    let series: Vec<EnergySample> = (0..300)
        .map(|i| {
            let t = t_star * 0.9 * i as f64 / 299.0;
            sample(t, -y0 * (1.0 - t / t_star).powf(-k), 1.0)
        })
        .collect();
    let fit = fit_blowup_ode(&series, th, 0.3).unwrap();
    assert!(fit.consistent);
    assert_eq!(fit.tail_len, 90);
    assert!(
        close(fit.t_star_extrapolated, t_star, 1e-6),
        "{}",
        fit.t_star_extrapolated
    );
    assert!(
        close(fit.fitted_exponent, k, 1e-4),
        "{}",
        fit.fitted_exponent
    );
    assert!(close(fit.c_fit, 1.0 / t_star, 1e-6));
    let rate = k / t_star * y0.powf(-1.0 / k);
    assert!(
        close(fit.ode_margin, rate, 0.05),
        "{} vs {rate}",
        fit.ode_margin
    );
    assert!(close(fit.c3_fit, 0.5 * fit.ode_margin.powf(-th), 1e-14));
    assert!(close(fit.ode_exponent, k, 1e-14));
}

#[test]
fn ode_fit_reports_a_decreasing_tail() {
    let series: Vec<EnergySample> = (0..40)
        .map(|i| sample(i as f64, -1.0 / (1.0 + i as f64), 0.0))
        .collect();
    let fit = fit_blowup_ode(&series, 0.8, 0.5).unwrap();
    assert!(!fit.consistent);
    assert!(fit.reason.unwrap().contains("not increasing"));
    assert!(fit.t_star_extrapolated.is_nan());
    assert!(fit_blowup_ode(&series[..10], 0.8, 0.5).is_err());
}

#[test]
fn lower_bound_is_the_sample_infimum() {
    let th = 0.8;
    let series: Vec<EnergySample> = (0..20)
        .map(|i| sample(i as f64, 3.0 - i as f64, (i * i) as f64))
        .collect();
    let oracle = series
        .iter()
        .map(|s| s.f / (s.d.powf(th) + 1.0))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(lower_bound_check(&series, th).unwrap(), oracle);
}

#[test]
fn gronwall_recovers_an_exponential_rate() {
    // X + 1 = 2 e^{c t}, stored as ‖u‖_p = X^{1/p} with ∇v = 0
    let (c, p) = (0.3, 3.5);
    let series: Vec<EnergySample> = (0..=1000)
        .map(|i| {
            let t = 0.01 * i as f64;
            let x = 2.0 * (c * t).exp() - 1.0;
            EnergySample {
                lp_norm: Some(x.powf(1.0 / p)),
                ..sample(t, 0.0, 0.0)
            }
        })
        .collect();
    let g = lp_gronwall_check(&series, p, 3, Some(4.0)).unwrap();
    assert!(close(g.c_fit, c, 2e-3), "{}", g.c_fit);
    assert!(close(g.slope_fit, c, 0.05), "{}", g.slope_fit);
    assert!(g.bounded_on_window);
    assert!(matches!(
        lp_gronwall_check(&series, 2.5, 3, None),
        Err(Error::Hypothesis(_))
    ));
    assert!(matches!(
        lp_gronwall_check(&series, p, 3, Some(3.2)),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn pointwise_check_recovers_the_profile_constant() {
    let grid = RadialGrid::new(3, 1.0, 100).unwrap();
    let (p, kappa) = (1.2, 1.5);
    let e = (3.0 - p) / p;
    let snapshots: Vec<State> = (0..6)
        .map(|k| {
            let v = grid.sample(|r| 2.5 * r.powf(-e));
            State::new(k as f64, grid.constant(1.0), v)
        })
        .collect();
    let series: Vec<EnergySample> = (0..6).map(|k| sample(k as f64, 0.0, 0.0)).collect();
    let report = pointwise_bound_check(&series, &snapshots, &grid, p, kappa).unwrap();
    assert!(close(report.c_fit, 2.5, 1e-12));
    assert!(report.c_growth_late.abs() < 1e-12);
    assert!(report.bounded);
    assert!(pointwise_bound_check(&series, &snapshots, &grid, 1.6, kappa).is_err());
    assert!(pointwise_bound_check(&series, &snapshots[..1], &grid, p, kappa).is_err());
}
