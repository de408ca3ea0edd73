//! Energy, dissipation and the trajectory diagnostics built on them.
//!
//! `F = ½∫|∇v|² + ½∫v² − ∫uv + ∫G(u)` decreases along solutions with rate
//! `D = ‖v_t‖² + ‖g‖²`, `g = (φ(u)/√ψ(u)) ∇u − √ψ(u) ∇v`. The discrete
//! versions here reuse the solver's face quantities so that the identity
//! `dF/dt = −D` is a sharp test of the scheme.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::nonlinearity::NonlinearitySpec;
use crate::solver::State;

/// Per-time diagnostics. `d == f_norm2 + g_norm2` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub f: f64,
    pub d: f64,
    pub f_norm2: f64,
    pub g_norm2: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub grad_v_norm2: f64,
    pub lp_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    pub d: f64,
    pub f_norm2: f64,
    pub g_norm2: f64,
}

/// `F(u, v)`.
pub fn lyapunov_f(state: &State, spec: &NonlinearitySpec, grid: &RadialGrid) -> Result<f64> {
    let (u, v) = checked_values(state, grid)?;
    let vol = grid.volumes();
    let mut bulk = 0.0;
    for i in 0..u.len() {
        let g = spec.compute_g(u[i])?;
        bulk += vol[i] * (0.5 * v[i] * v[i] - u[i] * v[i] + g);
    }
    Ok(0.5 * grid.gradient_energy(v) + bulk)
}

/// `D` and its two parts for the step `prev -> state`. Without a previous
/// state, `v_t` is replaced by `Δv − v + u` evaluated on `state`.
pub fn dissipation_d(
    state: &State,
    prev: Option<&State>,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
) -> Result<Dissipation> {
    let (u, v) = checked_values(state, grid)?;
    let vol = grid.volumes();
    let f_norm2 = match prev {
        Some(p) => {
            let dt = state.t - p.t;
            if !(dt > 0.0) {
                return Err(Error::Analysis(format!(
                    "dissipation needs increasing times, got {} then {}",
                    p.t, state.t
                )));
            }
            let (_, vp) = checked_values(p, grid)?;
            (0..v.len())
                .map(|i| {
                    let vt = (v[i] - vp[i]) / dt;
                    vol[i] * vt * vt
                })
                .sum()
        }
        None => {
            let lap = laplacian(v, grid);
            (0..v.len())
                .map(|i| {
                    let vt = lap[i] - v[i] + u[i];
                    vol[i] * vt * vt
                })
                .sum()
        }
    };
    let g_norm2 = g_part(u, v, spec, grid)?;
    Ok(Dissipation {
        d: f_norm2 + g_norm2,
        f_norm2,
        g_norm2,
    })
}

/// `‖g‖²` from the solver's face flux `J = φ(ū) ∂u − ψ(u_up) ∂v`, with
/// `ū` the face mean and `u_up` the upwind cell for the sign of `∂v`:
/// `g² = J² / ψ(u_up)`.
fn g_part(u: &[f64], v: &[f64], spec: &NonlinearitySpec, grid: &RadialGrid) -> Result<f64> {
    spec.check_range(u)?;
    let mut acc = 0.0;
    for f in 1..u.len() {
        let h = grid.center_spacing(f);
        let du = (u[f] - u[f - 1]) / h;
        let dv = (v[f] - v[f - 1]) / h;
        let up = if dv > 0.0 { u[f - 1] } else { u[f] };
        let psi = spec.psi_unchecked(up);
        let flux = spec.phi_unchecked(0.5 * (u[f] + u[f - 1])) * du - psi * dv;
        if flux == 0.0 {
            continue;
        }
        if !(psi > 0.0) {
            return Err(Error::Analysis(format!(
                "psi vanishes at face {f} with nonzero flux"
            )));
        }
        acc += grid.face_weight(f) * flux * flux / psi;
    }
    Ok(acc)
}

/// Discrete `r^{1-n}(r^{n-1} v_r)_r` with zero boundary flux.
pub(crate) fn laplacian(v: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let grad = grid.face_gradient_values(v);
    let a = grid.face_areas();
    let vol = grid.volumes();
    (0..v.len())
        .map(|i| (a[i + 1] * grad[i + 1] - a[i] * grad[i]) / vol[i])
        .collect()
}

fn checked_values<'a>(state: &'a State, grid: &RadialGrid) -> Result<(&'a [f64], &'a [f64])> {
    for f in [&state.u, &state.v] {
        if f.stamp() != grid.stamp() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: f.len(),
            });
        }
    }
    Ok((state.u.values(), state.v.values()))
}

/// `‖u‖_{L^p}`.
pub fn lp_norm(values: &[f64], p: f64, grid: &RadialGrid) -> f64 {
    let s: f64 = values
        .iter()
        .zip(grid.volumes())
        .map(|(u, w)| w * u.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// Full diagnostic record for `state`, with `prev` the previous accepted state.
pub fn energy_sample(
    state: &State,
    prev: Option<&State>,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
    lp_exponent: Option<f64>,
) -> Result<EnergySample> {
    let f = lyapunov_f(state, spec, grid)?;
    let diss = dissipation_d(state, prev, spec, grid)?;
    let (u, v) = (state.u.values(), state.v.values());
    Ok(EnergySample {
        t: state.t,
        f,
        d: diss.d,
        f_norm2: diss.f_norm2,
        g_norm2: diss.g_norm2,
        mass_u: grid.integrate_values(u),
        mass_v: grid.integrate_values(v),
        sup_u: state.u.max(),
        sup_v: state.v.max(),
        grad_v_norm2: grid.gradient_energy(v),
        lp_norm: lp_exponent.map(|p| lp_norm(u, p, grid)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResiduals {
    pub per_interval: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

/// `|(F_{k+1} − F_k)/Δt + D_{k+1}| / (|D_{k+1}| + 1)` for consecutive samples.
/// Each sample's `D` is the dissipation over the step that produced it.
pub fn energy_identity_residual(series: &[EnergySample]) -> Result<IdentityResiduals> {
    if series.len() < 3 {
        return Err(Error::Analysis(format!(
            "energy identity needs at least 3 samples, got {}",
            series.len()
        )));
    }
    let per_interval: Vec<f64> = series
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| {
            let rate = (w[1].f - w[0].f) / (w[1].t - w[0].t);
            let d = 0.5 * (w[0].d + w[1].d);
            (rate + d).abs() / (d.abs() + 1.0)
        })
        .collect();
    let max = per_interval.iter().copied().fold(0.0, f64::max);
    let mean = per_interval.iter().sum::<f64>() / per_interval.len().max(1) as f64;
    Ok(IdentityResiduals {
        per_interval,
        max,
        mean,
    })
}

/// `θ = 1 / (1 + n / ((2n+4) κ))`, which lies in `(½, 1)` for `κ > n − 2`.
pub fn theta(n: usize, kappa: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Hypothesis(format!(
            "theta requires n >= 3, got n = {n}"
        )));
    }
    let nf = n as f64;
    if !(kappa > nf - 2.0) {
        return Err(Error::Hypothesis(format!(
            "kappa must exceed n-2 = {}, got {kappa}",
            nf - 2.0
        )));
    }
    let th = 1.0 / (1.0 + nf / ((2.0 * nf + 4.0) * kappa));
    debug_assert!(th > 0.5 && th < 1.0);
    Ok(th)
}

/// Fitted constants of the pointwise decay bounds for `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseReport {
    pub kappa: f64,
    pub b_fit: f64,
    pub m_fit: f64,
    pub p_bound: f64,
    pub c_fit: f64,
    /// `max_{t ≥ T/2} C(t) / max_{t < T/2} C(t) − 1` over the snapshots.
    pub c_growth_late: f64,
    pub bounded: bool,
    /// `(t, max_r v r^{(n−p)/p})` per snapshot.
    pub c_history: Vec<(f64, f64)>,
}

/// Fits `v ≤ C r^{-(n−p)/p}` and `v ≤ B r^{-κ}` over the snapshots; `C` is
/// flagged bounded when it grows less than 10% over the second half of the run.
pub fn pointwise_bound_check(
    series: &[EnergySample],
    snapshots: &[State],
    grid: &RadialGrid,
    p_bound: f64,
    kappa: f64,
) -> Result<PointwiseReport> {
    let n = grid.dim() as f64;
    if !(p_bound > 1.0 && p_bound < n / (n - 1.0)) {
        return Err(Error::Hypothesis(format!(
            "p must lie in (1, n/(n-1)) = (1, {}), got {p_bound}",
            n / (n - 1.0)
        )));
    }
    if !(kappa > n - 2.0) {
        return Err(Error::Hypothesis(format!(
            "kappa must exceed n-2 = {}, got {kappa}",
            n - 2.0
        )));
    }
    if snapshots.len() < 2 {
        return Err(Error::Analysis(
            "pointwise bound check needs at least two snapshots".into(),
        ));
    }
    let expo = (n - p_bound) / p_bound;
    let r = grid.centers();
    let mut b_fit: f64 = 0.0;
    let mut c_history = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let v = s.v.values();
        if v.len() != r.len() {
            return Err(Error::LengthMismatch {
                expected: r.len(),
                found: v.len(),
            });
        }
        let mut c: f64 = 0.0;
        for i in 0..v.len() {
            c = c.max(v[i] * r[i].powf(expo));
            b_fit = b_fit.max(v[i] * r[i].powf(kappa));
        }
        c_history.push((s.t, c));
    }
    let t0 = c_history[0].0;
    let t1 = c_history.last().unwrap().0;
    let mid = 0.5 * (t0 + t1);
    let early = c_history
        .iter()
        .filter(|(t, _)| *t < mid)
        .map(|x| x.1)
        .fold(0.0, f64::max);
    let late = c_history
        .iter()
        .filter(|(t, _)| *t >= mid)
        .map(|x| x.1)
        .fold(0.0, f64::max);
    let c_fit = early.max(late);
    let c_growth_late = if early > 0.0 {
        late / early - 1.0
    } else {
        f64::INFINITY
    };
    let m_fit = series.iter().map(|s| s.mass_v).fold(0.0, f64::max);
    Ok(PointwiseReport {
        kappa,
        b_fit,
        m_fit,
        p_bound,
        c_fit,
        c_growth_late,
        bounded: c_growth_late < 0.1,
        c_history,
    })
}

/// `inf_k F_k / (D_k^θ + 1)`.
pub fn lower_bound_check(series: &[EnergySample], theta_val: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Analysis("empty series".into()));
    }
    Ok(series
        .iter()
        .map(|s| s.f / (s.d.max(0.0).powf(theta_val) + 1.0))
        .fold(f64::INFINITY, f64::min))
}

/// Result of fitting the blowup differential inequality on a series tail.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeFit {
    /// Whether `y = −F` is positive and strictly increasing on the tail.
    pub consistent: bool,
    pub reason: Option<String>,
    /// `min (Δy/Δt) / y^{1/θ}` over the tail.
    pub ode_margin: f64,
    /// `½ ode_margin^{−θ}`; NaN when the margin is not positive.
    pub c3_fit: f64,
    /// Rate constant of `y(t) = y_0 (1 − C t)^{−k}`.
    pub c_fit: f64,
    /// `1 / c_fit`.
    pub t_star_extrapolated: f64,
    /// Least-squares `k`.
    pub fitted_exponent: f64,
    /// `θ/(1−θ)`, the exponent of the comparison solution.
    pub ode_exponent: f64,
    pub tail_len: usize,
}

/// Checks `y' ≥ (y / 2c₃)^{1/θ}` and fits `log y = a − k log(1 − C t)` on the
/// last `tail_fraction` of the samples. The exponent `k` is fitted along with
/// `a` and `C` and reported next to `θ/(1−θ)`.
pub fn fit_blowup_ode(
    series: &[EnergySample],
    theta_val: f64,
    tail_fraction: f64,
) -> Result<OdeFit> {
    if !(theta_val > 0.0 && theta_val < 1.0) {
        return Err(Error::Analysis(format!(
            "theta must lie in (0,1), got {theta_val}"
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Analysis(format!(
            "tail fraction must lie in (0,1], got {tail_fraction}"
        )));
    }
    let tail_len = ((series.len() as f64 * tail_fraction).ceil() as usize).min(series.len());
    if tail_len < 20 {
        return Err(Error::Analysis(format!(
            "ODE fit needs at least 20 tail samples, got {tail_len}"
        )));
    }
    let tail = &series[series.len() - tail_len..];
    let t: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let y: Vec<f64> = tail.iter().map(|s| -s.f).collect();

    let mut reason = None;
    if let Some(k) = y.iter().position(|&v| !(v > 0.0)) {
        reason = Some(format!("y = -F is not positive at t = {}", t[k]));
    } else if let Some(k) = (1..y.len()).find(|&k| !(y[k] > y[k - 1]) || !(t[k] > t[k - 1])) {
        reason = Some(format!("y = -F is not increasing at t = {}", t[k]));
    }
    let inv_theta = 1.0 / theta_val;
    let ode_margin = (1..y.len())
        .filter(|&k| t[k] > t[k - 1])
        .map(|k| {
            let slope = (y[k] - y[k - 1]) / (t[k] - t[k - 1]);
            let mid = 0.5 * (y[k] + y[k - 1]);
            slope / mid.abs().powf(inv_theta)
        })
        .fold(f64::INFINITY, f64::min);
    let c3_fit = if ode_margin > 0.0 {
        0.5 * ode_margin.powf(-theta_val)
    } else {
        f64::NAN
    };

    let (c_fit, t_star, fitted_exponent) = if reason.is_none() {
        let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let (t_star, slope) = fit_singularity(&t, &log_y, *t.last().unwrap());
        (1.0 / t_star, t_star, slope)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };

    Ok(OdeFit {
        consistent: reason.is_none(),
        reason,
        ode_margin,
        c3_fit,
        c_fit,
        t_star_extrapolated: t_star,
        fitted_exponent,
        ode_exponent: theta_val / (1.0 - theta_val),
        tail_len,
    })
}

/// Least-squares fit of `log y = a + b · X(t)` with the regressor
/// `X = −log(1 − t/T*)`. For each trial `T*` the pair `(a, b)` is solved in
/// closed form; `T*` is located by a scan in `log(T* − t_last)` followed by
/// golden-section refinement. Returns `(T*, b)`.
fn fit_singularity(t: &[f64], log_y: &[f64], t_last: f64) -> (f64, f64) {
    let scale = t.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let regress = |z: f64| {
        let t_star = t_last + z.exp();
        let x: Vec<f64> = t.iter().map(|&ti| -(1.0 - ti / t_star).ln()).collect();
        let m = x.len() as f64;
        let xm = x.iter().sum::<f64>() / m;
        let ym = log_y.iter().sum::<f64>() / m;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (xi, yi) in x.iter().zip(log_y) {
            sxy += (xi - xm) * (yi - ym);
            sxx += (xi - xm) * (xi - xm);
        }
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let sse: f64 = x
            .iter()
            .zip(log_y)
            .map(|(xi, yi)| {
                let r = yi - ym - b * (xi - xm);
                r * r
            })
            .sum();
        (sse, b)
    };
    let lo = (scale * 1e-12).ln();
    let hi = (scale * 1e4).ln();
    let steps = 400;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=steps {
        let z = lo + (hi - lo) * k as f64 / steps as f64;
        let e = regress(z).0;
        if e < best.1 {
            best = (z, e);
        }
    }
    let dz = (hi - lo) / steps as f64;
    let (mut a, mut b) = (best.0 - dz, best.0 + dz);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..100 {
        if regress(c).0 < regress(d).0 {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let z = 0.5 * (a + b);
    (t_last + z.exp(), regress(z).1)
}

/// Grönwall diagnostics for `X(t) = ∫u^p + ∫|∇v|²` on `[T/2, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    /// Least-squares slope of `log(X + 1)` against `t` on the window.
    pub slope_fit: f64,
    /// `max (ΔX/Δt) / (X + 1)` over the window, floored at 0.
    pub c_fit: f64,
    pub x_half: f64,
    pub x_end: f64,
    /// `X(T) ≤ X(T/2) e^{C_fit T/2} (1 + 10%)`.
    pub bounded_on_window: bool,
}

/// `p` must exceed `n` (and not exceed `gamma1` when given). The series must
/// carry `lp_norm` at exponent `p`.
pub fn lp_gronwall_check(
    series: &[EnergySample],
    p: f64,
    n: usize,
    gamma1: Option<f64>,
) -> Result<GronwallReport> {
    if !(p > n as f64) {
        return Err(Error::Hypothesis(format!("p must exceed n = {n}, got {p}")));
    }
    if let Some(g) = gamma1 {
        if p > g {
            return Err(Error::Hypothesis(format!(
                "p must not exceed gamma1 = {g}, got {p}"
            )));
        }
    }
    let t_end = series
        .last()
        .ok_or_else(|| Error::Analysis("empty series".into()))?
        .t;
    let half = 0.5 * (series[0].t + t_end);
    let mut window = Vec::new();
    for s in series.iter().filter(|s| s.t >= half) {
        let lp = s
            .lp_norm
            .ok_or_else(|| Error::Analysis("series has no L^p column".into()))?;
        window.push((s.t, lp.powf(p) + s.grad_v_norm2));
    }
    if window.len() < 2 {
        return Err(Error::Analysis(
            "window [T/2, T] holds fewer than two samples".into(),
        ));
    }
    let c_fit = window
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0) / (w[0].1 + 1.0))
        .fold(0.0, f64::max);
    let (x_half, x_end) = (window[0].1, window.last().unwrap().1);
    let span = window.last().unwrap().0 - window[0].0;
    let bounded = x_end <= x_half * (c_fit * span).exp() * 1.1;

    let m = window.len() as f64;
    let tm = window.iter().map(|w| w.0).sum::<f64>() / m;
    let lm = window.iter().map(|w| (w.1 + 1.0).ln()).sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, x) in &window {
        num += (t - tm) * ((x + 1.0).ln() - lm);
        den += (t - tm) * (t - tm);
    }
    let slope_fit = if den > 0.0 { num / den } else { 0.0 };
    Ok(GronwallReport {
        slope_fit,
        c_fit,
        x_half,
        x_end,
        bounded_on_window: bounded,
    })
}
