//! IMEX time stepping for the radial system, with adaptive steps and run verdicts.
//!
//! A step first solves `v_t = Δv − v + u` implicitly, then moves `u` by the
//! explicit upwind chemotaxis flux `ψ(u_up) ∂_r v` and finally by implicit
//! diffusion with `φ` frozen at the face means of the old `u`.

use crate::error::{Error, Result};
use crate::functionals::{energy_sample, EnergySample};
use crate::grid::{RadialField, RadialGrid};
use crate::initial_data::InitialData;
use crate::nonlinearity::NonlinearitySpec;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: RadialField,
    pub v: RadialField,
}

impl State {
    pub fn new(t: f64, u: RadialField, v: RadialField) -> Self {
        State { t, u, v }
    }

    /// Checks grid compatibility, finiteness and strict positivity.
    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        for (name, f) in [("u", &self.u), ("v", &self.v)] {
            if f.stamp() != grid.stamp() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    found: f.len(),
                });
            }
            if let Some(&bad) = f.values().iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::out_of_range(
                    bad,
                    format!("{name} must be finite and positive"),
                ));
            }
        }
        if !self.t.is_finite() {
            return Err(Error::out_of_range(self.t, "time must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    /// Largest accepted relative increase of `sup u` in one step.
    pub growth_cap: f64,
    pub sup_u_blowup: f64,
    pub t_end: f64,
    /// Hard limit on attempted steps.
    pub max_steps: u64,
    pub transport: Transport,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_init: 1e-6,
            dt_min: 1e-14,
            dt_max: 1e-2,
            cfl_safety: 0.4,
            growth_cap: 0.25,
            sup_u_blowup: 1e8,
            t_end: 1.0,
            max_steps: 50_000_000,
            transport: Transport::Explicit,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0,1), got {}",
                self.cfl_safety
            )));
        }
        if !(self.growth_cap > 0.0) {
            return Err(Error::Config(format!(
                "growth_cap must be positive, got {}",
                self.growth_cap
            )));
        }
        if !(self.sup_u_blowup > 0.0) {
            return Err(Error::Config(format!(
                "sup_u_blowup must be positive, got {}",
                self.sup_u_blowup
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be positive and finite, got {}",
                self.t_end
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Time discretisation of the chemotaxis flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    /// Explicit upwind flux under a CFL restriction.
    #[default]
    Explicit,
    /// Upwind flux `β(u_up) u_up^{k+1} ∂v^{k+1}`, solved together with diffusion.
    /// Positivity holds for every step size.
    LinearlyImplicit,
}

impl Transport {
    pub fn name(&self) -> &'static str {
        match self {
            Transport::Explicit => "explicit",
            Transport::LinearlyImplicit => "implicit",
        }
    }
}

/// Why a step attempt was refused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rejection {
    /// The transport CFL bound is `dt_cfl` for the attempted `v`.
    Cfl { dt_cfl: f64 },
    /// A cell became nonpositive, non-finite or exceeded the nonlinearity's cap.
    Positivity,
    /// `sup u` grew by more than `growth_cap`.
    Growth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepAttempt {
    Accepted(State),
    Rejected(Rejection),
}

/// Solves `(I + dt M) x = rhs` for `x − base`, where `rhs − base` is `resid`.
/// Working with the increment keeps the roundoff relative to the change
/// rather than to the field, which is what keeps the discrete mass fixed.
fn solve_increment(
    mat: &Tridiagonal,
    base: &[f64],
    resid: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    mat.solve_in_place(resid, scratch)?;
    Ok(base.iter().zip(resid.iter()).map(|(b, d)| b + d).collect())
}

/// One IMEX step of size `dt`.
pub fn step(
    state: &State,
    dt: f64,
    grid: &RadialGrid,
    spec: &NonlinearitySpec,
    ctrl: &StepControl,
) -> Result<StepAttempt> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::out_of_range(dt, "time step must be positive"));
    }
    let u = state.u.values();
    let v = state.v.values();
    let n = grid.len();
    let vol = grid.volumes();
    let area = grid.face_areas();
    // conductance A_f / h_f at interior faces, 0 at the boundary faces
    let cond: Vec<f64> = (0..=n)
        .map(|f| {
            if f == 0 || f == n {
                0.0
            } else {
                area[f] / grid.center_spacing(f)
            }
        })
        .collect();
    let mut scratch = Vec::with_capacity(n);

    // v: (1 + dt) v' − dt Δv' = v + dt u, written for the increment v' − v
    let mut mat = Tridiagonal::zeros(n);
    for i in 0..n {
        let a = dt / vol[i];
        mat.lower[i] = -a * cond[i];
        mat.upper[i] = -a * cond[i + 1];
        mat.diag[i] = 1.0 + dt + a * (cond[i] + cond[i + 1]);
    }
    let mut dv: Vec<f64> = (0..n)
        .map(|i| {
            let lap = cond[i + 1] * (v.get(i + 1).copied().unwrap_or(v[i]) - v[i])
                - cond[i] * (v[i] - if i > 0 { v[i - 1] } else { v[i] });
            dt * (lap / vol[i] - v[i] + u[i])
        })
        .collect();
    let v_new = solve_increment(&mat, v, &mut dv, &mut scratch)?;
    let grad_v = grid.face_gradient_values(&v_new);

    // transport: face speed a_f = A_f β(u_up) ∂v, carried by the upwind cell
    let mut speed = vec![0.0; n + 1];
    let mut upwind = vec![0usize; n + 1];
    for f in 1..n {
        let g = grad_v[f];
        let up = if g > 0.0 { f - 1 } else { f };
        upwind[f] = up;
        speed[f] = area[f] * spec.beta_unchecked(u[up]) * g;
    }
    let phi_face: Vec<f64> = (0..=n)
        .map(|f| {
            if f == 0 || f == n {
                0.0
            } else {
                cond[f] * spec.phi_unchecked(0.5 * (u[f - 1] + u[f]))
            }
        })
        .collect();

    let explicit = ctrl.transport == Transport::Explicit;
    if explicit {
        let mut outflow = vec![0.0; n];
        for f in 1..n {
            outflow[upwind[f]] += speed[f].abs();
        }
        let dt_cfl = (0..n)
            .filter(|&i| outflow[i] > 0.0)
            .map(|i| ctrl.cfl_safety * vol[i] / outflow[i])
            .fold(f64::INFINITY, f64::min);
        if dt > dt_cfl {
            return Ok(StepAttempt::Rejected(Rejection::Cfl { dt_cfl }));
        }
    }

    let base: Vec<f64> = if explicit {
        (0..n)
            .map(|i| {
                let net = speed[i + 1] * u[upwind[i + 1]] - speed[i] * u[upwind[i]];
                u[i] - dt / vol[i] * net
            })
            .collect()
    } else {
        u.to_vec()
    };
    // face flux of `base` (outward positive) for the terms solved implicitly
    let mut flux = vec![0.0; n + 1];
    for f in 1..n {
        flux[f] = -phi_face[f] * (base[f] - base[f - 1]);
        if !explicit {
            flux[f] += speed[f] * base[upwind[f]];
        }
    }
    let mut du: Vec<f64> = (0..n)
        .map(|i| -dt / vol[i] * (flux[i + 1] - flux[i]))
        .collect();
    for i in 0..n {
        let a = dt / vol[i];
        mat.lower[i] = -a * phi_face[i];
        mat.upper[i] = -a * phi_face[i + 1];
        mat.diag[i] = 1.0 + a * (phi_face[i] + phi_face[i + 1]);
    }
    if !explicit {
        for f in 1..n {
            let s = speed[f];
            if s > 0.0 {
                // flow f-1 -> f carried by u_{f-1}
                mat.diag[f - 1] += dt / vol[f - 1] * s;
                mat.lower[f] -= dt / vol[f] * s;
            } else if s < 0.0 {
                // flow f -> f-1 carried by u_f
                mat.diag[f] -= dt / vol[f] * s;
                mat.upper[f - 1] += dt / vol[f - 1] * s;
            }
        }
    }
    let u_new = solve_increment(&mat, &base, &mut du, &mut scratch)?;

    let cap = spec.s_cap();
    let healthy = |x: &f64| x.is_finite() && *x > 0.0;
    if !u_new.iter().all(|x| healthy(x) && *x <= cap) || !v_new.iter().all(healthy) {
        return Ok(StepAttempt::Rejected(Rejection::Positivity));
    }
    let stamp = grid.stamp();
    Ok(StepAttempt::Accepted(State {
        t: state.t + dt,
        u: RadialField::from_parts(u_new, stamp),
        v: RadialField::from_parts(v_new, stamp),
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    FiniteTimeBlowup {
        t_star: f64,
    },
    /// `growth_factor = sup u(t_end) / sup u(0)`.
    ReachedHorizon {
        growth_factor: f64,
    },
    SteadyState {
        residual: f64,
    },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::FiniteTimeBlowup { .. } => "FiniteTimeBlowup",
            Verdict::ReachedHorizon { .. } => "ReachedHorizon",
            Verdict::SteadyState { .. } => "SteadyState",
        }
    }
}

/// What the driver records besides the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    /// Record an energy sample every `sample_stride` accepted steps (and always the last).
    pub sample_stride: usize,
    /// Store a state snapshot at the first accepted step at or past each time.
    pub snapshot_times: Vec<f64>,
    /// Also store a snapshot every `snapshot_stride` accepted steps; 0 disables.
    pub snapshot_stride: usize,
    /// Exponent of the optional `‖u‖_{L^p}` column.
    pub lp_exponent: Option<f64>,
    pub steady_tol: f64,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors {
            sample_stride: 1,
            snapshot_times: Vec::new(),
            snapshot_stride: 0,
            lp_exponent: None,
            steady_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub series: Vec<EnergySample>,
    pub final_state: State,
    pub snapshots: Vec<State>,
    pub stats: RunStats,
}

/// Summary of one accepted or rejected attempt, as seen by [`detect_verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub sup_u: f64,
    /// Pointwise relative rate `max |Δw| / (dt w)` over `u` and `v`; NaN if rejected.
    pub residual: f64,
}

/// Consecutive steady records required before `SteadyState` is declared.
const STEADY_RUN: usize = 10;
/// Consecutive rejections at `dt_min` that pin the step.
const PINNED_RUN: usize = 10;

/// Applies the verdict rules to the most recent records (oldest first).
/// `None` means continue.
pub fn detect_verdict(
    history: &[StepRecord],
    ctrl: &StepControl,
    steady_tol: f64,
) -> Option<Verdict> {
    let last = history.last()?;
    if last.accepted && last.sup_u >= ctrl.sup_u_blowup {
        return Some(Verdict::FiniteTimeBlowup { t_star: last.t });
    }
    if last.sup_u >= ctrl.sup_u_blowup && history.len() >= PINNED_RUN {
        let tail = &history[history.len() - PINNED_RUN..];
        if tail.iter().all(|r| !r.accepted && r.dt <= ctrl.dt_min) {
            return Some(Verdict::FiniteTimeBlowup { t_star: last.t });
        }
    }
    if history.len() >= STEADY_RUN {
        let tail = &history[history.len() - STEADY_RUN..];
        if tail.iter().all(|r| r.accepted && r.residual < steady_tol) {
            let residual = tail.iter().map(|r| r.residual).fold(0.0, f64::max);
            return Some(Verdict::SteadyState { residual });
        }
    }
    None
}

fn relative_rate(old: &[f64], new: &[f64], dt: f64) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| (b - a).abs() / (dt * a.abs()))
        .fold(0.0, f64::max)
}

/// Advances `data` until a verdict is reached.
pub fn run(
    data: &InitialData,
    grid: &RadialGrid,
    spec: &NonlinearitySpec,
    ctrl: &StepControl,
    monitors: &Monitors,
) -> Result<RunOutcome> {
    ctrl.validate()?;
    if monitors.sample_stride == 0 {
        return Err(Error::Config("sample_stride must be positive".into()));
    }
    let mut state = State::new(0.0, data.u0.clone(), data.v0.clone());
    state.validate(grid)?;
    spec.check_range(state.u.values())?;

    let sup_u0 = state.u.max();
    let mut series = vec![energy_sample(
        &state,
        None,
        spec,
        grid,
        monitors.lp_exponent,
    )?];
    let mut snapshot_times = monitors.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;
    let mut snapshots = Vec::new();
    while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= state.t {
        snapshots.push(state.clone());
        next_snapshot += 1;
    }

    let mut stats = RunStats::default();
    let mut history: Vec<StepRecord> = Vec::with_capacity(2 * PINNED_RUN);
    let mut dt = ctrl.dt_init;
    let mut since_sample = 0usize;
    let mut last_sampled = state.clone();
    let horizon_slack = 1e-12 * ctrl.t_end;

    let fail = |reason: String, state: &State| Error::Solver {
        reason,
        state: Box::new(state.clone()),
    };

    let verdict = loop {
        if state.t >= ctrl.t_end - horizon_slack {
            break Verdict::ReachedHorizon {
                growth_factor: state.u.max() / sup_u0,
            };
        }
        if stats.accepted + stats.rejected >= ctrl.max_steps {
            return Err(fail(
                format!("step limit {} reached", ctrl.max_steps),
                &state,
            ));
        }
        let remaining = ctrl.t_end - state.t;
        let dt_try = dt.min(remaining);
        let attempt = step(&state, dt_try, grid, spec, ctrl)
            .map_err(|e| fail(format!("step at dt = {dt_try}: {e}"), &state))?;
        let sup_old = state.u.max();
        let outcome = match attempt {
            StepAttempt::Accepted(next)
                if next.u.max() > (1.0 + ctrl.growth_cap) * sup_old && dt_try > ctrl.dt_min =>
            {
                Err(Rejection::Growth)
            }
            StepAttempt::Accepted(next) => Ok(next),
            StepAttempt::Rejected(r) => Err(r),
        };
        match outcome {
            Ok(next) => {
                stats.accepted += 1;
                let residual = relative_rate(state.u.values(), next.u.values(), dt_try)
                    .max(relative_rate(state.v.values(), next.v.values(), dt_try));
                history.push(StepRecord {
                    t: next.t,
                    dt: dt_try,
                    accepted: true,
                    sup_u: next.u.max(),
                    residual,
                });
                state = next;
                since_sample += 1;
                let mut due = monitors.snapshot_stride > 0
                    && stats.accepted % monitors.snapshot_stride as u64 == 0;
                while next_snapshot < snapshot_times.len()
                    && snapshot_times[next_snapshot] <= state.t
                {
                    due = true;
                    next_snapshot += 1;
                }
                if due {
                    snapshots.push(state.clone());
                }
                let verdict = detect_verdict(&history, ctrl, monitors.steady_tol);
                let at_end = state.t >= ctrl.t_end - horizon_slack;
                if since_sample >= monitors.sample_stride || verdict.is_some() || at_end {
                    let sample = energy_sample(
                        &state,
                        Some(&last_sampled),
                        spec,
                        grid,
                        monitors.lp_exponent,
                    )
                    .map_err(|e| fail(format!("energy sample: {e}"), &state))?;
                    series.push(sample);
                    last_sampled = state.clone();
                    since_sample = 0;
                }
                if let Some(v) = verdict {
                    break v;
                }
                if dt_try >= dt {
                    dt = (dt * 1.2).min(ctrl.dt_max);
                }
            }
            Err(reason) => {
                stats.rejected += 1;
                history.push(StepRecord {
                    t: state.t,
                    dt: dt_try,
                    accepted: false,
                    sup_u: state.u.max(),
                    residual: f64::NAN,
                });
                if let Some(v) = detect_verdict(&history, ctrl, monitors.steady_tol) {
                    break v;
                }
                if dt_try <= ctrl.dt_min {
                    let pinned = history
                        .iter()
                        .rev()
                        .take_while(|r| !r.accepted && r.dt <= ctrl.dt_min)
                        .count();
                    if pinned >= PINNED_RUN {
                        return Err(fail(
                            format!(
                                "step pinned at dt_min = {} with sup u = {:e} below the blowup threshold {:e}",
                                ctrl.dt_min,
                                state.u.max(),
                                ctrl.sup_u_blowup
                            ),
                            &state,
                        ));
                    }
                }
                let halved = 0.5 * dt_try;
                dt = match reason {
                    Rejection::Cfl { dt_cfl } => halved.min(dt_cfl),
                    _ => halved,
                }
                .max(ctrl.dt_min);
            }
        }
        if history.len() > 4 * PINNED_RUN {
            history.drain(..history.len() - 2 * PINNED_RUN);
        }
    };

    Ok(RunOutcome {
        verdict,
        series,
        final_state: state,
        snapshots,
        stats,
    })
}
