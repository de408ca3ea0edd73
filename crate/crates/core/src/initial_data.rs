//! Positive radial initial data: constants, η-concentrated families and
//! mass-preserving perturbations that push the energy down.

use crate::error::{Error, Result};
use crate::functionals::{lp_norm, lyapunov_f};
use crate::grid::{RadialField, RadialGrid};
use crate::nonlinearity::NonlinearitySpec;
use crate::solver::State;

/// Cells that the concentration ball must span.
const MIN_CELLS_IN_BALL: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: RadialField,
    pub v0: RadialField,
    /// `∫u0`.
    pub m: f64,
    /// `‖v0‖_{W^{1,2}}`.
    pub a: f64,
    /// `F(u0, v0)`, once computed by [`InitialData::with_energy`].
    pub f0: Option<f64>,
}

impl InitialData {
    /// Wraps explicit fields after checking positivity.
    pub fn from_fields(grid: &RadialGrid, u0: RadialField, v0: RadialField) -> Result<Self> {
        let state = State::new(0.0, u0, v0);
        state
            .validate(grid)
            .map_err(|e| Error::InitialData(e.to_string()))?;
        let m = grid.integrate_values(state.u.values());
        let a = w12_norm(state.v.values(), grid);
        Ok(InitialData {
            u0: state.u,
            v0: state.v,
            m,
            a,
            f0: None,
        })
    }

    pub fn with_energy(mut self, spec: &NonlinearitySpec, grid: &RadialGrid) -> Result<Self> {
        self.f0 = Some(lyapunov_f(&self.as_state(), spec, grid)?);
        Ok(self)
    }

    pub fn as_state(&self) -> State {
        State::new(0.0, self.u0.clone(), self.v0.clone())
    }
}

pub(crate) fn w12_norm(values: &[f64], grid: &RadialGrid) -> f64 {
    let l2: f64 = values
        .iter()
        .zip(grid.volumes())
        .map(|(x, w)| w * x * x)
        .sum();
    (l2 + grid.gradient_energy(values)).sqrt()
}

/// Uniform state `(u_star, v_star)`.
pub fn constant_state(grid: &RadialGrid, u_star: f64, v_star: f64) -> Result<InitialData> {
    for (name, x) in [("u_star", u_star), ("v_star", v_star)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InitialData(format!(
                "{name} must be positive, got {x}"
            )));
        }
    }
    InitialData::from_fields(grid, grid.constant(u_star), grid.constant(v_star))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaFamilyParams {
    pub m: f64,
    pub eta: f64,
    pub gamma2: f64,
    /// Background level of `u0`; `None` means `m / (100 |Ω|)`.
    pub floor: Option<f64>,
    /// Multiplier on the `v0` profile.
    pub amplitude: f64,
}

impl EtaFamilyParams {
    pub fn new(m: f64, eta: f64, gamma2: f64) -> Self {
        EtaFamilyParams {
            m,
            eta,
            gamma2,
            floor: None,
            amplitude: 1.0,
        }
    }

    /// Checks `γ2 ∈ ((1−α)n, n−2)`, the window in which the family drives `F` to −∞.
    pub fn check_blowup_window(&self, alpha: f64, n: usize) -> Result<()> {
        let nf = n as f64;
        let lo = (1.0 - alpha) * nf;
        if !(self.gamma2 > lo && self.gamma2 < nf - 2.0) {
            return Err(Error::Hypothesis(format!(
                "gamma2 must lie in ((1-alpha)n, n-2) = ({lo}, {}), got {}",
                nf - 2.0,
                self.gamma2
            )));
        }
        Ok(())
    }
}

/// `χ_η(r) = (1 − (r/η)²)²` on `[0, η]`.
fn bump(r: f64, eta: f64) -> f64 {
    if r >= eta {
        0.0
    } else {
        let q = 1.0 - (r / eta) * (r / eta);
        q * q
    }
}

/// `η^{−γ}(1 + γ/2 (1 − (r/η)²))` inside the ball, `r^{−γ}` outside.
fn v_profile(r: f64, eta: f64, gamma2: f64) -> f64 {
    if r <= eta {
        eta.powf(-gamma2) * (1.0 + 0.5 * gamma2 * (1.0 - (r / eta) * (r / eta)))
    } else {
        r.powf(-gamma2)
    }
}

fn check_eta(grid: &RadialGrid, eta: f64) -> Result<()> {
    let cells = grid.centers().iter().filter(|&&r| r < eta).count();
    if cells < MIN_CELLS_IN_BALL {
        return Err(Error::InitialData(format!(
            "eta = {eta} spans {cells} cells, need at least {MIN_CELLS_IN_BALL}"
        )));
    }
    if eta > grid.radius() {
        return Err(Error::InitialData(format!(
            "eta = {eta} exceeds the radius {}",
            grid.radius()
        )));
    }
    Ok(())
}

/// Bump sampled at the cell centres and normalised to unit discrete mass.
fn unit_bump(grid: &RadialGrid, eta: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid.centers().iter().map(|&r| bump(r, eta)).collect();
    let mass = grid.integrate_values(&raw);
    raw.into_iter().map(|x| x / mass).collect()
}

/// `u0 = floor + (m − floor |Ω|) χ_η / ‖χ_η‖₁`, `v0 = amplitude · profile_η`.
pub fn concentrated_family(grid: &RadialGrid, params: &EtaFamilyParams) -> Result<InitialData> {
    if !(params.m > 0.0 && params.m.is_finite()) {
        return Err(Error::InitialData(format!(
            "mass must be positive, got {}",
            params.m
        )));
    }
    if !(params.gamma2 > 0.0) {
        return Err(Error::InitialData(format!(
            "gamma2 must be positive, got {}",
            params.gamma2
        )));
    }
    if !(params.amplitude > 0.0 && params.amplitude.is_finite()) {
        return Err(Error::InitialData(format!(
            "amplitude must be positive, got {}",
            params.amplitude
        )));
    }
    if !(params.eta > 0.0) {
        return Err(Error::InitialData(format!(
            "eta must be positive, got {}",
            params.eta
        )));
    }
    check_eta(grid, params.eta)?;
    let volume = grid.total_volume();
    let floor = params.floor.unwrap_or(params.m / (100.0 * volume));
    if !(floor > 0.0) || floor * volume >= params.m {
        return Err(Error::InitialData(format!(
            "floor {floor} must be positive with floor * |Omega| < m = {}",
            params.m
        )));
    }
    let spike = params.m - floor * volume;
    let u0: Vec<f64> = unit_bump(grid, params.eta)
        .into_iter()
        .map(|b| floor + spike * b)
        .collect();
    let v0: Vec<f64> = grid
        .centers()
        .iter()
        .map(|&r| params.amplitude * v_profile(r, params.eta, params.gamma2))
        .collect();
    InitialData::from_fields(grid, grid.field(u0)?, grid.field(v0)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub m: f64,
    pub a: f64,
    pub f0: f64,
    pub k: f64,
    /// `−K (1 + A²)`.
    pub threshold: f64,
    pub member: bool,
}

/// Tests `F(u0, v0) ≤ −K (1 + A²)` for a caller-supplied `K`.
pub fn check_membership(
    data: &InitialData,
    k: f64,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
) -> Result<MembershipReport> {
    if !(k > 0.0) {
        return Err(Error::InitialData(format!("K must be positive, got {k}")));
    }
    let f0 = match data.f0 {
        Some(f) => f,
        None => lyapunov_f(&data.as_state(), spec, grid)?,
    };
    let threshold = -k * (1.0 + data.a * data.a);
    Ok(MembershipReport {
        m: data.m,
        a: data.a,
        f0,
        k,
        threshold,
        member: f0 <= threshold,
    })
}

/// Distances of a perturbation from its base.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub data: InitialData,
    /// `‖u0' − u0‖_{L^p}`.
    pub dist_u: f64,
    /// `‖v0' − v0‖_{W^{1,2}}`.
    pub dist_v: f64,
    pub spike_mass: f64,
    pub v_weight: f64,
}

/// Moves `δm` of the mass of `base.u0` into an η-bump and adds `ε_v (profile_η − R^{−γ2})`
/// to `base.v0`. `δm ∝ η^a` and `ε_v ∝ η^b` with `a > n(1 − 1/p)`,
/// `b > max(0, γ2 + 1 − n/2)`, `a + b < γ2` and `a < b + n − 2 − γ2`, so both
/// distances vanish while `∫uv` dominates `‖∇v‖²` as `η → 0`. Both weights are
/// scaled so that each distance equals `eps/4` at `η = R/4`.
pub fn perturb_to_blowup(
    base: &InitialData,
    eps: f64,
    p_dense: f64,
    params: &EtaFamilyParams,
    grid: &RadialGrid,
) -> Result<PerturbationReport> {
    let n = grid.dim() as f64;
    if !(eps > 0.0) {
        return Err(Error::InitialData(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let p_hi = 2.0 * n / (n + 2.0);
    if !(p_dense > 1.0 && p_dense < p_hi) {
        return Err(Error::Hypothesis(format!(
            "p_dense must lie in (1, 2n/(n+2)) = (1, {p_hi}), got {p_dense}"
        )));
    }
    let gamma2 = params.gamma2;
    let a_lo = n * (1.0 - 1.0 / p_dense);
    let b_lo = (gamma2 + 1.0 - 0.5 * n).max(0.0);
    let gap = (gamma2 - a_lo - b_lo).min(b_lo + n - 2.0 - gamma2 - a_lo);
    if !(gap > 0.0) {
        return Err(Error::Hypothesis(format!(
            "no admissible concentration exponents for gamma2 = {gamma2}, p_dense = {p_dense}, n = {n}"
        )));
    }
    let a_exp = a_lo + gap / 3.0;
    let b_exp = b_lo + gap / 3.0;
    check_eta(grid, params.eta)?;
    let eta_ref = 0.25 * grid.radius();
    check_eta(grid, eta_ref)?;

    let u0 = base.u0.values();
    let v0 = base.v0.values();
    let m = base.m;
    let r_out = grid.radius().powf(-gamma2);
    let u_dir = |eta: f64| -> Vec<f64> {
        unit_bump(grid, eta)
            .into_iter()
            .zip(u0)
            .map(|(b, u)| b - u / m)
            .collect()
    };
    let v_dir = |eta: f64| -> Vec<f64> {
        grid.centers()
            .iter()
            .map(|&r| v_profile(r, eta, gamma2) - r_out)
            .collect()
    };
    let du_ref = lp_norm(&u_dir(eta_ref), p_dense, grid);
    let dv_ref = w12_norm(&v_dir(eta_ref), grid);
    let scale = params.eta / eta_ref;
    let spike_mass = 0.25 * eps * scale.powf(a_exp) / du_ref;
    let v_weight = 0.25 * eps * scale.powf(b_exp) / dv_ref;
    if spike_mass >= 0.5 * m {
        return Err(Error::InitialData(format!(
            "spike mass {spike_mass} would exceed half the base mass {m}; reduce eps"
        )));
    }

    let du = u_dir(params.eta);
    let dv = v_dir(params.eta);
    let u_new: Vec<f64> = u0
        .iter()
        .zip(&du)
        .map(|(u, d)| u + spike_mass * d)
        .collect();
    let v_new: Vec<f64> = v0.iter().zip(&dv).map(|(v, d)| v + v_weight * d).collect();
    let dist_u = spike_mass * lp_norm(&du, p_dense, grid);
    let dist_v = v_weight * w12_norm(&dv, grid);
    if !(dist_u + dist_v < eps) {
        return Err(Error::InitialData(format!(
            "perturbation distance {} does not fit eps = {eps} on this grid",
            dist_u + dist_v
        )));
    }
    let data = InitialData::from_fields(grid, grid.field(u_new)?, grid.field(v_new)?)?;
    Ok(PerturbationReport {
        data,
        dist_u,
        dist_v,
        spike_mass,
        v_weight,
    })
}
