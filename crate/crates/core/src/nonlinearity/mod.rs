//! Motility `φ`, sensitivity `ψ(s) = s β(s)` and the potentials
//! `G(s) = ∫_{s0}^{s} ∫_{s0}^{σ} φ/ψ dτ dσ` and `H(s) = ∫_0^s σ φ/ψ dσ`.

mod potentials;
mod tabulated;

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use potentials::Potentials;
pub use tabulated::{MonotoneCubic, Tabulation};

pub const DEFAULT_S0: f64 = 1.0;
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_S_CAP: f64 = 1e12;

/// Built-in nonlinearity families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `φ ≡ 1`, `ψ(s) = s`.
    Semilinear,
    /// `φ = (s+1)^{-p}`, `ψ = s (s+1)^{q-1}`.
    PowerLaw {
        p: f64,
        q: f64,
    },
    /// `φ = c_d (s+1)^{q_d}`, `ψ = s`.
    DiffusionOnly {
        q_d: f64,
        c_d: f64,
    },
    /// `φ = β = d1 (1+s)^{-gamma1}`.
    DecayingSensitivity {
        gamma1: f64,
        d1: f64,
    },
    Tabulated(Tabulation),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Semilinear => "semilinear",
            Family::PowerLaw { .. } => "power_law",
            Family::DiffusionOnly { .. } => "diffusion_only",
            Family::DecayingSensitivity { .. } => "decaying_sensitivity",
            Family::Tabulated(_) => "tabulated",
        }
    }

    #[inline]
    fn phi(&self, s: f64) -> f64 {
        match self {
            Family::Semilinear => 1.0,
            Family::PowerLaw { p, .. } => (s + 1.0).powf(-p),
            Family::DiffusionOnly { q_d, c_d } => c_d * (s + 1.0).powf(*q_d),
            Family::DecayingSensitivity { gamma1, d1 } => d1 * (s + 1.0).powf(-gamma1),
            Family::Tabulated(t) => t.phi.eval(s),
        }
    }

    #[inline]
    fn beta(&self, s: f64) -> f64 {
        match self {
            Family::Semilinear | Family::DiffusionOnly { .. } => 1.0,
            Family::PowerLaw { q, .. } => (s + 1.0).powf(q - 1.0),
            Family::DecayingSensitivity { gamma1, d1 } => d1 * (s + 1.0).powf(-gamma1),
            Family::Tabulated(t) => t.beta.eval(s),
        }
    }

    /// `φ/β`, simplified where the family allows it.
    #[inline]
    fn phi_over_beta(&self, s: f64) -> f64 {
        match self {
            Family::Semilinear => 1.0,
            Family::PowerLaw { p, q } => (s + 1.0).powf(1.0 - p - q),
            Family::DecayingSensitivity { .. } => 1.0,
            _ => self.phi(s) / self.beta(s),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Semilinear => write!(f, "semilinear"),
            Family::PowerLaw { p, q } => write!(f, "power_law(p={p}, q={q})"),
            Family::DiffusionOnly { q_d, c_d } => write!(f, "diffusion_only(q_d={q_d}, c_d={c_d})"),
            Family::DecayingSensitivity { gamma1, d1 } => {
                write!(f, "decaying_sensitivity(gamma1={gamma1}, d1={d1})")
            }
            Family::Tabulated(_) => write!(f, "tabulated"),
        }
    }
}

/// `(φ, ψ, β)` at one argument. `psi == s * beta` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub phi: f64,
    pub psi: f64,
    pub beta: f64,
}

/// An immutable `(φ, ψ, β)` triple with the settings used to build `G`, `H`.
///
/// The antiderivative tables are built on first use and shared between clones.
#[derive(Clone)]
pub struct NonlinearitySpec {
    family: Family,
    s0: f64,
    quad_tol: f64,
    s_cap: f64,
    tables: Arc<OnceLock<std::result::Result<Potentials, String>>>,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("family", &self.family)
            .field("s0", &self.s0)
            .field("quad_tol", &self.quad_tol)
            .field("s_cap", &self.s_cap)
            .finish()
    }
}

impl PartialEq for NonlinearitySpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.s0 == other.s0
            && self.quad_tol == other.quad_tol
            && self.s_cap == other.s_cap
    }
}

impl NonlinearitySpec {
    pub fn new(family: Family) -> Result<Self> {
        Self::with_settings(family, DEFAULT_S0, DEFAULT_QUAD_TOL, DEFAULT_S_CAP)
    }

    pub fn semilinear() -> Self {
        Self::new(Family::Semilinear).expect("semilinear family is always valid")
    }

    /// Full constructor. Positivity of `φ` and `β` is checked on `[0, s_cap]`.
    pub fn with_settings(family: Family, s0: f64, quad_tol: f64, s_cap: f64) -> Result<Self> {
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::InvalidNonlinearity(format!(
                "s0 must be positive, got {s0}"
            )));
        }
        if !(quad_tol > 0.0 && quad_tol < 1e-2) {
            return Err(Error::InvalidNonlinearity(format!(
                "quadrature tolerance must lie in (0, 1e-2), got {quad_tol}"
            )));
        }
        let mut s_cap = s_cap;
        if let Family::Tabulated(t) = &family {
            s_cap = s_cap.min(t.coverage());
        }
        if !(s_cap > s0) {
            return Err(Error::InvalidNonlinearity(format!(
                "s_cap ({s_cap}) must exceed s0 ({s0})"
            )));
        }
        match family {
            Family::PowerLaw { p, q } if !p.is_finite() || !q.is_finite() => {
                return Err(Error::InvalidNonlinearity(
                    "power-law exponents must be finite".into(),
                ))
            }
            Family::DiffusionOnly { q_d, c_d } if !q_d.is_finite() || !(c_d > 0.0) => {
                return Err(Error::InvalidNonlinearity(format!(
                    "diffusion-only needs finite q_d and c_d > 0, got q_d={q_d}, c_d={c_d}"
                )))
            }
            Family::DecayingSensitivity { gamma1, d1 } if !(gamma1 > 0.0) || !(d1 > 0.0) => {
                return Err(Error::InvalidNonlinearity(format!(
                    "decaying sensitivity needs gamma1 > 0 and d1 > 0, got gamma1={gamma1}, d1={d1}"
                )))
            }
            _ => {}
        }
        let spec = NonlinearitySpec {
            family,
            s0,
            quad_tol,
            s_cap,
            tables: Arc::new(OnceLock::new()),
        };
        spec.check_positivity()?;
        Ok(spec)
    }

    fn check_positivity(&self) -> Result<()> {
        let samples = std::iter::once(0.0).chain(log_space(1e-12, self.s_cap, 400));
        for s in samples {
            let (phi, beta) = (self.family.phi(s), self.family.beta(s));
            if !(phi > 0.0) || !phi.is_finite() {
                return Err(Error::InvalidNonlinearity(format!(
                    "phi({s}) = {phi} is not positive and finite"
                )));
            }
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::InvalidNonlinearity(format!(
                    "beta({s}) = {beta} is not positive and finite"
                )));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn s_cap(&self) -> f64 {
        self.s_cap
    }

    fn check_arg(&self, s: f64) -> Result<()> {
        if !(s >= 0.0) {
            return Err(Error::out_of_range(s, "argument must be nonnegative"));
        }
        if s > self.s_cap {
            return Err(Error::out_of_range(
                s,
                format!("argument exceeds s_cap = {}", self.s_cap),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> Result<Eval> {
        self.check_arg(s)?;
        let beta = self.family.beta(s);
        Ok(Eval {
            phi: self.family.phi(s),
            psi: s * beta,
            beta,
        })
    }

    // Unchecked evaluations for the solver's inner loops; callers guarantee
    // 0 <= s <= s_cap.
    #[inline]
    pub(crate) fn phi_unchecked(&self, s: f64) -> f64 {
        self.family.phi(s)
    }

    #[inline]
    pub(crate) fn beta_unchecked(&self, s: f64) -> f64 {
        self.family.beta(s)
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, s: f64) -> f64 {
        s * self.family.beta(s)
    }

    /// Checks that every value lies in `[0, s_cap]`.
    pub fn check_range(&self, values: &[f64]) -> Result<()> {
        for &s in values {
            self.check_arg(s)?;
        }
        Ok(())
    }

    fn weight(&self) -> impl Fn(f64) -> f64 + '_ {
        move |t: f64| self.family.phi_over_beta(t) / t
    }

    fn h_weight(&self) -> impl Fn(f64) -> f64 + '_ {
        move |t: f64| self.family.phi_over_beta(t)
    }

    fn tables(&self) -> Result<&Potentials> {
        let built = self.tables.get_or_init(|| {
            let smooth = !matches!(self.family, Family::Tabulated(_));
            Potentials::build(
                &self.weight(),
                &self.h_weight(),
                self.s0,
                self.s_cap,
                self.quad_tol,
                smooth,
            )
            .map_err(|e| e.to_string())
        });
        built
            .as_ref()
            .map_err(|msg| Error::InvalidNonlinearity(format!("potential tables: {msg}")))
    }

    /// `G(s)` for `s > 0`.
    pub fn compute_g(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::out_of_range(s, "G is defined for s > 0"));
        }
        self.check_arg(s)?;
        self.tables()?.g(&self.weight(), s)
    }

    /// `G'(s) = ∫_{s0}^{s} φ/ψ`.
    pub fn compute_g_prime(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::out_of_range(s, "G' is defined for s > 0"));
        }
        self.check_arg(s)?;
        self.tables()?.g_prime(&self.weight(), s)
    }

    /// `H(s)` for `s >= 0`.
    pub fn compute_h(&self, s: f64) -> Result<f64> {
        self.check_arg(s)?;
        self.tables()?.h(&self.h_weight(), s)
    }
}

/// `count` points spaced evenly in `log s` on `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = count.saturating_sub(1).max(1) as f64;
    (0..count).map(move |k| {
        if k == 0 {
            lo
        } else if k + 1 == count {
            hi
        } else {
            (a + (b - a) * k as f64 / last).exp()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: Family) -> NonlinearitySpec {
        NonlinearitySpec::new(f).unwrap()
    }

    #[test]
    fn eval_examples() {
        let e = spec(Family::Semilinear).eval(2.0).unwrap();
        assert_eq!((e.phi, e.psi, e.beta), (1.0, 2.0, 1.0));
        let e = spec(Family::PowerLaw { p: 1.0, q: 1.0 }).eval(1.0).unwrap();
        assert_eq!((e.phi, e.psi, e.beta), (0.5, 1.0, 1.0));
        let e = spec(Family::DecayingSensitivity {
            gamma1: 3.5,
            d1: 1.0,
        })
        .eval(0.0)
        .unwrap();
        assert_eq!((e.phi, e.psi, e.beta), (1.0, 0.0, 1.0));
    }

    #[test]
    fn eval_rejects_out_of_range() {
        let s = spec(Family::Semilinear);
        assert!(s.eval(-1e-9).is_err());
        assert!(s.eval(2e12).is_err());
        assert!(s.eval(f64::NAN).is_err());
        assert!(s.compute_g(0.0).is_err());
        assert!(s.compute_h(-1.0).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(NonlinearitySpec::with_settings(Family::Semilinear, 0.0, 1e-10, 1e12).is_err());
        assert!(NonlinearitySpec::new(Family::DiffusionOnly { q_d: 0.5, c_d: 0.0 }).is_err());
        assert!(NonlinearitySpec::new(Family::DecayingSensitivity {
            gamma1: -1.0,
            d1: 1.0
        })
        .is_err());
        // φ underflows to zero inside [0, s_cap]
        assert!(NonlinearitySpec::new(Family::PowerLaw { p: 40.0, q: 1.0 }).is_err());
    }

    #[test]
    fn potentials_vanish_at_anchor_and_origin() {
        for f in [
            Family::Semilinear,
            Family::PowerLaw { p: 0.5, q: 1.0 },
            Family::DiffusionOnly { q_d: 0.5, c_d: 1.0 },
        ] {
            let s = spec(f);
            assert!(s.compute_g(1.0).unwrap().abs() < 1e-15);
            assert!(s.compute_g_prime(1.0).unwrap().abs() < 1e-15);
            assert_eq!(s.compute_h(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn semilinear_closed_forms() {
        let s = spec(Family::Semilinear);
        let e = std::f64::consts::E;
        assert!((s.compute_g(e).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.compute_h(2.0).unwrap() - 2.0).abs() < 1e-12);
        let h = spec(Family::PowerLaw { p: 1.0, q: 1.0 })
            .compute_h(1.0)
            .unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn anchor_shift_changes_g_by_affine_term() {
        // G_{s0'}(s) - G_{s0}(s) is affine in s.
        let a = spec(Family::Semilinear);
        let b = NonlinearitySpec::with_settings(Family::Semilinear, 3.0, 1e-10, 1e12).unwrap();
        let d: Vec<f64> = [0.5, 2.0, 3.5]
            .iter()
            .map(|&x| b.compute_g(x).unwrap() - a.compute_g(x).unwrap())
            .collect();
        let second = d[0] - 2.0 * d[1] + d[2];
        assert!(second.abs() < 1e-10, "{second}");
    }

    #[test]
    fn tables_are_shared_between_clones() {
        let s = spec(Family::Semilinear);
        let t = s.clone();
        s.compute_g(2.0).unwrap();
        assert!(t.tables.get().is_some());
    }

    #[test]
    fn tabulated_semilinear_matches_builtin() {
        let xs: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
        let tab = Tabulation::new(
            MonotoneCubic::new(xs.clone(), vec![1.0; xs.len()]).unwrap(),
            MonotoneCubic::new(xs.clone(), vec![1.0; xs.len()]).unwrap(),
        );
        let t = spec(Family::Tabulated(tab));
        assert_eq!(t.s_cap(), 100.0);
        let b = spec(Family::Semilinear);
        for x in [0.1, 1.0, 7.3, 99.0] {
            let (gt, gb) = (t.compute_g(x).unwrap(), b.compute_g(x).unwrap());
            assert!(
                (gt - gb).abs() <= 1e-9 * gb.abs().max(1e-12),
                "{x}: {gt} {gb}"
            );
        }
        assert!(t.eval(100.5).is_err());
    }
}
