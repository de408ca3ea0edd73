//! Tabulated antiderivatives behind `G` and `H`.
//!
//! The double integral defining `G` collapses to a single one,
//! `G(s) = ∫_{s0}^{s} (s - τ) w(τ) dτ` with `w = φ/ψ`, and `G'(s) = ∫_{s0}^{s} w`.
//! Both are accumulated on a log-spaced node set anchored at `s0`, so every
//! term added while walking away from `s0` is nonnegative and nothing cancels.
//! Between nodes the remaining piece is integrated on demand.

use crate::error::Result;
use crate::quadrature;

/// Nodes per decade.
const PER_DECADE: f64 = 16.0;
/// Lowest tabulated argument, relative to `s0`.
const LOWEST_RATIO: f64 = 1e-30;

#[derive(Debug, Clone)]
pub(crate) struct Potentials {
    s0: f64,
    k_lo: i64,
    x: Vec<f64>,
    g: Vec<f64>,
    gp: Vec<f64>,
    h: Vec<f64>,
    rel_tol: f64,
    smooth: bool,
}

impl Potentials {
    /// `w(τ) = φ/ψ`, `hw(σ) = σ φ/ψ = φ/β`. `smooth` allows a single
    /// Gauss-Legendre pass on sub-node pieces (analytic integrands).
    pub(crate) fn build(
        w: &impl Fn(f64) -> f64,
        hw: &impl Fn(f64) -> f64,
        s0: f64,
        s_cap: f64,
        rel_tol: f64,
        smooth: bool,
    ) -> Result<Self> {
        let k_lo = (PER_DECADE * LOWEST_RATIO.log10()).floor() as i64;
        let k_hi = (PER_DECADE * (s_cap / s0).log10()).ceil() as i64 + 1;
        let x: Vec<f64> = (k_lo..=k_hi)
            .map(|k| {
                if k == 0 {
                    s0
                } else {
                    s0 * 10f64.powf(k as f64 / PER_DECADE)
                }
            })
            .collect();
        let len = x.len();
        let zero = (-k_lo) as usize;
        let mut g = vec![0.0; len];
        let mut gp = vec![0.0; len];

        for j in zero..len - 1 {
            let (a, b) = (x[j], x[j + 1]);
            let i1 = quadrature::integrate(w, a, b, rel_tol, 0.0)?;
            let i2 = quadrature::integrate(&|t| (b - t) * w(t), a, b, rel_tol, 0.0)?;
            gp[j + 1] = gp[j] + i1;
            g[j + 1] = g[j] + (b - a) * gp[j] + i2;
        }
        for j in (1..=zero).rev() {
            let (a, b) = (x[j - 1], x[j]);
            let i1 = quadrature::integrate(w, a, b, rel_tol, 0.0)?;
            let i2 = quadrature::integrate(&|t| (t - a) * w(t), a, b, rel_tol, 0.0)?;
            gp[j - 1] = gp[j] - i1;
            g[j - 1] = g[j] - (b - a) * gp[j] + i2;
        }

        let mut h = vec![0.0; len];
        h[0] = quadrature::integrate(hw, 0.0, x[0], rel_tol, 0.0)?;
        for j in 0..len - 1 {
            h[j + 1] = h[j] + quadrature::integrate(hw, x[j], x[j + 1], rel_tol, 0.0)?;
        }

        Ok(Potentials {
            s0,
            k_lo,
            x,
            g,
            gp,
            h,
            rel_tol,
            smooth,
        })
    }

    fn piece(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if self.smooth && b <= a * 1.2 {
            Ok(quadrature::gauss_legendre(f, a, b))
        } else {
            quadrature::integrate(f, a, b, self.rel_tol, 0.0)
        }
    }

    /// Index `j` with `x[j] <= s < x[j+1]`, clamped to the table.
    fn below(&self, s: f64) -> usize {
        let guess = (PER_DECADE * (s / self.s0).log10()).floor() as i64 - self.k_lo;
        let mut j = guess.clamp(0, self.x.len() as i64 - 2) as usize;
        while j > 0 && self.x[j] > s {
            j -= 1;
        }
        while j + 2 < self.x.len() && self.x[j + 1] <= s {
            j += 1;
        }
        j
    }

    fn zero_index(&self) -> usize {
        (-self.k_lo) as usize
    }

    /// Smallest node index with `x[j] >= s`, for `s < s0`.
    fn at_or_above(&self, s: f64) -> usize {
        if s < self.x[0] {
            return 0;
        }
        let i = self.below(s);
        let j = if self.x[i] >= s { i } else { i + 1 };
        j.min(self.zero_index())
    }

    pub(crate) fn g(&self, w: &impl Fn(f64) -> f64, s: f64) -> Result<f64> {
        if s >= self.s0 {
            let j = self.below(s).max(self.zero_index());
            let a = self.x[j];
            let rest = self.piece(&|t| (s - t) * w(t), a, s)?;
            Ok(self.g[j] + (s - a) * self.gp[j] + rest)
        } else {
            let j = self.at_or_above(s);
            let b = self.x[j];
            let rest = if s < self.x[0] {
                quadrature::integrate(&|t| (t - s) * w(t), s, b, self.rel_tol, 0.0)?
            } else {
                self.piece(&|t| (t - s) * w(t), s, b)?
            };
            Ok(self.g[j] - (b - s) * self.gp[j] + rest)
        }
    }

    pub(crate) fn g_prime(&self, w: &impl Fn(f64) -> f64, s: f64) -> Result<f64> {
        if s >= self.s0 {
            let j = self.below(s).max(self.zero_index());
            Ok(self.gp[j] + self.piece(w, self.x[j], s)?)
        } else {
            let j = self.at_or_above(s);
            let b = self.x[j];
            let rest = if s < self.x[0] {
                quadrature::integrate(w, s, b, self.rel_tol, 0.0)?
            } else {
                self.piece(w, s, b)?
            };
            Ok(self.gp[j] - rest)
        }
    }

    pub(crate) fn h(&self, hw: &impl Fn(f64) -> f64, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if s < self.x[0] {
            return quadrature::integrate(hw, 0.0, s, self.rel_tol, 0.0);
        }
        let j = self.below(s);
        Ok(self.h[j] + self.piece(hw, self.x[j], s)?)
    }
}
