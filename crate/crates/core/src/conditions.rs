//! Sampled certification of the structural hypotheses on `(φ, ψ)` and the
//! regime classification built on them.
//!
//! A "yes" means the inequality held at every sample of a log-spaced set and
//! the tail of the set shows the trend the hypothesis needs. It is evidence,
//! not proof: the hypotheses quantify over all `s > 0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::format::format_number;
use crate::nonlinearity::{log_space, Family, NonlinearitySpec};

pub const DEFAULT_SAMPLES: usize = 400;
const RANGE_TOP: f64 = 1e9;
/// Relative safety factor applied to fitted suprema.
const SAFETY: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    G1,
    H1,
    Psi,
    Balance,
    Decay,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::G1 => "G1",
            Condition::H1 => "H1",
            Condition::Psi => "PSI",
            Condition::Balance => "BALANCE",
            Condition::Decay => "DECAY",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holds {
    Yes,
    No,
    Undetermined,
}

impl fmt::Display for Holds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Holds::Yes => "yes",
            Holds::No => "no",
            Holds::Undetermined => "undetermined",
        })
    }
}

/// `count` log-spaced samples on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl SampleRange {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Analysis(format!(
                "sample range needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if count < 2 {
            return Err(Error::Analysis(format!(
                "sample range needs at least 2 points, got {count}"
            )));
        }
        Ok(SampleRange { lo, hi, count })
    }

    /// `[max(1e-6, s0·1e-3), 1e9]` with 400 points, cut at `s_cap`.
    pub fn default_for(spec: &NonlinearitySpec) -> Self {
        SampleRange {
            lo: (spec.s0() * 1e-3).max(1e-6),
            hi: RANGE_TOP.min(spec.s_cap()),
            count: DEFAULT_SAMPLES,
        }
    }

    /// `[s0, 1e9]` with 400 points, cut at `s_cap`.
    pub fn default_g1(spec: &NonlinearitySpec) -> Self {
        SampleRange {
            lo: spec.s0(),
            hi: RANGE_TOP.min(spec.s_cap()),
            count: DEFAULT_SAMPLES,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        log_space(self.lo, self.hi, self.count).collect()
    }

    pub fn densified(&self, factor: usize) -> Self {
        SampleRange {
            count: (self.count - 1) * factor + 1,
            ..*self
        }
    }

    fn check_within(&self, spec: &NonlinearitySpec) -> Result<()> {
        if self.hi > spec.s_cap() {
            return Err(Error::Analysis(format!(
                "sample range top {} exceeds s_cap = {}",
                self.hi,
                spec.s_cap()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: Holds,
    /// Fitted constants by name.
    pub witness: Vec<(&'static str, f64)>,
    /// Worst-case slack over the samples; the definition per condition is in `note`.
    pub margin: f64,
    pub range: SampleRange,
    pub note: String,
}

impl ConditionReport {
    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witness
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
    }

    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        let mut out = format!("condition = {}\nholds = {}\n", self.condition, self.holds);
        for (k, v) in &self.witness {
            out.push_str(&format!("witness.{k} = {}\n", format_number(*v)));
        }
        out.push_str(&format!(
            "margin = {}\nrange.lo = {}\nrange.hi = {}\nrange.count = {}\nnote = {}\n",
            format_number(self.margin),
            format_number(self.range.lo),
            format_number(self.range.hi),
            self.range.count,
            self.note
        ));
        out
    }
}

/// Least-squares slope of `log val` against `log s` over the last decade.
fn tail_slope(s: &[f64], val: &[f64]) -> f64 {
    let top = *s.last().unwrap();
    let idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= top / 10.0).collect();
    let m = idx.len() as f64;
    let xm = idx.iter().map(|&i| s[i].ln()).sum::<f64>() / m;
    let ym = idx.iter().map(|&i| val[i].ln()).sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for &i in &idx {
        let dx = s[i].ln() - xm;
        num += dx * (val[i].ln() - ym);
        den += dx * dx;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Whether `val` is non-increasing over the last decade up to relative `tol`.
fn tail_non_increasing(s: &[f64], val: &[f64], tol: f64) -> bool {
    let top = *s.last().unwrap();
    (1..s.len())
        .filter(|&i| s[i - 1] >= top / 10.0)
        .all(|i| val[i] <= val[i - 1] * (1.0 + tol) + tol)
}

/// Sup of `f` over the samples, refined by golden-section search in `log s`
/// around the sampled maximiser.
fn refined_sup(s: &[f64], val: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let k = (0..val.len()).fold(0, |b, i| if val[i] > val[b] { i } else { b });
    let mut best = val[k];
    if k == 0 || k + 1 == s.len() {
        return Ok(best);
    }
    let (mut a, mut b) = (s[k - 1].ln(), s[k + 1].ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c.exp())?, f(d.exp())?);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d.exp())?;
        }
        best = best.max(fc).max(fd);
    }
    Ok(best)
}

fn sample<T>(range: &SampleRange, f: impl Fn(f64) -> Result<T>) -> Result<(Vec<f64>, Vec<T>)> {
    let s = range.points();
    let v = s.iter().map(|&x| f(x)).collect::<Result<Vec<T>>>()?;
    Ok((s, v))
}

fn require_samples(range: &SampleRange, min: usize) -> Result<()> {
    if range.count < min {
        return Err(Error::Analysis(format!(
            "need at least {min} samples, got {}",
            range.count
        )));
    }
    Ok(())
}

/// `G(s) ≤ a s^{2−α}` on `range ⊂ [s0, s_cap]`, with `α > 2/n`.
pub fn check_g1(
    spec: &NonlinearitySpec,
    alpha: f64,
    n: usize,
    range: &SampleRange,
) -> Result<ConditionReport> {
    let lower = 2.0 / n as f64;
    if !(alpha > lower) {
        return Err(Error::Hypothesis(format!(
            "G1 needs alpha > 2/n = {lower}, got {alpha}"
        )));
    }
    range.check_within(spec)?;
    require_samples(range, 200)?;
    if range.lo < spec.s0() {
        return Err(Error::Analysis(format!(
            "G1 range must start at or above s0 = {}, got {}",
            spec.s0(),
            range.lo
        )));
    }
    let expo = 2.0 - alpha;
    let ratio = |x: f64| Ok(spec.compute_g(x)? / x.powf(expo));
    let (s, val) = sample(range, ratio)?;
    let a = refined_sup(&s, &val, ratio)? * (1.0 + SAFETY);
    let tol = 10.0 * spec.quad_tol();
    let margin = s
        .iter()
        .zip(&val)
        .map(|(x, r)| (a - r) * x.powf(expo))
        .fold(f64::INFINITY, f64::min);
    let slope = tail_slope(&s, &val);
    let holds = if a.is_finite() && tail_non_increasing(&s, &val, tol) {
        Holds::Yes
    } else if slope > 0.01 {
        Holds::No
    } else {
        Holds::Undetermined
    };
    Ok(ConditionReport {
        condition: Condition::G1,
        holds,
        witness: vec![("a", a), ("alpha", alpha), ("tail_slope", slope)],
        margin,
        range: *range,
        note: "margin = min a s^(2-alpha) - G(s); yes needs a non-increasing tail ratio over the last decade".into(),
    })
}

/// `H(s) ≤ γ G(s) + b (s + 1)` with `γ ∈ (0, (n−2)/n)`.
pub fn check_h1(
    spec: &NonlinearitySpec,
    gamma: f64,
    b: f64,
    n: usize,
    range: &SampleRange,
) -> Result<ConditionReport> {
    if n <= 2 {
        return Err(Error::Hypothesis(format!(
            "H1 needs n >= 3 (gamma interval (0, (n-2)/n) is empty), got n = {n}"
        )));
    }
    let upper = (n as f64 - 2.0) / n as f64;
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::Hypothesis(format!(
            "H1 needs gamma in (0, (n-2)/n) = (0, {upper}), got {gamma}"
        )));
    }
    if !(b > 0.0) {
        return Err(Error::Hypothesis(format!("H1 needs b > 0, got {b}")));
    }
    range.check_within(spec)?;
    let slack = |x: f64| -> Result<(f64, f64)> {
        let rhs = gamma * spec.compute_g(x)? + b * (x + 1.0);
        Ok((rhs - spec.compute_h(x)?, rhs))
    };
    let (_, val) = sample(range, slack)?;
    let margin = val.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tol = val
        .iter()
        .map(|p| 2.0 * spec.quad_tol() * p.1.abs())
        .fold(0.0, f64::max);
    let holds = if margin > 0.0 {
        Holds::Yes
    } else if margin < -tol {
        Holds::No
    } else {
        Holds::Undetermined
    };
    Ok(ConditionReport {
        condition: Condition::H1,
        holds,
        witness: vec![("gamma", gamma), ("b", b)],
        margin,
        range: *range,
        note: "margin = min gamma G(s) + b(s+1) - H(s)".into(),
    })
}

/// `ψ(s) ≥ c0 s`, i.e. `β` bounded below.
pub fn check_psi_lower(spec: &NonlinearitySpec, range: &SampleRange) -> Result<ConditionReport> {
    range.check_within(spec)?;
    let (s, beta) = sample(range, |x| Ok(spec.eval(x)?.beta))?;
    let c0 = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let slope = tail_slope(&s, &beta);
    let tol = 10.0 * spec.quad_tol();
    let holds = if c0 > 0.0 && slope >= -tol {
        Holds::Yes
    } else if slope < -0.01 {
        Holds::No
    } else {
        Holds::Undetermined
    };
    Ok(ConditionReport {
        condition: Condition::Psi,
        holds,
        witness: vec![("c0", c0)],
        margin: slope,
        range: *range,
        note: "margin = log-log slope of beta over the last decade; a decaying tail drives inf beta to 0".into(),
    })
}

/// `β/φ ≤ D`.
pub fn check_balance(spec: &NonlinearitySpec, range: &SampleRange) -> Result<ConditionReport> {
    range.check_within(spec)?;
    let ratio = |x: f64| {
        let e = spec.eval(x)?;
        if !(e.phi > 0.0) {
            return Err(Error::InvalidNonlinearity(format!(
                "phi vanishes at s = {x}"
            )));
        }
        Ok(e.beta / e.phi)
    };
    let (s, val) = sample(range, ratio)?;
    let d = refined_sup(&s, &val, ratio)? * (1.0 + SAFETY);
    let slope = tail_slope(&s, &val);
    let tol = 10.0 * spec.quad_tol();
    let holds = if d.is_finite() && tail_non_increasing(&s, &val, tol) {
        Holds::Yes
    } else if slope > 0.01 {
        Holds::No
    } else {
        Holds::Undetermined
    };
    Ok(ConditionReport {
        condition: Condition::Balance,
        holds,
        witness: vec![("D", d)],
        margin: -slope,
        range: *range,
        note: "margin = minus the log-log slope of beta/phi over the last decade".into(),
    })
}

/// `β(s) ≤ D1 s^{−γ1}` with `γ1 > n`; `γ1` is the negative tail slope of `β`.
pub fn check_decay(
    spec: &NonlinearitySpec,
    n: usize,
    range: &SampleRange,
) -> Result<ConditionReport> {
    range.check_within(spec)?;
    let (s, beta) = sample(range, |x| Ok(spec.eval(x)?.beta))?;
    let gamma1 = -tail_slope(&s, &beta);
    let scaled = |x: f64| Ok(spec.eval(x)?.beta * x.powf(gamma1));
    let val: Vec<f64> = s
        .iter()
        .zip(&beta)
        .map(|(x, b)| b * x.powf(gamma1))
        .collect();
    let d1 = refined_sup(&s, &val, scaled)? * (1.0 + SAFETY);
    let margin = gamma1 - n as f64;
    let holds = if margin > 0.0 && d1.is_finite() {
        Holds::Yes
    } else {
        Holds::No
    };
    Ok(ConditionReport {
        condition: Condition::Decay,
        holds,
        witness: vec![("D1", d1), ("gamma1", gamma1)],
        margin,
        range: *range,
        note: "margin = fitted gamma1 - n".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    FiniteTimeBlowupHypotheses,
    InfiniteTimeCandidate,
    BoundednessRegime,
    Undetermined,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::FiniteTimeBlowupHypotheses => "FiniteTimeBlowupHypotheses",
            Regime::InfiniteTimeCandidate => "InfiniteTimeCandidate",
            Regime::BoundednessRegime => "BoundednessRegime",
            Regime::Undetermined => "Undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub regime: Regime,
    /// The reports the decision rests on, G1 and H1 at the searched parameters.
    pub reports: Vec<ConditionReport>,
}

impl Classification {
    pub fn report(&self, c: Condition) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition == c)
    }
}

/// First `α` on the grid `2/n + 0.01 k` below 2 at which G1 certifies, or the
/// last report when none does.
pub fn search_g1(spec: &NonlinearitySpec, n: usize) -> Result<ConditionReport> {
    let range = SampleRange::default_g1(spec);
    let start = 2.0 / n as f64;
    let mut last = None;
    for k in 1.. {
        let alpha = start + 0.01 * k as f64;
        if alpha >= 2.0 {
            break;
        }
        let report = check_g1(spec, alpha, n, &range)?;
        if report.holds == Holds::Yes {
            return Ok(report);
        }
        last = Some(report);
    }
    last.ok_or_else(|| Error::Analysis(format!("empty alpha grid for n = {n}")))
}

/// H1 at the midpoint `γ` of `(0, (n−2)/n)` with `b` doubled from 1.
pub fn search_h1(spec: &NonlinearitySpec, n: usize) -> Result<ConditionReport> {
    let range = SampleRange::default_for(spec);
    let gamma = 0.5 * (n as f64 - 2.0) / n as f64;
    let mut b = 1.0;
    let mut report = check_h1(spec, gamma, b, n, &range)?;
    for _ in 0..40 {
        if report.holds == Holds::Yes {
            break;
        }
        b *= 2.0;
        report = check_h1(spec, gamma, b, n, &range)?;
    }
    Ok(report)
}

/// Which blowup or boundedness regime the nonlinearity falls in, by sampled certification.
pub fn classify_regime(spec: &NonlinearitySpec, n: usize) -> Result<Classification> {
    if n < 2 {
        return Err(Error::Hypothesis(format!(
            "classification needs n >= 2, got {n}"
        )));
    }
    let range = SampleRange::default_for(spec);
    let mut reports = Vec::new();
    let (g1, h1) = if n >= 3 {
        let g1 = search_g1(spec, n)?;
        let h1 = search_h1(spec, n)?;
        reports.push(g1.clone());
        reports.push(h1.clone());
        (g1.holds == Holds::Yes, h1.holds == Holds::Yes)
    } else {
        (false, false)
    };
    let psi = check_psi_lower(spec, &range)?;
    let balance = check_balance(spec, &range)?;
    let decay = check_decay(spec, n, &range)?;
    let (s, phi) = sample(&range, |x| Ok(spec.eval(x)?.phi))?;
    let phi_decays = tail_slope(&s, &phi) < -0.01;
    let yes = |r: &ConditionReport| r.holds == Holds::Yes;

    let regime = if n >= 3 && g1 && h1 && yes(&psi) {
        Regime::FiniteTimeBlowupHypotheses
    } else if n >= 3 && g1 && h1 && yes(&balance) && yes(&decay) && phi_decays {
        Regime::InfiniteTimeCandidate
    } else if matches!(spec.family(), Family::DiffusionOnly { q_d, .. } if *q_d > 1.0 - 2.0 / n as f64)
    {
        Regime::BoundednessRegime
    } else {
        Regime::Undetermined
    };
    reports.extend([psi, balance, decay]);
    Ok(Classification { regime, reports })
}
