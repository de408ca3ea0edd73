//! Closed forms shared by the integration tests.

/// `G` for φ ≡ 1, ψ = s: `s ln(s/s0) - s + s0`.
pub fn g_semilinear(s: f64, s0: f64) -> f64 {
    s * (s / s0).ln() - s + s0
}

/// p = 1, q = 1: w = 1/(τ(τ+1)), antiderivative of `ln(σ/(σ+1))` is
/// `σ ln σ - (σ+1) ln(σ+1)`.
pub fn g_power_1_1(s: f64, s0: f64) -> f64 {
    let prim = |x: f64| x * x.ln() - (x + 1.0) * (x + 1.0).ln();
    let l0 = (s0 / (s0 + 1.0)).ln();
    prim(s) - prim(s0) - (s - s0) * l0
}

/// p = 1/2, q = 1: w = (τ+1)^{-1/2}/τ, `∫ w = L(τ) = ln((√(τ+1)-1)/(√(τ+1)+1))`,
/// `∫ L = σ L(σ) - 2√(σ+1)`.
pub fn g_power_half_1(s: f64, s0: f64) -> f64 {
    let l = |x: f64| {
        let r = (x + 1.0).sqrt();
        // (r-1)/(r+1) = x/(r+1)^2 without cancellation
        (x / ((r + 1.0) * (r + 1.0))).ln()
    };
    let prim = |x: f64| x * l(x) - 2.0 * (x + 1.0).sqrt();
    prim(s) - prim(s0) - (s - s0) * l(s0)
}
