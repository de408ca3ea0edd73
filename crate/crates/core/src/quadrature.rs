//! Adaptive Gauss-Legendre quadrature.

use crate::error::{Error, Result};

// 10-point Gauss-Legendre nodes and weights on [-1, 1], positive half.
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

const MAX_DEPTH: u32 = 60;

/// Fixed 10-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W) {
        acc += w * (f(c - h * x) + f(c + h * x));
    }
    acc * h
}

/// Integrates `f` over `[a, b]` by recursive bisection. A panel is accepted
/// when its 10-point estimate and the sum over its two halves agree within
/// the panel's share of the error budget `max(rel_tol·|I|, abs_tol)`.
pub fn integrate(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = gauss_legendre(f, a, b);
    let tol = (rel_tol * whole.abs()).max(abs_tol);
    let v = refine(f, a, b, whole, tol, 0)?;
    if !v.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    Ok(v)
}

fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    let sum = left + right;
    if (sum - whole).abs() <= tol {
        return Ok(sum);
    }
    if depth >= MAX_DEPTH || !sum.is_finite() || m == a || m == b {
        return Err(Error::Quadrature { a, b });
    }
    let l = refine(f, a, m, left, 0.5 * tol, depth + 1)?;
    let r = refine(f, m, b, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}
