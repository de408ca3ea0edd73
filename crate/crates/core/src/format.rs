//! Shortest round-trip decimal text for floats.

/// Plain decimal for moderate magnitudes, scientific otherwise. Both forms
/// parse back to the identical `f64`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
