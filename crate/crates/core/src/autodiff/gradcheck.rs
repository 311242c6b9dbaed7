//! Central finite differences for gradient verification.
//!
//! These helpers only call the supplied forward function, so they stay
//! independent of the reverse-mode path they are used to check.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let up = f(&point);
        point[i] = orig - h;
        let down = f(&point);
        point[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Worst relative disagreement between two gradients, with a floor on the
/// denominator so coordinates below finite-difference resolution are
/// compared absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
