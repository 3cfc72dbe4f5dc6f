use super::Matrix;
use crate::error::{Error, Result};

/// Compares an analytic gradient against central finite differences.
///
/// `f` returns the scalar value and its analytic gradient at the given point.
/// The result is the maximum over entries of
/// `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, x: &Matrix, h: f64) -> Result<f64>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    let (value, analytic) = f(x)?;
    if !value.is_finite() || !analytic.is_finite() {
        return Err(Error::NonFinite("grad_check"));
    }
    if analytic.shape() != x.shape() {
        return Err(Error::Shape {
            op: "grad_check",
            left: x.shape(),
            right: analytic.shape(),
        });
    }
    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for i in 0..x.as_slice().len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let (up, _) = f(&probe)?;
        probe.as_mut_slice()[i] = orig - h;
        let (down, _) = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("grad_check"));
        }
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.as_slice()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
