//! Bracketing bisection.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;

/// Root of `f` on [lo, hi] by bisection on the sign of `f`.
///
/// Requires f(lo) and f(hi) of opposite sign (a zero endpoint is returned as
/// is). Stops once the bracket is at most `abs_tol` wide, when the midpoint
/// can no longer be separated from an endpoint, or after `MAX_ITER` steps,
/// and returns the bracket end with the smaller |f|.
pub fn bisect(what: &'static str, f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, abs_tol: f64) -> Result<f64> {
    let (a, fa, b, fb) = bisect_bracket(what, f, lo, hi, abs_tol)?;
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Final bracket (a, f(a), b, f(b)) of the bisection in `bisect`; a = b on an exact zero.
pub fn bisect_bracket(what: &'static str, mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64, abs_tol: f64) -> Result<(f64, f64, f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok((a, fa, a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb, b, fb));
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::BracketFailure { what, lo, hi, f_lo: fa, f_hi: fb });
    }
    for _ in 0..MAX_ITER {
        if b - a <= abs_tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok((m, fm, m, fm));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Ok((a, fa, b, fb))
}

/// Widens [lo, hi] geometrically (lo/hi by `factor`, both positive) until `f`
/// changes sign, up to `max_steps` widenings.
pub fn expand_positive(
    what: &'static str,
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    factor: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    for _ in 0..max_steps {
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi));
        }
        // move the end whose value is closer to zero further out
        if flo.abs() < fhi.abs() {
            lo /= factor;
            flo = f(lo)?;
        } else {
            hi *= factor;
            fhi = f(hi)?;
        }
    }
    if flo.signum() != fhi.signum() {
        return Ok((lo, hi));
    }
    Err(Error::BracketFailure { what, lo, hi, f_lo: flo, f_hi: fhi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = bisect("t", |x| Ok(x * x - 2.0), 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn rejects_same_sign() {
        assert!(matches!(bisect("t", |x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12), Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn expands() {
        let (lo, hi) = expand_positive("t", |x| Ok(1.0 / x - 1e6), 1.0, 2.0, 10.0, 20).unwrap();
        assert!(lo <= 1e-6 && hi >= 1e-6);
    }
}
