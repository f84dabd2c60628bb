//! Standard normal distribution helpers.
//!
//! `cdf` and `sf` are built on the libm `erfc`, so each keeps full relative accuracy in
//! its own small tail. `cdf(x)` rounds to exactly 1.0 once `x` exceeds about
//! 8.3 (the complement drops below half an ulp of 1); callers that need the
//! upper tail should use `sf` instead.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x). Returns 0 at −∞ and 1 at +∞.
pub fn cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), accurate for large positive x.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Φ⁻¹(p) for p in [0, 1]; the endpoints map to ∓∞.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -quantile(1.0 - p);
    }
    // starting guess, then Halley steps against the erfc-based cdf
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let u = (cdf(x) - p) / pdf(x);
        if !u.is_finite() || u.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Inverse survival function: the x with 1 − Φ(x) = q.
pub fn inv_sf(q: f64) -> f64 {
    -quantile(q)
}

/// Φ(hi) − Φ(lo), evaluated in whichever tail keeps relative precision.
pub fn mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.0 {
        sf(lo) - sf(hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}
