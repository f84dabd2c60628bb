//! λ̂, the minimum-cost function R, the ineffective threshold C, and the
//! regime classification.

use crate::error::Result;
use crate::kernel::LogNormal;
use crate::quantile::{PiecewiseQuantile, Segment};
use crate::roots::{bisect, bisect_bracket, expand_positive};
use crate::utility::Utility;
use serde::{Deserialize, Serialize};

/// Bisection tolerance on multipliers.
pub const MULTIPLIER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    Infeasible,
    UniqueTwoPoint,
    IneffectiveTVaR,
    EffectiveTVaR,
}

impl RegimeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeTag::Infeasible => "Infeasible",
            RegimeTag::UniqueTwoPoint => "UniqueTwoPoint",
            RegimeTag::IneffectiveTVaR => "IneffectiveTVaR",
            RegimeTag::EffectiveTVaR => "EffectiveTVaR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub r_value: f64,
    pub c_value: f64,
    pub lambda_hat: f64,
    /// None when z̲ = 0 (λ̲ = ∞ by convention).
    pub lambda_under: Option<f64>,
}

/// η(λ) = −E[ρ 1{ρ ≤ λ/α}] + λ(α − 1 + F(λ/α))/α, written as
/// λ − E[ρ] + E[(ρ − λ/α)⁺] to keep its sign exact near λ = E[ρ].
pub fn eta(law: &LogNormal, alpha: f64, lam: f64) -> f64 {
    let c = lam / alpha;
    let call = law.partial_power(1.0, c, f64::INFINITY) - c * law.sf(c);
    lam - law.mean() + call.max(0.0)
}

/// ζ(λ) = E[ρ 1{ρ ≤ λ/α}] / (α − 1 + F(λ/α)), defined for λ > αF⁻¹(1 − α).
pub fn zeta(law: &LogNormal, alpha: f64, lam: f64) -> f64 {
    let c = lam / alpha;
    law.partial_power(1.0, 0.0, c) / (alpha - law.sf(c))
}

/// Unique root of η on (αF⁻¹(1 − α), E[ρ]).
pub fn solve_lambda_hat(law: &LogNormal, alpha: f64) -> Result<f64> {
    let lo = alpha * law.inv_sf(alpha);
    let hi = law.mean();
    // η(E[ρ]) is a call price far out of the money and can sit below an ulp
    // of λ; keep the side where η < 0 so λ̂ stays strictly inside the bracket.
    let (a, _, b, fb) = bisect_bracket("lambda_hat", |l| Ok(eta(law, alpha, l)), lo, hi, 0.0)?;
    Ok(if b < hi && fb.abs() < eta(law, alpha, a).abs() { b } else { a })
}

pub fn min_cost_r(lambda_hat: f64, z_under: f64) -> f64 {
    lambda_hat * z_under
}

/// G* = 0 for ρ ≥ λ̂/α and αz̲/(α − 1 + F(λ̂/α)) below.
pub fn two_point_quantile<U: Utility>(law: &LogNormal, util: U, ell: f64, alpha: f64, lambda_hat: f64, z_under: f64) -> PiecewiseQuantile<U> {
    if z_under == 0.0 {
        return PiecewiseQuantile::zero(*law, util, ell);
    }
    let cut = lambda_hat / alpha;
    let level = alpha * z_under / (alpha - law.sf(cut));
    PiecewiseQuantile::new(*law, util, ell, &[Segment::Zero, Segment::Flat(level)], &[cut]).expect("valid two-point quantile")
}

/// ((U′)⁻¹(νρ) − ℓ)⁺ as a quantile.
pub fn merton_with_floor<U: Utility>(law: &LogNormal, util: U, ell: f64, nu: f64) -> PiecewiseQuantile<U> {
    let cut = util.u_prime(ell) / nu;
    if cut.is_infinite() {
        PiecewiseQuantile::new(*law, util, ell, &[Segment::Merton { nu }], &[]).expect("single segment")
    } else {
        PiecewiseQuantile::new(*law, util, ell, &[Segment::Zero, Segment::Merton { nu }], &[cut]).expect("valid cut")
    }
}

/// Root in ν of a decreasing map `value(ν) − target`, bracketed from [1e−8, 1e8].
pub(crate) fn solve_decreasing(what: &'static str, target: f64, value: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = |nu: f64| Ok(value(nu)? - target);
    let (lo, hi) = expand_positive(what, h, 1e-8, 1e8, 1e4, 20)?;
    // geometric pre-bisection so the absolute tolerance is met on any scale
    let (mut a, mut b) = (lo, hi);
    while b / a > 4.0 {
        let m = (a * b).sqrt();
        if h(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    bisect(what, h, a, b, MULTIPLIER_TOL)
}

/// λ̲: the multiplier whose floored Merton quantile has TVaR z̲.
pub fn solve_lambda_under<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, z_under: f64) -> Result<f64> {
    solve_decreasing("lambda_under", z_under, |nu| merton_with_floor(law, util, ell, nu).tvar_g(alpha))
}

/// C(z̲) = E[ρ((U′)⁻¹(λ̲ρ) − ℓ)⁺].
pub fn cost_c<U: Utility>(law: &LogNormal, util: U, ell: f64, lambda_under: f64) -> Result<f64> {
    merton_with_floor(law, util, ell, lambda_under).budget_f()
}

pub fn tie_tolerance(z_bar: f64) -> f64 {
    1e-9 * z_bar.abs().max(1.0)
}

pub fn classify(z_bar: f64, z_under: f64, r_value: f64, c_value: f64) -> RegimeTag {
    if z_under > 0.0 && (z_bar - r_value).abs() <= tie_tolerance(z_bar) {
        RegimeTag::UniqueTwoPoint
    } else if z_bar < r_value {
        RegimeTag::Infeasible
    } else if z_under == 0.0 {
        if z_bar == 0.0 {
            RegimeTag::UniqueTwoPoint
        } else {
            RegimeTag::IneffectiveTVaR
        }
    } else if z_bar >= c_value {
        RegimeTag::IneffectiveTVaR
    } else {
        RegimeTag::EffectiveTVaR
    }
}

/// Computes λ̂, R, λ̲ and C, and classifies the problem.
pub fn assess<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, z_bar: f64, z_under: f64) -> Result<Regime> {
    let lambda_hat = solve_lambda_hat(law, alpha)?;
    let r_value = min_cost_r(lambda_hat, z_under);
    let (lambda_under, c_value) = if z_under > 0.0 {
        let lu = solve_lambda_under(law, util, alpha, ell, z_under)?;
        (Some(lu), cost_c(law, util, ell, lu)?)
    } else {
        (None, 0.0)
    };
    Ok(Regime { tag: classify(z_bar, z_under, r_value, c_value), r_value, c_value, lambda_hat, lambda_under })
}
