//! Lognormal law of the pricing kernel.
//!
//! ρ(t) = exp(−r0 t − ½‖ξ‖² t − ξᵀW(t)), so ln ρ(T) given ρ(t) is normal with
//! mean ln ρ(t) − (r0 + ½‖ξ‖²)(T − t) and variance ‖ξ‖²(T − t).

use crate::error::{Error, Result};
use crate::normal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelLaw {
    pub r0: f64,
    pub xi_norm_sq: f64,
    pub horizon: f64,
}

/// A lognormal variable with ln X ~ N(mu, sigma²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl KernelLaw {
    pub fn new(r0: f64, xi_norm_sq: f64, horizon: f64) -> Result<Self> {
        if !(xi_norm_sq > 0.0) || !xi_norm_sq.is_finite() {
            return Err(Error::InvalidParameter { field: "xi", reason: format!("|xi|^2 must be positive, got {xi_norm_sq}") });
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter { field: "T", reason: format!("horizon must be positive, got {horizon}") });
        }
        Ok(KernelLaw { r0, xi_norm_sq, horizon })
    }

    pub fn m(&self) -> f64 {
        -(self.r0 + 0.5 * self.xi_norm_sq) * self.horizon
    }

    pub fn s(&self) -> f64 {
        (self.xi_norm_sq * self.horizon).sqrt()
    }

    /// Law of ρ(T) seen from time 0.
    pub fn terminal(&self) -> LogNormal {
        LogNormal { mu: self.m(), sigma: self.s() }
    }

    /// Law of ρ(T) given ρ(t) = rho_t, for 0 ≤ t < T.
    pub fn conditional(&self, t: f64, rho_t: f64) -> Result<LogNormal> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::Domain(format!("t = {t} outside [0, T)")));
        }
        if !(rho_t > 0.0) {
            return Err(Error::Domain(format!("rho_t = {rho_t} must be positive")));
        }
        let tau = self.horizon - t;
        Ok(LogNormal { mu: rho_t.ln() - (self.r0 + 0.5 * self.xi_norm_sq) * tau, sigma: (self.xi_norm_sq * tau).sqrt() })
    }

    /// E[ρ(T)] = e^{−r0 T}.
    pub fn mean(&self) -> f64 {
        (-self.r0 * self.horizon).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("cdf argument {x} must be positive")));
        }
        Ok(self.terminal().cdf(x))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
        }
        Ok(self.terminal().quantile(p))
    }

    /// E[ρ(T)^p 1{a < ρ(T) ≤ b} | ρ(t) = rho_t].
    pub fn partial_power(&self, t: f64, rho_t: f64, p: f64, a: f64, b: f64) -> Result<f64> {
        check_band(a, b)?;
        Ok(self.conditional(t, rho_t)?.partial_power(p, a, b))
    }

    /// ∂/∂rho_t of `partial_power`.
    pub fn partial_power_drho(&self, t: f64, rho_t: f64, p: f64, a: f64, b: f64) -> Result<f64> {
        check_band(a, b)?;
        Ok(self.conditional(t, rho_t)?.partial_power_dmu(p, a, b) / rho_t)
    }
}

fn check_band(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && a < b) {
        return Err(Error::Domain(format!("band ({a}, {b}] is empty or negative")));
    }
    Ok(())
}

fn ln_ext(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

impl LogNormal {
    /// Normal score of a kernel value: (ln x − mu)/sigma, with 0 ↦ −∞ and ∞ ↦ ∞.
    pub fn score(&self, x: f64) -> f64 {
        (ln_ext(x) - self.mu) / self.sigma
    }

    pub fn at_score(&self, u: f64) -> f64 {
        (self.mu + self.sigma * u).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal::cdf(self.score(x))
    }

    /// P(X > x).
    pub fn sf(&self, x: f64) -> f64 {
        normal::sf(self.score(x))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.at_score(normal::quantile(p))
    }

    /// The x with P(X > x) = q; accurate for small q.
    pub fn inv_sf(&self, q: f64) -> f64 {
        self.at_score(normal::inv_sf(q))
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    /// P(a < X ≤ b).
    pub fn band_probability(&self, a: f64, b: f64) -> f64 {
        normal::mass(self.score(a), self.score(b))
    }

    /// E[X^p 1{a < X ≤ b}].
    pub fn partial_power(&self, p: f64, a: f64, b: f64) -> f64 {
        let (scale, ba, bb) = self.power_terms(p, a, b);
        if scale == 0.0 {
            return 0.0;
        }
        scale * normal::mass(ba, bb)
    }

    /// ∂/∂mu of `partial_power`; divide by the conditioning value to get ∂/∂ρ(t).
    pub fn partial_power_dmu(&self, p: f64, a: f64, b: f64) -> f64 {
        let (scale, ba, bb) = self.power_terms(p, a, b);
        if scale == 0.0 {
            return 0.0;
        }
        let edge = |x: f64| if x.is_finite() { normal::pdf(x) } else { 0.0 };
        scale * (p * normal::mass(ba, bb) + (edge(ba) - edge(bb)) / self.sigma)
    }

    fn power_terms(&self, p: f64, a: f64, b: f64) -> (f64, f64, f64) {
        let s2 = self.sigma * self.sigma;
        let shift = self.mu + p * s2;
        let ba = (ln_ext(a) - shift) / self.sigma;
        let bb = (ln_ext(b) - shift) / self.sigma;
        ((p * self.mu + 0.5 * p * p * s2).exp(), ba, bb)
    }
}
