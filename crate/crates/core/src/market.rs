//! Market and pension parameters, the market price of risk, and the annuity
//! factors D(t) (future contributions) and L(t) (guaranteed living standard).

use crate::error::{Error, Result};
use crate::kernel::KernelLaw;
use serde::{Deserialize, Serialize};

const BETA_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Real rate of the inflation-linked bond over inflation.
    pub r: f64,
    pub r0: f64,
    pub mu_i: f64,
    pub sigma_i: f64,
    pub mu_s: f64,
    pub sigma_s: f64,
    pub rho_is: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub rho_iy: f64,
    pub mu_a: f64,
    pub sigma_a: f64,
    pub rho_ia: f64,
    /// Retirement time T.
    pub horizon: f64,
    /// Death time T′.
    pub death: f64,
    #[serde(default)]
    pub xi_override: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PensionParams {
    pub c: f64,
    pub y0: f64,
    pub a0: f64,
    pub x0: f64,
    pub ell: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub gamma: f64,
}

/// Validated market with its market price of risk.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub params: MarketParams,
    pub xi: [f64; 2],
    /// Messages about inconsistent inputs (e.g. an override that disagrees
    /// with the drifts).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurplusBudget {
    pub d0: f64,
    pub ell0: f64,
    pub z0: f64,
    pub z_bar: f64,
    pub z_under: f64,
    pub beta_d: f64,
    pub beta_l: f64,
    pub sigma_d: [f64; 2],
    pub sigma_l: [f64; 2],
}

impl SurplusBudget {
    /// z̄ = 0 with no TVaR requirement: Z(T) ≡ ℓ is the only feasible choice.
    pub fn is_degenerate(&self) -> bool {
        self.z_bar == 0.0 && self.z_under == 0.0
    }
}

/// Budgets within this relative distance of zero are snapped to zero, so a
/// back-solved x0 does not fail on rounding.
const ZERO_BUDGET_SLACK: f64 = 1e-12;

fn snap_zero(z_bar: f64, z0: f64) -> f64 {
    if z_bar.abs() <= ZERO_BUDGET_SLACK * z0.abs().max(1.0) {
        0.0
    } else {
        z_bar
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [("r", self.r), ("r0", self.r0), ("mu_i", self.mu_i), ("mu_s", self.mu_s), ("mu_y", self.mu_y), ("mu_a", self.mu_a)];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        if !(self.sigma_i > 0.0) {
            return Err(invalid("sigma_i", "must be > 0"));
        }
        if !(self.sigma_s > 0.0) {
            return Err(invalid("sigma_s", "must be > 0"));
        }
        if !(self.sigma_y > 0.0) {
            return Err(invalid("sigma_y", "must be > 0"));
        }
        if !(self.sigma_a >= 0.0) {
            return Err(invalid("sigma_a", "must be >= 0"));
        }
        if !(self.mu_a >= 0.0) {
            return Err(invalid("mu_a", "must be >= 0"));
        }
        if !(self.rho_is.abs() < 1.0) {
            return Err(invalid("rho_is", "must satisfy |rho_is| < 1"));
        }
        if !(self.rho_iy.abs() <= 1.0) {
            return Err(invalid("rho_iy", "must satisfy |rho_iy| <= 1"));
        }
        if !(self.rho_ia.abs() <= 1.0) {
            return Err(invalid("rho_ia", "must satisfy |rho_ia| <= 1"));
        }
        if !(self.horizon > 0.0 && self.horizon < self.death) {
            return Err(invalid("horizon", "require 0 < T < T'"));
        }
        if let Some(xi) = self.xi_override {
            if !(xi[0].is_finite() && xi[1].is_finite()) || xi[0] * xi[0] + xi[1] * xi[1] == 0.0 {
                return Err(invalid("xi_override", "must be a finite, nonzero pair"));
            }
        }
        Ok(())
    }

    /// Rows are the inflation-linked bond and the stock.
    pub fn sigma(&self) -> [[f64; 2]; 2] {
        [[self.sigma_i, 0.0], [self.sigma_s * self.rho_is, self.sigma_s * (1.0 - self.rho_is * self.rho_is).sqrt()]]
    }

    pub fn sigma_d(&self) -> [f64; 2] {
        [self.sigma_y * self.rho_iy, self.sigma_y * (1.0 - self.rho_iy * self.rho_iy).sqrt()]
    }

    pub fn sigma_l(&self) -> [f64; 2] {
        [self.sigma_a * self.rho_ia, self.sigma_a * (1.0 - self.rho_ia * self.rho_ia).sqrt()]
    }
}

/// Market price of risk implied by the drifts, ignoring any override.
pub fn implied_xi(p: &MarketParams) -> Result<[f64; 2]> {
    let kappa_i = (p.r + p.mu_i - p.r0) / p.sigma_i;
    let kappa_s = (p.mu_s - p.r0) / p.sigma_s;
    if !(kappa_i > 0.0 && kappa_s > 0.0) {
        return Err(Error::NonPositivePremium { kappa_i, kappa_s });
    }
    let xi2 = (kappa_s - p.rho_is * kappa_i) / (1.0 - p.rho_is * p.rho_is).sqrt();
    Ok([kappa_i, xi2])
}

/// The market price of risk in use and any warnings about it.
pub fn derive_xi(p: &MarketParams) -> Result<([f64; 2], Vec<String>)> {
    p.validate()?;
    match p.xi_override {
        None => Ok((implied_xi(p)?, Vec::new())),
        Some(xi) => {
            let mut warnings = Vec::new();
            match implied_xi(p) {
                Ok(d) => {
                    if (d[0] - xi[0]).abs() > 1e-9 || (d[1] - xi[1]).abs() > 1e-9 {
                        warnings.push(format!(
                            "xi_override ({}, {}) differs from the drift-implied market price of risk ({:.6}, {:.6}); using the override",
                            xi[0], xi[1], d[0], d[1]
                        ));
                    }
                }
                Err(e) => warnings.push(format!("drift-implied market price of risk unavailable ({e}); using the override")),
            }
            Ok((xi, warnings))
        }
    }
}

/// (e^{βτ} − 1)/β with the τ limit near β = 0.
fn growth_annuity(beta: f64, tau: f64) -> f64 {
    if beta.abs() < BETA_LIMIT {
        tau
    } else {
        (beta * tau).exp_m1() / beta
    }
}

impl Market {
    pub fn new(params: MarketParams) -> Result<Self> {
        let (xi, warnings) = derive_xi(&params)?;
        Ok(Market { params, xi, warnings })
    }

    pub fn xi_norm_sq(&self) -> f64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]
    }

    pub fn kernel(&self) -> KernelLaw {
        KernelLaw { r0: self.params.r0, xi_norm_sq: self.xi_norm_sq(), horizon: self.params.horizon }
    }

    pub fn beta_d(&self) -> f64 {
        let p = &self.params;
        let sd = p.sigma_d();
        p.mu_y - p.r0 - sd[0] * self.xi[0] - sd[1] * self.xi[1]
    }

    pub fn beta_l(&self) -> f64 {
        let p = &self.params;
        let sl = p.sigma_l();
        p.mu_a - p.r0 - sl[0] * self.xi[0] - sl[1] * self.xi[1]
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.params.horizon) {
            return Err(Error::Domain(format!("t = {t} outside [0, T]")));
        }
        Ok(())
    }

    /// D(t): value at t of the contributions c·Y(s), s ∈ [t, T].
    pub fn annuity_d(&self, c: f64, t: f64, y_t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(y_t > 0.0) {
            return Err(Error::Domain(format!("salary {y_t} must be positive")));
        }
        Ok(growth_annuity(self.beta_d(), self.params.horizon - t) * c * y_t)
    }

    /// L(t): value at t of the living-standard stream a(s), s ∈ [T, T′].
    pub fn annuity_l(&self, t: f64, a_t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(a_t > 0.0) {
            return Err(Error::Domain(format!("living standard {a_t} must be positive")));
        }
        let beta = self.beta_l();
        let p = &self.params;
        let window = p.death - p.horizon;
        let factor = if beta.abs() < BETA_LIMIT { window } else { (beta * (p.horizon - t)).exp() * growth_annuity(beta, window) };
        Ok(factor * a_t)
    }

    /// a0 that makes L(0) equal `ell0`.
    pub fn a0_for_ell0(&self, ell0: f64) -> Result<f64> {
        Ok(ell0 / self.annuity_l(0.0, 1.0)?)
    }
}

impl PensionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(invalid("c", "must lie in (0, 1]"));
        }
        if !(self.y0 > 0.0) {
            return Err(invalid("y0", "must be > 0"));
        }
        if !(self.a0 > 0.0) {
            return Err(invalid("a0", "must be > 0"));
        }
        if !(self.x0 > 0.0) {
            return Err(invalid("x0", "must be > 0"));
        }
        if !(self.ell >= 0.0) || !self.ell.is_finite() {
            return Err(invalid("ell", "must be finite and >= 0"));
        }
        if !self.kappa.is_finite() {
            return Err(invalid("kappa", "must be finite"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

pub fn surplus_budget(market: &Market, pen: &PensionParams) -> Result<SurplusBudget> {
    pen.validate()?;
    let d0 = market.annuity_d(pen.c, 0.0, pen.y0)?;
    let ell0 = market.annuity_l(0.0, pen.a0)?;
    let z0 = pen.x0 + d0 - ell0;
    let z_bar = snap_zero(z0 - pen.ell * market.kernel().mean(), z0);
    if z_bar < 0.0 {
        return Err(Error::InfeasibleBudget { z_bar });
    }
    Ok(SurplusBudget {
        d0,
        ell0,
        z0,
        z_bar,
        z_under: (pen.kappa - pen.ell).max(0.0),
        beta_d: market.beta_d(),
        beta_l: market.beta_l(),
        sigma_d: market.params.sigma_d(),
        sigma_l: market.params.sigma_l(),
    })
}

/// Initial wealth x0 for which the surplus budget equals `z_bar`.
pub fn x0_for_z_bar(market: &Market, pen: &PensionParams, z_bar: f64) -> Result<f64> {
    let d0 = market.annuity_d(pen.c, 0.0, pen.y0)?;
    let ell0 = market.annuity_l(0.0, pen.a0)?;
    Ok(z_bar + pen.ell * market.kernel().mean() - d0 + ell0)
}

/// Default numerical setting.
pub mod defaults {
    use super::*;

    pub fn market() -> MarketParams {
        MarketParams {
            r: 0.02,
            r0: 0.05,
            mu_i: 0.033,
            sigma_i: 0.2,
            mu_s: 0.4,
            sigma_s: 0.4,
            rho_is: 0.5,
            mu_y: 0.1,
            sigma_y: 0.25,
            rho_iy: 0.6,
            mu_a: 0.1,
            sigma_a: 0.36,
            rho_ia: 0.55,
            horizon: 40.0,
            death: 60.0,
            xi_override: Some([0.015, 0.035]),
        }
    }

    pub const ELL0: f64 = 7.0;
    pub const Z_BAR: f64 = 10.0;

    /// Pension block with a0 chosen so L(0) = 7 and x0 chosen so z̄ = 10.
    pub fn pension(market: &Market) -> PensionParams {
        let mut pen = PensionParams { c: 0.08, y0: 1.0, a0: 1.0, x0: 1.0, ell: 30.0, kappa: 80.0, alpha: 0.1, gamma: 0.8 };
        pen.a0 = market.a0_for_ell0(ELL0).expect("default market is valid");
        pen.x0 = x0_for_z_bar(market, &pen, Z_BAR).expect("default market is valid");
        pen
    }
}
