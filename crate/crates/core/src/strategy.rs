//! Optimal wealth process, delta and portfolio under CRRA utility.
//!
//! Z*(t) = E_t[ρ(T) Z*(T)]/ρ(t) is assembled piece by piece from the terminal
//! map: floor, flat and Merton pieces are lognormal partial moments, the
//! shifted-Merton piece is a one-dimensional band integral on the conditional
//! normal score. λ(t) = −ρ(t) ∂Z*(t)/∂ρ(t) comes from differentiating the same
//! assembly, and π*(t) = (σ⁻¹)ᵀ[ξλ(t) − σ_D D(t) + σ_L L(t)].

use crate::error::{Error, Result};
use crate::kernel::LogNormal;
use crate::market::Market;
use crate::normal;
use crate::quadrature::{gl64, U_MAX};
use crate::quantile::Segment;
use crate::solver::{Model, TerminalWealthMap};
use crate::utility::Crra;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    pub t: f64,
    pub rho_t: f64,
    pub y_t: f64,
    pub a_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub pi1: f64,
    pub pi2: f64,
    pub cash: f64,
}

/// All strategy quantities at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyPoint {
    pub surplus: f64,
    pub delta: f64,
    pub d: f64,
    pub l: f64,
    pub wealth: f64,
    pub weights: PortfolioWeights,
}

#[derive(Debug, Clone, Copy)]
pub struct Strategy<'a> {
    model: &'a Model,
    map: &'a TerminalWealthMap<Crra>,
}

/// E[X^p (ν(X − c))^{−x} 1{lo < X ≤ hi}] for lognormal X, and its μ-derivative.
///
/// Integrated with 64-point Gauss–Legendre on the normal score of X over the
/// band, clipped to |u| ≤ U_MAX. When the band starts close to c (relative to
/// c) a few geometric cuts are added so the near-singular end is resolved.
fn band_moment(law: &LogNormal, nu: f64, c: f64, lo: f64, hi: f64, p: f64, x: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (0.0, 0.0);
    }
    let a = law.score(lo).max(-U_MAX);
    let b = law.score(hi).min(U_MAX);
    if !(b > a) {
        return (0.0, 0.0);
    }
    let mut cuts = [0.0; 24];
    let mut n = 0;
    cuts[n] = a;
    n += 1;
    let mut d = lo - c;
    if d > 0.0 {
        while d < 0.25 * c && n < cuts.len() - 1 {
            d *= 4.0;
            let u = law.score(c + d);
            if u >= b {
                break;
            }
            if u > cuts[n - 1] {
                cuts[n] = u;
                n += 1;
            }
        }
    }
    cuts[n] = b;
    n += 1;
    let rule = gl64();
    let (mu, sigma) = (law.mu, law.sigma);
    let (mut val, mut der) = (0.0, 0.0);
    for w in cuts[..n].windows(2) {
        let (h, m) = (0.5 * (w[1] - w[0]), 0.5 * (w[1] + w[0]));
        let (mut sv, mut sd) = (0.0, 0.0);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let u = m + h * t;
            let ln_rho = mu + sigma * u;
            let rho = ln_rho.exp();
            let k = nu * (rho - c);
            let y = (p * ln_rho - x * k.ln() - 0.5 * u * u).exp() * wt;
            sv += y;
            sd += u * y;
        }
        val += h * sv;
        der += h * sd;
    }
    (val * normal::INV_SQRT_2PI, der * normal::INV_SQRT_2PI / sigma)
}

/// ξλ − σ_D D + σ_L L, the diffusion loading σᵀπ* must reproduce.
pub fn hedge_loading(market: &Market, delta: f64, d: f64, l: f64) -> [f64; 2] {
    let xi = market.xi;
    let sd = market.params.sigma_d();
    let sl = market.params.sigma_l();
    [xi[0] * delta - sd[0] * d + sl[0] * l, xi[1] * delta - sd[1] * d + sl[1] * l]
}

/// (π₁, π₂) = (σ⁻¹)ᵀ[ξλ − σ_D D + σ_L L], by forward substitution on the
/// lower-triangular volatility matrix.
pub fn portfolio_from(market: &Market, delta: f64, d: f64, l: f64) -> [f64; 2] {
    let v = hedge_loading(market, delta, d, l);
    let sg = market.params.sigma();
    let pi2 = v[1] / sg[1][1];
    let pi1 = (v[0] - sg[1][0] * pi2) / sg[0][0];
    [pi1, pi2]
}

/// The same portfolio written out component by component.
pub fn portfolio_components(market: &Market, delta: f64, d: f64, l: f64) -> [f64; 2] {
    let p = &market.params;
    let xi = market.xi;
    let c_is = (1.0 - p.rho_is * p.rho_is).sqrt();
    let second = xi[1] * delta - p.sigma_y * (1.0 - p.rho_iy * p.rho_iy).sqrt() * d + p.sigma_a * (1.0 - p.rho_ia * p.rho_ia).sqrt() * l;
    let first = xi[0] * delta - p.sigma_y * p.rho_iy * d + p.sigma_a * p.rho_ia * l;
    [first / p.sigma_i - p.rho_is / (p.sigma_i * c_is) * second, second / (p.sigma_s * c_is)]
}

impl<'a> Strategy<'a> {
    pub fn new(model: &'a Model, map: &'a TerminalWealthMap<Crra>) -> Self {
        Strategy { model, map }
    }

    fn gamma(&self) -> f64 {
        self.model.util.gamma()
    }

    /// (E_t[ρ(T) Z*(T)], ∂/∂ρ(t) of it).
    fn priced_surplus(&self, t: f64, rho_t: f64) -> Result<(f64, f64)> {
        let law = self.model.kernel.conditional(t, rho_t)?;
        let ell = self.map.ell;
        let ig = 1.0 / self.gamma();
        let (mut e, mut de) = (0.0, 0.0);
        for piece in self.map.quantile.pieces() {
            let (lo, hi) = (piece.rho_lo, piece.rho_hi);
            let (v, d) = match piece.segment {
                Segment::Zero => (ell * law.partial_power(1.0, lo, hi), ell * law.partial_power_dmu(1.0, lo, hi)),
                Segment::Flat(level) => {
                    let z = level + ell;
                    (z * law.partial_power(1.0, lo, hi), z * law.partial_power_dmu(1.0, lo, hi))
                }
                Segment::Merton { nu } => {
                    let k = nu.powf(-ig);
                    (k * law.partial_power(1.0 - ig, lo, hi), k * law.partial_power_dmu(1.0 - ig, lo, hi))
                }
                Segment::ShiftedMerton { nu, shift } => band_moment(&law, nu, shift, lo, hi, 1.0, ig),
            };
            e += v;
            de += d;
        }
        Ok((e, de / rho_t))
    }

    /// (Z*(t), λ(t)) at kernel value rho_t.
    pub fn surplus_and_delta(&self, t: f64, rho_t: f64) -> Result<(f64, f64)> {
        let (e, de) = self.priced_surplus(t, rho_t)?;
        let z = e / rho_t;
        Ok((z, z - de))
    }

    /// H(x) = E_t[(νρ(T) − λν/α)^{−x} 1{ρ̄ < ρ(T) ≤ ρ_ℓ}] in the effective regime.
    pub fn h_integral(&self, t: f64, rho_t: f64, x: f64) -> Result<f64> {
        let (th, lam, nu) = self.effective()?;
        if th.rho_bar >= th.rho_ell {
            return Ok(0.0);
        }
        let law = self.model.kernel.conditional(t, rho_t)?;
        Ok(band_moment(&law, nu, lam / self.map.alpha, th.rho_bar, th.rho_ell, 0.0, x).0)
    }

    fn effective(&self) -> Result<(crate::solver::Thresholds, f64, f64)> {
        match (self.map.thresholds, self.map.lambda, self.map.nu) {
            (Some(th), Some(l), Some(n)) => Ok((th, l, n)),
            _ => Err(Error::UnsupportedRegime(format!("{} (needs EffectiveTVaR)", self.map.regime.as_str()))),
        }
    }

    fn annuities(&self, s: &StrategyState) -> Result<(f64, f64)> {
        let m = &self.model.market;
        Ok((m.annuity_d(self.model.pension.c, s.t, s.y_t)?, m.annuity_l(s.t, s.a_t)?))
    }

    pub fn wealth(&self, s: &StrategyState) -> Result<f64> {
        let (z, _) = self.surplus_and_delta(s.t, s.rho_t)?;
        let (d, l) = self.annuities(s)?;
        Ok(z - d + l)
    }

    pub fn delta(&self, s: &StrategyState) -> Result<f64> {
        Ok(self.surplus_and_delta(s.t, s.rho_t)?.1)
    }

    /// σᵀπ* at an evaluated point.
    pub fn loading_at(&self, pt: &StrategyPoint) -> [f64; 2] {
        hedge_loading(&self.model.market, pt.delta, pt.d, pt.l)
    }

    pub fn portfolio(&self, s: &StrategyState) -> Result<PortfolioWeights> {
        Ok(self.evaluate(s)?.weights)
    }

    pub fn evaluate(&self, s: &StrategyState) -> Result<StrategyPoint> {
        let (z, delta) = self.surplus_and_delta(s.t, s.rho_t)?;
        let (d, l) = self.annuities(s)?;
        let wealth = z - d + l;
        let [pi1, pi2] = portfolio_from(&self.model.market, delta, d, l);
        Ok(StrategyPoint { surplus: z, delta, d, l, wealth, weights: PortfolioWeights { pi1, pi2, cash: wealth - pi1 - pi2 } })
    }

    /// Z*(t) and λ(t) written with Φ, Γ and the band integral under the
    /// ρ-weighted measure, in the effective regime.
    ///
    /// Conventions: d₋(x) = [ln(x/ρ(t)) + (r0 − ½‖ξ‖²)τ]/(‖ξ‖√τ), d₂ = d₋ + ‖ξ‖√τ/γ,
    /// Γ = (1−γ)/γ·(r0 + ‖ξ‖²/(2γ))τ used as an exponent, and
    /// H_Q(x) = e^{r0τ} E_t[ρ(T)(νρ(T) − λν/α)^{−x} 1{ρ̄ < ρ(T) ≤ ρ_ℓ}]/ρ(t).
    pub fn display_form(&self, t: f64, rho_t: f64) -> Result<(f64, f64)> {
        let (th, lam, nu) = self.effective()?;
        let g = self.gamma();
        let k = &self.model.kernel;
        let tau = k.horizon - t;
        let r0 = k.r0;
        let xn = k.xi_norm_sq.sqrt();
        let sq = xn * tau.sqrt();
        let d_minus = |x: f64| ((x / rho_t).ln() + (r0 - 0.5 * k.xi_norm_sq) * tau) / sq;
        let d2 = d_minus(th.rho_under) + sq / g;
        let big_gamma = (1.0 - g) / g * (r0 + k.xi_norm_sq / (2.0 * g)) * tau;
        let disc = (-r0 * tau).exp();
        let law = k.conditional(t, rho_t)?;
        let c = lam / self.map.alpha;
        let h_q = |x: f64| band_moment(&law, nu, c, th.rho_bar, th.rho_ell, 1.0, x).0 / (rho_t * disc);
        let lead = (nu * rho_t).powf(-1.0 / g) * big_gamma.exp();
        let flat = (nu * th.rho_under).powf(-1.0 / g) * disc;
        let ell = self.map.ell;
        let d4 = if th.rho_ell.is_finite() { normal::cdf(-d_minus(th.rho_ell)) } else { 0.0 };
        let z = lead * normal::cdf(d2) + flat * (normal::cdf(d_minus(th.rho_bar)) - normal::cdf(d_minus(th.rho_under))) + disc * h_q(1.0 / g) + ell * disc * d4;
        let delta = lead * (normal::cdf(d2) / g + normal::pdf(d2) / sq) - flat * normal::pdf(d_minus(th.rho_under)) / sq
            + disc / g * (h_q(1.0 / g) + nu * lam / self.map.alpha * h_q((g + 1.0) / g));
        Ok((z, delta))
    }
}
