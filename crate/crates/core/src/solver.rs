//! Quantile problem in the ineffective and effective regimes: the concave
//! envelope of φ_λ, the auxiliary quantile G*_{λ,ν}, the nested multiplier
//! search, and the terminal surplus map.

use crate::error::{Error, Result};
use crate::feasibility::{self, merton_with_floor, solve_decreasing, tie_tolerance, Regime, RegimeTag, MULTIPLIER_TOL};
use crate::kernel::{KernelLaw, LogNormal};
use crate::market::{surplus_budget, Market, PensionParams, SurplusBudget};
use crate::quantile::{PiecewiseQuantile, Segment};
use crate::roots::bisect;
use crate::utility::{Crra, Utility};
use serde::{Deserialize, Serialize};

/// z-bracket shrink for the tangent point search.
const Z_SHRINK: f64 = 1e-10;
/// Relative slack when choosing between the two auxiliary quantile branches.
const BRANCH_SLACK: f64 = 1e-12;
/// Outer bracket offset as a fraction of λ̂.
pub const OUTER_EPS: f64 = 1e-6;

/// Ends of the linear bridge of the concave envelope of φ_λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoints {
    pub z1: f64,
    pub z2: f64,
    /// F⁻¹(1 − z2), the common slope φ′(z1) = φ′(z2).
    pub rho_under: f64,
    /// F⁻¹(1 − z1) = ρ̲ + λ/α.
    pub rho_bar: f64,
}

impl EnvelopePoints {
    pub fn slope(&self) -> f64 {
        self.rho_under
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda_star: f64,
    pub nu_star: f64,
    /// (f − z̄)/z̄
    pub residual_budget: f64,
    /// (g − z̲)/z̲
    pub residual_tvar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub rho_under: f64,
    pub rho_bar: f64,
    pub rho_ell: f64,
}

/// φ_λ(z) = −E[ρ 1{ρ ≤ F⁻¹(1 − z)}] + λ(α − z)/α · 1{z ≤ α}.
pub fn phi(law: &LogNormal, alpha: f64, lam: f64, z: f64) -> f64 {
    let tail = -law.partial_power(1.0, 0.0, law.inv_sf(z));
    if z <= alpha {
        tail + lam * (alpha - z) / alpha
    } else {
        tail
    }
}

pub fn phi_prime(law: &LogNormal, alpha: f64, lam: f64, z: f64) -> f64 {
    let q = law.inv_sf(z);
    if z <= alpha {
        q - lam / alpha
    } else {
        q
    }
}

/// ψ(z) = φ(z) − φ(s(z)) − φ′(z)(z − s(z)) with z > α given by its kernel value x.
fn psi_kernel(law: &LogNormal, alpha: f64, lam: f64, x: f64) -> f64 {
    let c = lam / alpha;
    let top = x + c;
    law.partial_power(1.0, x, top) - x * law.band_probability(x, top) - lam + c * law.sf(top)
}

/// Tangent points of the concave envelope of φ_λ for λ ∈ (0, λ̂).
///
/// The root of ψ is located on the normal score of F⁻¹(1 − z2), so z2 may lie
/// closer to 1 than double precision resolves.
pub fn tangent_points(law: &LogNormal, alpha: f64, lam: f64) -> Result<EnvelopePoints> {
    if !(lam > 0.0) {
        return Err(Error::Domain(format!("lambda = {lam} must be positive")));
    }
    let psi = |u: f64| Ok(psi_kernel(law, alpha, lam, law.at_score(u)));
    // ψ is decreasing in u: negative near z = α, positive near z = 1
    let u_hi = law.score(law.inv_sf(alpha + Z_SHRINK));
    let mut u_lo = law.score(law.inv_sf(1.0 - Z_SHRINK));
    let underflow = (-700.0 - law.mu) / law.sigma;
    let mut step = 8.0;
    while psi(u_lo)? <= 0.0 && u_lo > underflow {
        u_lo -= step;
        step *= 2.0;
    }
    let u_lo = u_lo.max(underflow);
    let u = bisect("tangent_points", psi, u_lo, u_hi, 1e-13)?;
    let rho_under = law.at_score(u);
    let rho_bar = rho_under + lam / alpha;
    Ok(EnvelopePoints { z1: law.sf(rho_bar), z2: law.sf(rho_under), rho_under, rho_bar })
}

/// ẑ: the level where φ′_λ crosses U′(ℓ)/ν.
pub fn hat_z<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, lam: f64, nu: f64) -> f64 {
    let k = util.u_prime(ell) / nu;
    if law.inv_sf(alpha) <= k + lam / alpha {
        law.sf(k + lam / alpha)
    } else {
        law.sf(k)
    }
}

/// Optimal quantile of the auxiliary problem for multipliers (λ, ν).
pub fn auxiliary_quantile<U: Utility>(law: &LogNormal, util: U, ell: f64, lam: f64, nu: f64, alpha: f64, env: &EnvelopePoints) -> PiecewiseQuantile<U> {
    let k = util.u_prime(ell) / nu;
    if env.rho_under <= k * (1.0 + BRANCH_SLACK) {
        bridged_quantile(law, util, ell, lam, nu, alpha, env)
    } else {
        merton_with_floor(law, util, ell, nu)
    }
}

/// Zero, shifted Merton, flat bridge, Merton: the branch used when the floor
/// does not cut into the bridge.
fn bridged_quantile<U: Utility>(law: &LogNormal, util: U, ell: f64, lam: f64, nu: f64, alpha: f64, env: &EnvelopePoints) -> PiecewiseQuantile<U> {
    let k = util.u_prime(ell) / nu;
    let level = (util.inv_marginal(nu * env.rho_under) - ell).max(0.0);
    let rho_ell = (k + lam / alpha).max(env.rho_bar);
    PiecewiseQuantile::new(
        *law,
        util,
        ell,
        &[Segment::Zero, Segment::ShiftedMerton { nu, shift: lam / alpha }, Segment::Flat(level), Segment::Merton { nu }],
        &[rho_ell, env.rho_bar, env.rho_under],
    )
    .expect("thresholds are ordered")
}

/// h(λ, z̲): the ν with g(λ, ν) = z̲.
pub fn inner_nu<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, lam: f64, z_under: f64, env: &EnvelopePoints) -> Result<f64> {
    solve_decreasing("inner_nu", z_under, |nu| auxiliary_quantile(law, util, ell, lam, nu, alpha, env).tvar_g(alpha))
}

/// Everything the outer search needs at a given λ.
#[derive(Debug, Clone)]
pub struct InnerSolve<U: Utility> {
    pub lam: f64,
    pub nu: f64,
    pub env: EnvelopePoints,
    pub quantile: PiecewiseQuantile<U>,
    pub f: f64,
    pub g: f64,
}

pub fn inner_solve<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, lam: f64, z_under: f64) -> Result<InnerSolve<U>> {
    let env = tangent_points(law, alpha, lam)?;
    let nu = inner_nu(law, util, alpha, ell, lam, z_under, &env)?;
    let quantile = auxiliary_quantile(law, util, ell, lam, nu, alpha, &env);
    let f = quantile.budget_f()?;
    let g = quantile.tvar_g(alpha)?;
    Ok(InnerSolve { lam, nu, env, quantile, f, g })
}

/// Outer search on λ for f(λ, h(λ)) = z̄ in the effective regime.
pub fn solve_multipliers<U: Utility>(law: &LogNormal, util: U, alpha: f64, ell: f64, z_bar: f64, z_under: f64, lambda_hat: f64) -> Result<InnerSolve<U>> {
    let excess = |lam: f64| inner_solve(law, util, alpha, ell, lam, z_under).map(|s| s.f - z_bar);
    let mut lo = OUTER_EPS * lambda_hat;
    let mut hi = (1.0 - OUTER_EPS) * lambda_hat;
    // f∘h − z̄ tends to C − z̄ > 0 as λ → 0 and to R − z̄ < 0 as λ → λ̂; move an
    // end outward when z̄ is within the endpoint gap, inward if it cannot be
    // evaluated
    let mut f_lo = excess(lo);
    for _ in 0..6 {
        match f_lo {
            Ok(v) if v > 0.0 => break,
            Ok(_) => lo *= 1e-2,
            Err(_) => lo *= 10.0,
        }
        f_lo = excess(lo);
    }
    let mut f_hi = excess(hi);
    for _ in 0..6 {
        match f_hi {
            Ok(v) if v < 0.0 => break,
            Ok(_) => hi = lambda_hat - (lambda_hat - hi) * 1e-2,
            Err(_) => hi = lambda_hat - (lambda_hat - hi) * 10.0,
        }
        f_hi = excess(hi);
    }
    let (a, b) = (f_lo?, f_hi?);
    if !(a > 0.0 && b < 0.0) {
        return Err(Error::BracketFailure { what: "solve_multipliers", lo, hi, f_lo: a, f_hi: b });
    }
    let lam = bisect("solve_multipliers", excess, lo, hi, MULTIPLIER_TOL)?;
    inner_solve(law, util, alpha, ell, lam, z_under)
}

/// Budget-saturating Merton-with-floor quantile: (ν, G).
pub fn ineffective_solution<U: Utility>(law: &LogNormal, util: U, ell: f64, z_bar: f64) -> Result<(f64, PiecewiseQuantile<U>)> {
    let nu = solve_decreasing("ineffective_solution", z_bar, |nu| merton_with_floor(law, util, ell, nu).budget_f())?;
    Ok((nu, merton_with_floor(law, util, ell, nu)))
}

/// Z*(T) as a function of ρ(T).
#[derive(Debug, Clone)]
pub struct TerminalWealthMap<U: Utility> {
    pub regime: RegimeTag,
    pub alpha: f64,
    pub quantile: PiecewiseQuantile<U>,
    pub ell: f64,
    /// Effective regime only.
    pub thresholds: Option<Thresholds>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
}

impl<U: Utility> TerminalWealthMap<U> {
    /// Z*(T) = G(1 − F(ρ)) + ℓ.
    pub fn surplus(&self, rho: f64) -> f64 {
        self.quantile.value_at_kernel(rho) + self.ell
    }

    /// X*(T) = Z*(T) + L(T).
    pub fn wealth(&self, rho: f64, l_terminal: f64) -> f64 {
        self.surplus(rho) + l_terminal
    }

    /// The four-branch form of Z*(T) in the effective regime.
    pub fn branch_surplus(&self, rho: f64) -> Option<f64> {
        let th = self.thresholds?;
        let (lam, nu) = (self.lambda?, self.nu?);
        let u = self.quantile.utility();
        Some(if rho <= th.rho_under {
            u.inv_marginal(nu * rho)
        } else if rho <= th.rho_bar {
            u.inv_marginal(nu * th.rho_under)
        } else if rho <= th.rho_ell {
            u.inv_marginal(nu * rho - lam * nu / self.alpha)
        } else {
            self.ell
        })
    }
}

/// Full solution of the static problem.
#[derive(Debug, Clone)]
pub struct Solution<U: Utility> {
    pub regime: Regime,
    pub z_bar: f64,
    pub z_under: f64,
    pub multipliers: Option<Multipliers>,
    pub envelope: Option<EnvelopePoints>,
    pub map: TerminalWealthMap<U>,
}

/// The static problem on a given kernel law.
#[derive(Debug, Clone, Copy)]
pub struct Problem<U: Utility> {
    pub law: LogNormal,
    pub util: U,
    pub alpha: f64,
    pub ell: f64,
    pub z_bar: f64,
    pub z_under: f64,
}

impl<U: Utility> Problem<U> {
    pub fn assess(&self) -> Result<Regime> {
        feasibility::assess(&self.law, self.util, self.alpha, self.ell, self.z_bar, self.z_under)
    }

    pub fn solve(&self) -> Result<Solution<U>> {
        let regime = self.assess()?;
        self.solve_in(regime)
    }

    pub fn solve_in(&self, regime: Regime) -> Result<Solution<U>> {
        let (law, util, alpha, ell) = (&self.law, self.util, self.alpha, self.ell);
        let map = |regime, quantile, thresholds, lambda, nu| TerminalWealthMap { regime, alpha, quantile, ell, thresholds, lambda, nu };
        match regime.tag {
            RegimeTag::Infeasible => Err(Error::Infeasible { z_bar: self.z_bar, r_value: regime.r_value }),
            RegimeTag::UniqueTwoPoint => {
                let q = feasibility::two_point_quantile(law, util, ell, alpha, regime.lambda_hat, self.z_under);
                Ok(self.wrap(regime, None, None, map(regime.tag, q, None, None, None)))
            }
            RegimeTag::IneffectiveTVaR => {
                let (nu, q) = ineffective_solution(law, util, ell, self.z_bar)?;
                Ok(self.wrap(regime, None, None, map(regime.tag, q, None, None, Some(nu))))
            }
            RegimeTag::EffectiveTVaR => {
                let s = solve_multipliers(law, util, alpha, ell, self.z_bar, self.z_under, regime.lambda_hat)?;
                let mult = Multipliers {
                    lambda_star: s.lam,
                    nu_star: s.nu,
                    residual_budget: (s.f - self.z_bar) / self.z_bar,
                    residual_tvar: (s.g - self.z_under) / self.z_under,
                };
                let k = util.u_prime(ell) / s.nu;
                let thresholds = Thresholds { rho_under: s.env.rho_under, rho_bar: s.env.rho_bar, rho_ell: (k + s.lam / alpha).max(s.env.rho_bar) };
                let m = map(regime.tag, s.quantile, Some(thresholds), Some(s.lam), Some(s.nu));
                Ok(self.wrap(regime, Some(mult), Some(s.env), m))
            }
        }
    }

    fn wrap(&self, regime: Regime, multipliers: Option<Multipliers>, envelope: Option<EnvelopePoints>, map: TerminalWealthMap<U>) -> Solution<U> {
        Solution { regime, z_bar: self.z_bar, z_under: self.z_under, multipliers, envelope, map }
    }
}

/// CRRA utility on a validated market.
#[derive(Debug, Clone)]
pub struct Model {
    pub market: Market,
    pub pension: PensionParams,
    pub kernel: KernelLaw,
    pub budget: SurplusBudget,
    pub util: Crra,
}

impl Model {
    pub fn new(market: Market, pension: PensionParams) -> Result<Self> {
        let budget = surplus_budget(&market, &pension)?;
        let util = Crra::new(pension.gamma)?;
        let kernel = market.kernel();
        Ok(Model { market, pension, kernel, budget, util })
    }

    pub fn problem(&self) -> Problem<Crra> {
        Problem {
            law: self.kernel.terminal(),
            util: self.util,
            alpha: self.pension.alpha,
            ell: self.pension.ell,
            z_bar: self.budget.z_bar,
            z_under: self.budget.z_under,
        }
    }

    pub fn solve(&self) -> Result<Solution<Crra>> {
        self.problem().solve()
    }
}

/// True when `z_bar` sits inside the tie band around R.
pub fn is_tie(z_bar: f64, r_value: f64) -> bool {
    (z_bar - r_value).abs() <= tie_tolerance(z_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{cost_c, solve_lambda_hat, solve_lambda_under};

    fn law() -> LogNormal {
        KernelLaw::new(0.05, 0.00145, 40.0).unwrap().terminal()
    }

    fn crra() -> Crra {
        Crra::new(0.8).unwrap()
    }

    const A: f64 = 0.1;

    #[test]
    fn phi_landmarks() {
        let l = law();
        let lh = solve_lambda_hat(&l, A).unwrap();
        let lam = 0.5 * lh;
        assert!(phi(&l, A, lam, 1.0 - 1e-15).abs() < 1e-12);
        for z in [0.01, A, 0.9] {
            assert!(phi(&l, A, lam, z) < 0.0);
        }
        let jump = phi_prime(&l, A, lam, A * (1.0 + 1e-15)) - phi_prime(&l, A, lam, A);
        assert!((jump - lam / A).abs() < 1e-12);
    }

    #[test]
    fn envelope_identities() {
        let l = law();
        let lh = solve_lambda_hat(&l, A).unwrap();
        for frac in [1e-3, 0.1, 0.5, 0.9, 0.999] {
            let lam = frac * lh;
            let e = tangent_points(&l, A, lam).unwrap();
            assert!(e.z1 < A && e.z2 > A);
            // z2 rounds to 1 once F⁻¹(1 − z2) is below ~1e−21; compare slopes in
            // kernel coordinates then
            let d = if 1.0 - e.z2 > 1e-6 { phi_prime(&l, A, lam, e.z1) - phi_prime(&l, A, lam, e.z2) } else { (e.rho_bar - lam / A) - e.rho_under };
            assert!(d.abs() <= 1e-10, "frac {frac}: {d}");
            let qa = l.inv_sf(A);
            assert!(l.sf(qa + lam / A) < e.z1 && e.z1 < l.sf(lam / A) * (1.0 + 1e-12));
            // the chord matches φ at both ends
            let chord = phi(&l, A, lam, e.z2) - phi(&l, A, lam, e.z1) - e.slope() * (e.z2 - e.z1);
            assert!(chord.abs() < 1e-12, "chord residual {chord}");
        }
    }

    #[test]
    fn envelope_limits() {
        let l = law();
        let lh = solve_lambda_hat(&l, A).unwrap();
        let small = tangent_points(&l, A, 1e-6 * lh).unwrap();
        assert!((small.z1 - A).abs() < 1e-2 && (small.z2 - A).abs() < 1e-2);
        let big = tangent_points(&l, A, 0.9999 * lh).unwrap();
        assert!(1.0 - big.z2 < 1e-12);
        let limit = l.sf(lh / A);
        assert!(((big.z1 - limit) / limit).abs() < 1e-2);
    }

    #[test]
    fn hat_z_cases() {
        let l = law();
        let u = crra();
        assert_eq!(hat_z(&l, u, A, 0.0, 0.01, 0.2), 0.0);
        let z = hat_z(&l, u, A, 30.0, 0.01, 1e9);
        assert!(z > 0.999);
        let lam = 0.01;
        let k = l.inv_sf(A) - lam / A;
        let nu = u.u_prime(30.0) / k;
        assert!((hat_z(&l, u, A, 30.0, lam, nu) - A).abs() < 1e-12);
        // φ′(ẑ) = U′(ℓ)/ν
        let nu = 0.2;
        let zh = hat_z(&l, u, A, 30.0, lam, nu);
        assert!((phi_prime(&l, A, lam, zh) - u.u_prime(30.0) / nu).abs() < 1e-10);
    }

    #[test]
    fn auxiliary_branches_meet() {
        let l = law();
        let u = crra();
        let lh = solve_lambda_hat(&l, A).unwrap();
        let lam = 0.3 * lh;
        let e = tangent_points(&l, A, lam).unwrap();
        let nu0 = u.u_prime(30.0) / e.rho_under;
        let qa = bridged_quantile(&l, u, 30.0, lam, nu0, A, &e);
        let qc = merton_with_floor(&l, u, 30.0, nu0);
        assert_eq!(qc.pieces().len(), 2);
        assert_eq!(auxiliary_quantile(&l, u, 30.0, lam, nu0 * (1.0 - 1e-10), A, &e).pieces().len(), 4);
        assert_eq!(auxiliary_quantile(&l, u, 30.0, lam, nu0 * (1.0 + 1e-10), A, &e).pieces().len(), 2);
        let mut sup = 0.0f64;
        for i in 1..2000 {
            let z = i as f64 / 2000.0;
            sup = sup.max((qa.value_at(z) - qc.value_at(z)).abs());
        }
        assert!(sup <= 1e-9, "sup distance {sup}");
    }

    #[test]
    fn flat_meets_shifted_merton() {
        let l = law();
        let u = crra();
        let lh = solve_lambda_hat(&l, A).unwrap();
        let lam = 0.4 * lh;
        let e = tangent_points(&l, A, lam).unwrap();
        let nu = 0.2;
        let left = u.inv_marginal(nu * (l.inv_sf(e.z1) - lam / A));
        let right = u.inv_marginal(nu * l.inv_sf(e.z2));
        assert!(((left - right) / right).abs() < 1e-10);
    }

    #[test]
    fn inner_limits() {
        let l = law();
        let u = crra();
        let lh = solve_lambda_hat(&l, A).unwrap();
        let lu = solve_lambda_under(&l, u, A, 30.0, 50.0).unwrap();
        let s = inner_solve(&l, u, A, 30.0, 1e-6 * lh, 50.0).unwrap();
        assert!(((s.nu - lu) / lu).abs() <= 1e-4, "{} vs {lu}", s.nu);
        assert!(((s.g - 50.0) / 50.0).abs() <= 1e-10);
        let s = inner_solve(&l, u, A, 30.0, 0.9999 * lh, 50.0).unwrap();
        assert!(s.nu > 10.0 * lu);
    }

    #[test]
    fn default_solve() {
        let p = Problem { law: law(), util: crra(), alpha: A, ell: 30.0, z_bar: 10.0, z_under: 50.0 };
        let sol = p.solve().unwrap();
        assert_eq!(sol.regime.tag, RegimeTag::EffectiveTVaR);
        let m = sol.multipliers.unwrap();
        assert!(m.residual_budget.abs() <= 1e-6 && m.residual_tvar.abs() <= 1e-6);
        let th = sol.map.thresholds.unwrap();
        assert_eq!(th.rho_bar - th.rho_under, m.lambda_star / A);
    }

    #[test]
    fn ineffective_closed_form_without_floor() {
        let l = law();
        let g = 0.8;
        let (nu, _) = ineffective_solution(&l, crra(), 0.0, 10.0).unwrap();
        let exact = (10.0 / l.partial_power(1.0 - 1.0 / g, 0.0, f64::INFINITY)).powf(-g);
        assert!(((nu - exact) / exact).abs() < 1e-8);
        let (nu2, _) = ineffective_solution(&l, crra(), 0.0, 20.0).unwrap();
        assert!(nu2 < nu);
    }

    #[test]
    fn effective_tends_to_ineffective_at_c() {
        let l = law();
        let u = crra();
        let lu = solve_lambda_under(&l, u, A, 30.0, 50.0).unwrap();
        let c = cost_c(&l, u, 30.0, lu).unwrap();
        let z_bar = c * (1.0 - 1e-6);
        let p = Problem { law: l, util: u, alpha: A, ell: 30.0, z_bar, z_under: 50.0 };
        let sol = p.solve().unwrap();
        assert_eq!(sol.regime.tag, RegimeTag::EffectiveTVaR);
        let (_, ineff) = ineffective_solution(&l, u, 30.0, c).unwrap();
        let mut sup = 0.0f64;
        for i in 1..1000 {
            let z = i as f64 / 1000.0;
            sup = sup.max((sol.map.quantile.value_at(z) - ineff.value_at(z)).abs());
        }
        assert!(sup <= 1e-3, "sup distance {sup}");
    }
}
