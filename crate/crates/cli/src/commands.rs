//! Subcommands; each returns the document to write.

use crate::config::RunConfig;
use rayon::prelude::*;
use serde::Serialize;
use tvar_pension::feasibility::RegimeTag;
use tvar_pension::montecarlo::{analytic_mass_below, histogram, simulate, sweep, terminal_samples, SimConfig, SweepParam};
use tvar_pension::solver::{Model, Solution};
use tvar_pension::strategy::{Strategy, StrategyState};
use tvar_pension::utility::Crra;
use tvar_pension::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const TERMINAL_MAP_HEADER: &str = "rho,z_star,x_star";
pub const STRATEGY_HEADER: &str = "t,x,pi1,pi2,cash";
pub const DENSITY_HEADER: &str = "bin_lo,bin_hi,mass_floor,density_floor,mass_no_floor,density_no_floor";
pub const SWEEP_HEADER: &str = "param,value,regime,bond_share,stock_share,cash_share";

/// 17 significant digits, round-trip exact.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub regime: String,
    pub lambda_hat: f64,
    pub r_value: f64,
    pub c_value: f64,
    pub lambda_under: Option<f64>,
    pub lambda_star: Option<f64>,
    pub nu_star: Option<f64>,
    pub rho_under: Option<f64>,
    pub rho_bar: Option<f64>,
    pub rho_ell: Option<f64>,
    pub residual_budget: Option<f64>,
    pub residual_tvar: Option<f64>,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub z_bar: f64,
    pub z_under: f64,
    pub z0: f64,
    pub x0: f64,
    pub a0: f64,
    pub d0: f64,
    pub ell0: f64,
    pub xi1: f64,
    pub xi2: f64,
}

pub fn report(model: &Model, sol: &Solution<Crra>) -> SolveReport {
    let r = &sol.regime;
    let m = sol.multipliers;
    let e = sol.envelope;
    let th = sol.map.thresholds;
    SolveReport {
        schema_version: SCHEMA_VERSION,
        regime: r.tag.as_str().to_string(),
        lambda_hat: r.lambda_hat,
        r_value: r.r_value,
        c_value: r.c_value,
        lambda_under: r.lambda_under,
        lambda_star: m.map(|m| m.lambda_star),
        nu_star: m.map(|m| m.nu_star),
        rho_under: th.map(|t| t.rho_under),
        rho_bar: th.map(|t| t.rho_bar),
        rho_ell: th.map(|t| t.rho_ell),
        residual_budget: m.map(|m| m.residual_budget),
        residual_tvar: m.map(|m| m.residual_tvar),
        z1: e.map(|e| e.z1),
        z2: e.map(|e| e.z2),
        z_bar: model.budget.z_bar,
        z_under: model.budget.z_under,
        z0: model.budget.z0,
        x0: model.pension.x0,
        a0: model.pension.a0,
        d0: model.budget.d0,
        ell0: model.budget.ell0,
        xi1: model.market.xi[0],
        xi2: model.market.xi[1],
    }
}

pub fn solve(model: &Model, sol: &Solution<Crra>) -> String {
    let mut s = serde_json::to_string_pretty(&report(model, sol)).expect("report serializes");
    s.push('\n');
    s
}

/// Kernel grid for the terminal map: log-spaced, with the thresholds inserted.
fn rho_grid(cfg: &RunConfig, model: &Model, sol: &Solution<Crra>) -> Vec<f64> {
    let tm = &cfg.terminal_map;
    let law = model.kernel.terminal();
    let (lo, hi) = match sol.map.thresholds {
        Some(t) if t.rho_ell.is_finite() => (tm.lo_factor * t.rho_under, tm.hi_factor * t.rho_ell),
        Some(t) => (tm.lo_factor * t.rho_under, tm.hi_factor * t.rho_bar),
        None => (law.quantile(1e-4), law.quantile(1.0 - 1e-4)),
    };
    let n = tm.points.max(2);
    let mut grid: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    if let Some(t) = sol.map.thresholds {
        grid.extend([t.rho_under, t.rho_bar, t.rho_ell].into_iter().filter(|r| r.is_finite() && *r > lo && *r < hi));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Z*(T) and X*(T) = Z*(T) + L(T) on a kernel grid, with L(T) at the mean
/// living standard a0·e^{μ_a T}.
pub fn terminal_map(cfg: &RunConfig, model: &Model, sol: &Solution<Crra>) -> Result<String> {
    let p = &model.market.params;
    let l_t = model.market.annuity_l(p.horizon, model.pension.a0 * (p.mu_a * p.horizon).exp())?;
    let rows = rho_grid(cfg, model, sol).into_iter().map(|rho| {
        let z = sol.map.surplus(rho);
        vec![num(rho), num(z), num(z + l_t)]
    });
    Ok(csv(TERMINAL_MAP_HEADER, rows))
}

fn require_effective(sol: &Solution<Crra>) -> Result<()> {
    if sol.regime.tag != RegimeTag::EffectiveTVaR {
        return Err(Error::UnsupportedRegime(format!("{} (strategy needs EffectiveTVaR)", sol.regime.tag.as_str())));
    }
    Ok(())
}

/// Mean wealth and mean holdings over simulated states at each grid time.
pub fn strategy(cfg: &RunConfig, model: &Model, sol: &Solution<Crra>, sim: &SimConfig) -> Result<String> {
    require_effective(sol)?;
    let horizon = model.kernel.horizon;
    let t_grid: Vec<f64> = cfg.strategy.t_grid.iter().copied().filter(|&t| t < horizon).collect();
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter { field: "t_grid", reason: "needs a time in [0, T)".into() });
    }
    let paths = simulate(model, &SimConfig { t_grid: t_grid.clone(), ..sim.clone() })?;
    let st = Strategy::new(model, &sol.map);
    let mut rows = Vec::new();
    for (k, &t) in paths.times.iter().enumerate() {
        if t >= horizon {
            continue;
        }
        let pts: Vec<_> = (0..paths.n_paths)
            .into_par_iter()
            .map(|p| {
                let i = paths.at(p, k);
                st.evaluate(&StrategyState { t, rho_t: paths.rho[i], y_t: paths.y[i], a_t: paths.a[i] })
            })
            .collect::<Result<_>>()?;
        let n = pts.len() as f64;
        let x = pts.iter().map(|q| q.wealth).sum::<f64>() / n;
        let pi1 = pts.iter().map(|q| q.weights.pi1).sum::<f64>() / n;
        let pi2 = pts.iter().map(|q| q.weights.pi2).sum::<f64>() / n;
        let cash = pts.iter().map(|q| q.weights.cash).sum::<f64>() / n;
        rows.push(vec![num(t), num(x), num(pi1), num(pi2), num(cash)]);
    }
    Ok(csv(STRATEGY_HEADER, rows))
}

/// Histograms of Z*(T) with the floor and for the same plan with ℓ = 0.
pub fn density(cfg: &RunConfig, model: &Model, sol: &Solution<Crra>, sim: &SimConfig) -> Result<(String, Vec<String>)> {
    let z = terminal_samples(model, sol, sim)?;
    let mut free_pension = model.pension.clone();
    free_pension.ell = 0.0;
    let free = Model::new(model.market.clone(), free_pension)?;
    let free_sol = free.solve()?;
    let z_free = terminal_samples(&free, &free_sol, sim)?;
    let lo = z.iter().chain(&z_free).copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().chain(&z_free).copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (lo.min(0.0), hi.max(lo + 1.0));
    let bins = cfg.density.bins;
    let h = histogram(&z, bins, lo, hi)?;
    let h_free = histogram(&z_free, bins, lo, hi)?;
    let (d, d_free) = (h.density(), h_free.density());
    let rows = (0..bins).map(|i| vec![num(h.edges[i]), num(h.edges[i + 1]), num(h.mass[i]), num(d[i]), num(h_free.mass[i]), num(d_free[i])]);
    let notes = vec![format!(
        "P(Z*(T) < ell): floor {:.3e}, ell = 0 analog {:.3e}",
        analytic_mass_below(sol, model.pension.ell),
        analytic_mass_below(&free_sol, model.pension.ell)
    )];
    Ok((csv(DENSITY_HEADER, rows), notes))
}

pub fn sweep_table(model: &Model, param: SweepParam, values: &[f64], sim: &SimConfig) -> Result<String> {
    let rows = sweep(model, param, values, sim)?;
    Ok(csv(
        SWEEP_HEADER,
        rows.into_iter().map(|r| vec![param.as_str().to_string(), num(r.value), r.regime, num(r.bond_share), num(r.stock_share), num(r.cash_share)]),
    ))
}
