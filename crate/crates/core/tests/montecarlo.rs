mod common;

use common::{default_model, model_with, solved};
use tvar_pension::market::{defaults, x0_for_z_bar, Market, MarketParams};
use tvar_pension::montecarlo::{
    analytic_mass_below, histogram, martingale_check, mean_and_se, replicate, simulate, sweep, terminal_samples, verify_solution, ReplicationConfig, SimConfig,
    SweepParam,
};
use tvar_pension::solver::Model;

fn cfg(n_paths: usize, n_steps: usize, seed: u64, antithetic: bool) -> SimConfig {
    SimConfig { n_paths, n_steps, seed, antithetic, t_grid: vec![] }
}

#[test]
fn salary_and_kernel_moments() {
    let m = default_model();
    let ps = simulate(&m, &cfg(100_000, 4, 1, false)).unwrap();
    let p = &m.market.params;
    let k = ps.n_times() - 1;
    let logs: Vec<f64> = ps.column(&ps.y, k).iter().map(|y| (y / m.pension.y0).ln()).collect();
    let (mean, se) = mean_and_se(&logs, false);
    let want = (p.mu_y - 0.5 * p.sigma_y * p.sigma_y) * p.horizon;
    assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} ± {se}");
    let (mean, se) = mean_and_se(&ps.terminal_rho(), false);
    let want = (-p.r0 * p.horizon).exp();
    assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} ± {se}");
    assert!(ps.rho.iter().chain(&ps.y).chain(&ps.a).all(|v| *v > 0.0));
}

#[test]
fn seeded_paths_are_reproducible_and_worker_independent() {
    let m = default_model();
    let c = SimConfig { t_grid: vec![10.0, 20.0], ..cfg(64, 16, 9, true) };
    let a = simulate(&m, &c).unwrap();
    let b = simulate(&m, &c).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let par = pool.install(|| simulate(&m, &c).unwrap());
    assert_eq!(a, par);
    let other = simulate(&m, &SimConfig { seed: 10, ..c.clone() }).unwrap();
    assert_ne!(a.rho, other.rho);
    // antithetic partners mirror the Brownian path
    for p in (0..a.n_paths).step_by(2) {
        for k in 0..a.n_times() {
            assert_eq!(a.w1[a.at(p, k)], -a.w1[a.at(p + 1, k)]);
            assert_eq!(a.w2[a.at(p, k)], -a.w2[a.at(p + 1, k)]);
        }
    }
    assert_eq!(a.times, vec![0.0, 10.0, 20.0, 40.0]);
}

#[test]
fn constraints_hold_in_simulation() {
    let (m, sol) = solved();
    let ps = simulate(&m, &cfg(200_000, 1, 3, false)).unwrap();
    let rep = verify_solution(&ps, &m, &sol, false);
    assert!(rep.budget.within(3.0), "{:?}", rep.budget);
    assert!(rep.tvar.within(3.0), "{:?}", rep.tvar);
    assert!(rep.floor_holds && rep.min_surplus >= m.pension.ell, "{}", rep.min_surplus);
}

#[test]
fn discounted_surplus_is_a_martingale() {
    let (m, sol) = solved();
    let c = SimConfig { t_grid: vec![10.0, 20.0, 30.0], ..cfg(20_000, 8, 5, false) };
    let ps = simulate(&m, &c).unwrap();
    for (t, e) in martingale_check(&ps, &m, &sol, false).unwrap() {
        if t == 0.0 {
            assert!(((e.estimate - e.target) / e.target).abs() < 1e-6);
        } else {
            assert!(e.within(3.0), "t={t}: {e:?}");
        }
    }
}

#[test]
fn antithetic_pairs_reduce_variance_of_monotone_payoffs() {
    // ρ(T) and Z*(T) are monotone in the terminal Gaussian driver; ρ(T)Z*(T) is
    // not (it rises on the flat piece and falls on the Merton piece)
    let (m, sol) = solved();
    let n = 100_000;
    let se = |anti: bool| {
        let ps = simulate(&m, &cfg(n, 1, 21, anti)).unwrap();
        (mean_and_se(&ps.terminal_rho(), anti).1, mean_and_se(&ps.terminal_surplus(&sol), anti).1)
    };
    let (a, p) = (se(true), se(false));
    assert!(a.0 <= p.0 && a.1 <= p.1, "{a:?} vs {p:?}");
}

#[test]
fn empirical_law_matches_quantile_composition() {
    let (m, sol) = solved();
    let n = 100_000;
    let z = terminal_samples(&m, &sol, &cfg(n, 1, 8, false)).unwrap();
    let bound = 1.63 / (n as f64).sqrt();
    let q = &sol.map.quantile;
    for i in 1..100 {
        let level = i as f64 / 100.0;
        let v = q.value_at(level) + m.pension.ell;
        let below = z.iter().filter(|&&x| x < v).count() as f64 / n as f64;
        let at_most = z.iter().filter(|&&x| x <= v).count() as f64 / n as f64;
        assert!(below - bound <= level && level <= at_most + bound, "z={level}: [{below}, {at_most}]");
    }
}

#[test]
fn density_support_with_and_without_floor() {
    let (m, sol) = solved();
    let c = cfg(50_000, 1, 4, false);
    let z = terminal_samples(&m, &sol, &c).unwrap();
    let h = histogram(&z, 100, 0.0, 150.0).unwrap();
    assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(h.mass_below(m.pension.ell), 0.0);
    // ℓ = 0 with the same TVaR level and initial wealth
    let free = model_with(|_, p| p.ell = 0.0);
    let sol0 = free.solve().unwrap();
    assert_eq!(analytic_mass_below(&sol, m.pension.ell), 0.0);
    assert!(analytic_mass_below(&sol0, m.pension.ell) > 0.0);
    // the analytic law agrees with the empirical one higher up
    let z0 = terminal_samples(&free, &sol0, &c).unwrap();
    let x = 40.0;
    let emp = z0.iter().filter(|&&v| v < x).count() as f64 / z0.len() as f64;
    let p = analytic_mass_below(&sol0, x);
    assert!((emp - p).abs() <= 3.0 * (p * (1.0 - p) / z0.len() as f64).sqrt(), "{emp} vs {p}");
}

#[test]
fn hedge_error_shrinks_along_ladder() {
    let (m, sol) = solved();
    let rep = replicate(&m, &sol, &ReplicationConfig { n_paths: 1000, ladder: vec![20, 80, 320], seed: 2 }).unwrap();
    assert!(rep.strictly_decreasing(), "{:?}", rep.rows);
    assert!(rep.rows.windows(2).all(|w| w[1].mid_mean_abs_dev < w[0].mid_mean_abs_dev), "{:?}", rep.rows);
}

#[test]
fn deterministic_market_replicates_to_euler_order() {
    // σ_Y = σ_a = 0 and z̄ = 0: Z*(T) ≡ ℓ, λ ≡ 0, so X follows a linear ODE and
    // the only error is the Euler one, first order in the step.
    let base = Market::new(defaults::market()).unwrap();
    let market = Market { params: MarketParams { sigma_y: 0.0, sigma_a: 0.0, ..base.params }, ..base };
    let mut pension = defaults::pension(&market);
    pension.kappa = pension.ell;
    pension.x0 = x0_for_z_bar(&market, &pension, 0.0).unwrap();
    let m = Model::new(market, pension).unwrap();
    let sol = m.solve().unwrap();
    let rep = replicate(&m, &sol, &ReplicationConfig { n_paths: 4, ladder: vec![250, 1000, 4000], seed: 1 }).unwrap();
    for f in rep.shrink_factors() {
        assert!((f - 4.0).abs() < 0.1, "{f}");
    }
    assert!(rep.rows[2].rmse < 1e-2 * m.pension.ell);
}

#[test]
fn sweep_rows_are_consistent() {
    let m = default_model();
    let rows = sweep(&m, SweepParam::Alpha, &[0.1, 0.2], &cfg(2000, 1, 6, false)).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!((r.bond_share + r.stock_share + r.cash_share - 1.0).abs() < 1e-12);
        assert!(r.stock_share > 0.0);
    }
    let rows = sweep(&m, SweepParam::ZUnder, &[50.0], &cfg(2000, 1, 6, false)).unwrap();
    assert_eq!(rows[0].regime, "EffectiveTVaR");
}
