//! Path simulation and Monte Carlo checks of the analytic solution.
//!
//! Every path owns a ChaCha8 stream: the generator is seeded once from the run
//! seed and path p draws from stream p (stream p/2 with a sign flip on odd p
//! when antithetic pairs are on), so results do not depend on how paths are
//! split across workers. ρ, Y and a are stepped exactly in logs.

use crate::error::{Error, Result};
use crate::market::Market;
use crate::solver::{Model, Solution};
use crate::strategy::{Strategy, StrategyState};
use crate::utility::Crra;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Output times besides 0 and T; snapped to the step grid.
    pub t_grid: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter { field: "n_paths", reason: "must be >= 2".into() });
        }
        if self.n_steps < 1 {
            return Err(Error::InvalidParameter { field: "n_steps", reason: "must be >= 1".into() });
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::InvalidParameter { field: "n_paths", reason: "must be even with antithetic pairs".into() });
        }
        Ok(())
    }
}

/// Gaussian increments of one path.
struct Driver {
    rng: ChaCha8Rng,
    sign: f64,
}

impl Driver {
    fn new(seed: u64, path: usize, antithetic: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (stream, sign) = if antithetic { (path / 2, if path % 2 == 1 { -1.0 } else { 1.0 }) } else { (path, 1.0) };
        rng.set_stream(stream as u64);
        Driver { rng, sign }
    }

    fn next(&mut self, sqrt_dt: f64) -> [f64; 2] {
        let a: f64 = self.rng.sample(StandardNormal);
        let b: f64 = self.rng.sample(StandardNormal);
        [self.sign * sqrt_dt * a, self.sign * sqrt_dt * b]
    }
}

/// Log-drifts and loadings of ρ, Y and a.
#[derive(Debug, Clone, Copy)]
struct Dynamics {
    rho_drift: f64,
    xi: [f64; 2],
    y_drift: f64,
    y_vol: [f64; 2],
    a_drift: f64,
    a_vol: [f64; 2],
}

impl Dynamics {
    fn new(market: &Market) -> Self {
        let p = &market.params;
        Dynamics {
            rho_drift: -(p.r0 + 0.5 * market.xi_norm_sq()),
            xi: market.xi,
            y_drift: p.mu_y - 0.5 * p.sigma_y * p.sigma_y,
            y_vol: p.sigma_d(),
            a_drift: p.mu_a - 0.5 * p.sigma_a * p.sigma_a,
            a_vol: p.sigma_l(),
        }
    }

    /// Advances (ln ρ, ln Y, ln a) over dt with increments dw.
    fn step(&self, s: &mut [f64; 3], dt: f64, dw: [f64; 2]) {
        s[0] += self.rho_drift * dt - self.xi[0] * dw[0] - self.xi[1] * dw[1];
        s[1] += self.y_drift * dt + self.y_vol[0] * dw[0] + self.y_vol[1] * dw[1];
        s[2] += self.a_drift * dt + self.a_vol[0] * dw[0] + self.a_vol[1] * dw[1];
    }
}

/// Simulated paths recorded at `times`; per-path values are stored row-major
/// (path-by-time), index `path * times.len() + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub rho: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub l: Vec<f64>,
}

impl PathSet {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn at(&self, path: usize, k: usize) -> usize {
        path * self.times.len() + k
    }

    /// Column of `values` at time index k.
    pub fn column(&self, values: &[f64], k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| values[self.at(p, k)]).collect()
    }

    pub fn terminal_rho(&self) -> Vec<f64> {
        self.column(&self.rho, self.n_times() - 1)
    }

    /// Z*(T) along every path.
    pub fn terminal_surplus(&self, sol: &Solution<Crra>) -> Vec<f64> {
        self.terminal_rho().into_iter().map(|r| sol.map.surplus(r)).collect()
    }

    /// X*(T) = Z*(T) + L(T) along every path.
    pub fn terminal_wealth(&self, sol: &Solution<Crra>) -> Vec<f64> {
        let k = self.n_times() - 1;
        (0..self.n_paths).map(|p| sol.map.wealth(self.rho[self.at(p, k)], self.l[self.at(p, k)])).collect()
    }
}

fn record_steps(horizon: f64, n_steps: usize, t_grid: &[f64]) -> Result<Vec<usize>> {
    let mut steps = vec![0, n_steps];
    for &t in t_grid {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::InvalidParameter { field: "t_grid", reason: format!("{t} outside [0, T]") });
        }
        steps.push((t / horizon * n_steps as f64).round() as usize);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

pub fn simulate(model: &Model, cfg: &SimConfig) -> Result<PathSet> {
    cfg.validate()?;
    let market = &model.market;
    let horizon = market.params.horizon;
    let steps = record_steps(horizon, cfg.n_steps, &cfg.t_grid)?;
    let dt = horizon / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let dyn_ = Dynamics::new(market);
    let (c, y0, a0) = (model.pension.c, model.pension.y0, model.pension.a0);
    let times: Vec<f64> = steps.iter().map(|&k| if k == cfg.n_steps { horizon } else { k as f64 * dt }).collect();
    let nt = times.len();

    let rows: Vec<[Vec<f64>; 5]> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut drv = Driver::new(cfg.seed, p, cfg.antithetic);
            let mut s = [0.0, y0.ln(), a0.ln()];
            let mut w = [0.0; 2];
            let mut out: [Vec<f64>; 5] = std::array::from_fn(|_| Vec::with_capacity(nt));
            let mut next = 0;
            for k in 0..=cfg.n_steps {
                if k > 0 {
                    let dw = drv.next(sqrt_dt);
                    w[0] += dw[0];
                    w[1] += dw[1];
                    dyn_.step(&mut s, dt, dw);
                }
                if next < nt && steps[next] == k {
                    out[0].push(w[0]);
                    out[1].push(w[1]);
                    out[2].push(s[0].exp());
                    out[3].push(s[1].exp());
                    out[4].push(s[2].exp());
                    next += 1;
                }
            }
            out
        })
        .collect();

    let n = cfg.n_paths * nt;
    let mut ps = PathSet {
        times,
        n_paths: cfg.n_paths,
        w1: Vec::with_capacity(n),
        w2: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        l: Vec::with_capacity(n),
    };
    for r in rows {
        ps.w1.extend_from_slice(&r[0]);
        ps.w2.extend_from_slice(&r[1]);
        ps.rho.extend_from_slice(&r[2]);
        ps.y.extend_from_slice(&r[3]);
        ps.a.extend_from_slice(&r[4]);
    }
    for i in 0..n {
        let t = ps.times[i % nt];
        ps.d.push(market.annuity_d(c, t, ps.y[i])?);
        ps.l.push(market.annuity_l(t, ps.a[i])?);
    }
    Ok(ps)
}

/// A Monte Carlo estimate against its analytic target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
}

impl Estimate {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.target) / self.std_error
    }

    /// Agreement within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        (self.estimate - self.target).abs() <= k * self.std_error
    }
}

/// Sample mean and its standard error; antithetic pairs are averaged first.
pub fn mean_and_se(values: &[f64], antithetic: bool) -> (f64, f64) {
    let pooled: Vec<f64> = if antithetic { values.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect() } else { values.to_vec() };
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Lower tail VaR estimate: mean of the ⌈αN⌉ smallest values, with the
/// standard error of q + E[(Z − q)1{Z < q}]/α.
pub fn tvar_estimate(values: &[f64], alpha: f64) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    let est = v[..k].iter().sum::<f64>() / k as f64;
    let q = v[k - 1];
    let tail: Vec<f64> = v.iter().map(|&z| if z < q { z - q } else { 0.0 }).collect();
    let m = tail.iter().sum::<f64>() / n as f64;
    let var = tail.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n as f64 - 1.0);
    (est, var.sqrt() / (alpha * (n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_paths: usize,
    /// E[ρ(T)Z*(T)] against z0.
    pub budget: Estimate,
    /// TVaR of Z*(T) against κ.
    pub tvar: Estimate,
    pub min_surplus: f64,
    pub floor: f64,
    pub floor_holds: bool,
}

impl VerificationReport {
    pub fn passes(&self) -> bool {
        self.budget.within(3.0) && self.tvar.within(3.0) && self.floor_holds
    }
}

pub fn verify_solution(paths: &PathSet, model: &Model, sol: &Solution<Crra>, antithetic: bool) -> VerificationReport {
    let rho = paths.terminal_rho();
    let z = paths.terminal_surplus(sol);
    let priced: Vec<f64> = rho.iter().zip(&z).map(|(r, z)| r * z).collect();
    let (b, b_se) = mean_and_se(&priced, antithetic);
    let (t, t_se) = tvar_estimate(&z, model.pension.alpha);
    let min_surplus = z.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = model.pension.ell;
    VerificationReport {
        n_paths: paths.n_paths,
        budget: Estimate { estimate: b, std_error: b_se, target: model.budget.z0 },
        tvar: Estimate { estimate: t, std_error: t_se, target: model.pension.kappa.max(floor) },
        min_surplus,
        floor,
        floor_holds: min_surplus >= floor,
    }
}

/// Sample mean of ρ(t)Z*(t) at every recorded time, against z0.
pub fn martingale_check(paths: &PathSet, model: &Model, sol: &Solution<Crra>, antithetic: bool) -> Result<Vec<(f64, Estimate)>> {
    let st = Strategy::new(model, &sol.map);
    let horizon = model.kernel.horizon;
    let mut out = Vec::new();
    for (k, &t) in paths.times.iter().enumerate() {
        let vals: Vec<f64> = (0..paths.n_paths)
            .into_par_iter()
            .map(|p| {
                let r = paths.rho[paths.at(p, k)];
                if t >= horizon {
                    Ok(r * sol.map.surplus(r))
                } else {
                    st.surplus_and_delta(t, r).map(|(z, _)| r * z)
                }
            })
            .collect::<Result<_>>()?;
        let (m, se) = mean_and_se(&vals, antithetic);
        out.push((t, Estimate { estimate: m, std_error: se.max(f64::MIN_POSITIVE), target: model.budget.z0 }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub n_paths: usize,
    /// Rebalancing step counts; each must divide the largest.
    pub ladder: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub n_steps: usize,
    /// RMSE of X(T) − [Z*(ρ(T)) + L(T)].
    pub rmse: f64,
    /// Mean |X(T/2) − X*(T/2)|.
    pub mid_mean_abs_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationReport {
    /// RMSE ratios between consecutive ladder rungs.
    pub fn shrink_factors(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].rmse / w[1].rmse).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].rmse < w[0].rmse)
    }
}

/// Euler–Maruyama evolution of the wealth account under π* for every rung
/// of the ladder on shared Brownian paths.
///
/// Increments are drawn at the finest rung and summed for the coarser ones.
/// Strategy evaluations are shared too: a coarse rebalancing time is also a
/// fine one, with the same state.
pub fn replicate(model: &Model, sol: &Solution<Crra>, cfg: &ReplicationConfig) -> Result<ReplicationReport> {
    let mut ladder = cfg.ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    let fine = *ladder.last().ok_or(Error::InvalidParameter { field: "ladder", reason: "empty".into() })?;
    // even rungs put T/2 on every rebalancing grid
    if ladder.iter().any(|&n| n == 0 || n % 2 != 0 || fine % n != 0) {
        return Err(Error::InvalidParameter { field: "ladder", reason: "rungs must be even and divide the finest rung".into() });
    }
    if cfg.n_paths < 2 {
        return Err(Error::InvalidParameter { field: "n_paths", reason: "must be >= 2".into() });
    }
    let market = &model.market;
    let st = Strategy::new(model, &sol.map);
    let horizon = market.params.horizon;
    let dt = horizon / fine as f64;
    let sqrt_dt = dt.sqrt();
    let dyn_ = Dynamics::new(market);
    let (c, y0, a0, x0) = (model.pension.c, model.pension.y0, model.pension.a0, model.pension.x0);
    let r0 = market.params.r0;
    let xi = market.xi;
    let mid = fine / 2;
    let blocks: Vec<usize> = ladder.iter().map(|&n| fine / n).collect();
    let nl = ladder.len();

    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut drv = Driver::new(cfg.seed, p, false);
            let mut s = [0.0, y0.ln(), a0.ln()];
            let mut x = vec![x0; nl];
            let mut load = vec![[0.0; 2]; nl];
            let mut y_at = vec![y0; nl];
            let mut acc = vec![[0.0; 2]; nl];
            let mut mid_dev = vec![0.0; nl];
            for k in 0..fine {
                let t = k as f64 * dt;
                let state = StrategyState { t, rho_t: s[0].exp(), y_t: s[1].exp(), a_t: s[2].exp() };
                let pt = st.evaluate(&state)?;
                for j in 0..nl {
                    if k % blocks[j] == 0 {
                        if k > 0 {
                            let h = blocks[j] as f64 * dt;
                            let v = load[j];
                            x[j] += r0 * x[j] * h + v[0] * (xi[0] * h + acc[j][0]) + v[1] * (xi[1] * h + acc[j][1]) + c * y_at[j] * h;
                        }
                        if k == mid {
                            mid_dev[j] = (x[j] - pt.wealth).abs();
                        }
                        load[j] = st.loading_at(&pt);
                        y_at[j] = state.y_t;
                        acc[j] = [0.0; 2];
                    }
                }
                let dw = drv.next(sqrt_dt);
                for a in acc.iter_mut() {
                    a[0] += dw[0];
                    a[1] += dw[1];
                }
                dyn_.step(&mut s, dt, dw);
            }
            let target = sol.map.wealth(s[0].exp(), market.annuity_l(horizon, s[2].exp())?);
            let mut err = vec![0.0; nl];
            for j in 0..nl {
                let h = blocks[j] as f64 * dt;
                let v = load[j];
                x[j] += r0 * x[j] * h + v[0] * (xi[0] * h + acc[j][0]) + v[1] * (xi[1] * h + acc[j][1]) + c * y_at[j] * h;
                err[j] = x[j] - target;
            }
            Ok((err, mid_dev))
        })
        .collect::<Result<_>>()?;

    let n = cfg.n_paths as f64;
    let rows = (0..nl)
        .map(|j| ReplicationRow {
            n_steps: ladder[j],
            rmse: (per_path.iter().map(|(e, _)| e[j] * e[j]).sum::<f64>() / n).sqrt(),
            mid_mean_abs_dev: per_path.iter().map(|(_, m)| m[j]).sum::<f64>() / n,
        })
        .collect();
    Ok(ReplicationReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges, `mass.len() + 1` of them.
    pub edges: Vec<f64>,
    /// Fraction of samples per bin; sums to 1.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn density(&self) -> Vec<f64> {
        self.mass.iter().zip(self.edges.windows(2)).map(|(m, e)| m / (e[1] - e[0])).collect()
    }

    /// Mass in bins lying entirely below `x`.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.mass.iter().zip(self.edges.windows(2)).filter(|(_, e)| e[1] <= x).map(|(m, _)| m).sum()
    }
}

/// Equal-width histogram of `values` over [lo, hi]; values outside are
/// clamped into the end bins so the masses always sum to 1.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) || values.is_empty() {
        return Err(Error::InvalidParameter { field: "bins", reason: "need bins >= 1, hi > lo and samples".into() });
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = values.len() as f64;
    Ok(Histogram { edges: (0..=bins).map(|i| lo + w * i as f64).collect(), mass: counts.iter().map(|&c| c as f64 / n).collect() })
}

/// Terminal surplus samples of a solved model.
pub fn terminal_samples(model: &Model, sol: &Solution<Crra>, cfg: &SimConfig) -> Result<Vec<f64>> {
    let one = SimConfig { n_steps: 1, t_grid: Vec::new(), ..cfg.clone() };
    Ok(simulate(model, &one)?.terminal_surplus(sol))
}

/// P(Z*(T) < x) under the analytic law of the terminal map.
///
/// Z*(T) is nonincreasing in ρ(T), so the event is ρ(T) above the smallest
/// kernel value where the map drops below x; found by bisection in the score.
pub fn analytic_mass_below(sol: &Solution<Crra>, x: f64) -> f64 {
    let law = *sol.map.quantile.law();
    let below = |u: f64| sol.map.surplus(law.at_score(u)) < x;
    let (mut lo, mut hi) = (-40.0, 40.0);
    if below(lo) {
        return 1.0;
    }
    if !below(hi) {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    crate::normal::sf(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    /// The TVaR level above the floor, z̲ = κ − ℓ.
    ZUnder,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::ZUnder => "z_under",
        }
    }

    pub fn apply(self, model: &Model, value: f64) -> Result<Model> {
        let mut pension = model.pension.clone();
        match self {
            SweepParam::Alpha => pension.alpha = value,
            SweepParam::ZUnder => pension.kappa = pension.ell + value,
        }
        Model::new(model.market.clone(), pension)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub regime: String,
    /// E[π₁(t)]/E[X*(t)] at t = T/2.
    pub bond_share: f64,
    /// E[π₂(t)]/E[X*(t)] at t = T/2.
    pub stock_share: f64,
    pub cash_share: f64,
}

/// Mid-horizon portfolio proportions for each parameter value, on common
/// random numbers.
pub fn sweep(model: &Model, param: SweepParam, values: &[f64], cfg: &SimConfig) -> Result<Vec<SweepRow>> {
    let horizon = model.kernel.horizon;
    let grid_cfg = SimConfig { n_steps: 2, t_grid: vec![0.5 * horizon], ..cfg.clone() };
    let paths = simulate(model, &grid_cfg)?;
    let k = 1;
    let t = paths.times[k];
    values
        .iter()
        .map(|&v| {
            let m = param.apply(model, v)?;
            let sol = m.solve()?;
            let st = Strategy::new(&m, &sol.map);
            let pts: Vec<_> = (0..paths.n_paths)
                .into_par_iter()
                .map(|p| {
                    let i = paths.at(p, k);
                    st.evaluate(&StrategyState { t, rho_t: paths.rho[i], y_t: paths.y[i], a_t: paths.a[i] })
                })
                .collect::<Result<_>>()?;
            let n = pts.len() as f64;
            let ex = pts.iter().map(|q| q.wealth).sum::<f64>() / n;
            let e1 = pts.iter().map(|q| q.weights.pi1).sum::<f64>() / n;
            let e2 = pts.iter().map(|q| q.weights.pi2).sum::<f64>() / n;
            Ok(SweepRow { value: v, regime: sol.regime.tag.as_str().to_string(), bond_share: e1 / ex, stock_share: e2 / ex, cash_share: 1.0 - (e1 + e2) / ex })
        })
        .collect()
}
