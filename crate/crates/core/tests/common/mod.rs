#![allow(dead_code)]

use tvar_pension::market::{defaults, Market, PensionParams};
use tvar_pension::solver::{Model, Solution};
use tvar_pension::utility::Crra;

pub fn default_model() -> Model {
    let market = Market::new(defaults::market()).unwrap();
    let pension = defaults::pension(&market);
    Model::new(market, pension).unwrap()
}

pub fn model_with(f: impl FnOnce(&Market, &mut PensionParams)) -> Model {
    let market = Market::new(defaults::market()).unwrap();
    let mut pension = defaults::pension(&market);
    f(&market, &mut pension);
    Model::new(market, pension).unwrap()
}

pub fn solved() -> (Model, Solution<Crra>) {
    let m = default_model();
    let s = m.solve().unwrap();
    (m, s)
}

/// (t, ρ_t) grid: three times, and four kernel levels whose conditional
/// median at T falls in each of the four regions of the terminal map.
pub fn grid(m: &Model) -> Vec<(f64, f64)> {
    let k = &m.kernel;
    let mut out = Vec::new();
    for t in [0.25 * k.horizon, 0.5 * k.horizon, 0.75 * k.horizon] {
        let growth = ((k.r0 + 0.5 * k.xi_norm_sq) * (k.horizon - t)).exp();
        for level in [0.1, 0.18, 0.3, 0.5] {
            out.push((t, level * growth));
        }
    }
    out
}
