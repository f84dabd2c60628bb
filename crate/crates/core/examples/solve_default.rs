//! Solves the default setting and prints the multipliers and thresholds.

use tvar_pension::market::{defaults, Market};
use tvar_pension::solver::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = Market::new(defaults::market())?;
    let pension = defaults::pension(&market);
    let model = Model::new(market, pension)?;
    let sol = model.solve()?;
    let r = sol.regime;
    println!("regime        {}", r.tag.as_str());
    println!("lambda_hat    {:.12e}", r.lambda_hat);
    println!("R, C          {:.10} {:.10}", r.r_value, r.c_value);
    if let (Some(m), Some(e), Some(t)) = (sol.multipliers, sol.envelope, sol.map.thresholds) {
        println!("lambda*, nu*  {:.12e} {:.12e}", m.lambda_star, m.nu_star);
        println!("residuals     {:.3e} {:.3e}", m.residual_budget, m.residual_tvar);
        println!("z1, z2        {:.12e} {:.12e}", e.z1, e.z2);
        println!("rho thresholds {:.10} {:.10} {:.10}", t.rho_under, t.rho_bar, t.rho_ell);
    }
    Ok(())
}
