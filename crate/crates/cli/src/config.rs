//! Run configuration: a TOML file plus `--set key=value` overrides.

use serde::Deserialize;
use std::path::Path;
use tvar_pension::market::{x0_for_z_bar, Market, MarketParams, PensionParams};
use tvar_pension::montecarlo::{SimConfig, SweepParam};
use tvar_pension::solver::Model;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}`: expected key=value")]
    Override(String),
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub market: MarketParams,
    pub pension: PensionBlock,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub terminal_map: TerminalMapBlock,
    #[serde(default)]
    pub strategy: StrategyBlock,
    #[serde(default)]
    pub density: DensityBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
}

fn schema_version() -> u32 {
    1
}

/// Pension inputs; a0 may be given through ℓ0 = L(0) and x0 through z̄.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PensionBlock {
    pub c: f64,
    pub y0: f64,
    pub a0: Option<f64>,
    pub ell0: Option<f64>,
    pub x0: Option<f64>,
    pub z_bar: Option<f64>,
    pub ell: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock { n_paths: 100_000, n_steps: 40, seed: 20240101, antithetic: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminalMapBlock {
    pub points: usize,
    /// Grid bounds as multiples of the lowest and highest threshold.
    pub lo_factor: f64,
    pub hi_factor: f64,
}

impl Default for TerminalMapBlock {
    fn default() -> Self {
        TerminalMapBlock { points: 1000, lo_factor: 0.25, hi_factor: 2.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyBlock {
    pub t_grid: Vec<f64>,
}

impl Default for StrategyBlock {
    fn default() -> Self {
        StrategyBlock { t_grid: (0..40).map(f64::from).collect() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityBlock {
    pub bins: usize,
}

impl Default for DensityBlock {
    fn default() -> Self {
        DensityBlock { bins: 200 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock { param: SweepParam::Alpha, values: vec![0.1, 0.125, 0.15, 0.175, 0.2] }
    }
}

/// Parses a TOML literal, falling back to a bare string.
fn literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, pair: &str) -> Result<(), ConfigError> {
    let (key, raw) = pair.split_once('=').ok_or_else(|| ConfigError::Override(pair.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(pair.to_string()));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::Field { field: key.to_string(), reason: format!("`{p}` is not a table") })?;
    }
    table.insert(parts[parts.len() - 1].to_string(), literal(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_str(&text, overrides)
    }

    pub fn from_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if cfg.schema_version != 1 {
            return Err(ConfigError::Field { field: "schema_version".into(), reason: format!("unsupported version {}", cfg.schema_version) });
        }
        Ok(cfg)
    }

    pub fn market(&self) -> Result<Market, ConfigError> {
        Market::new(self.market.clone()).map_err(|e| field_error("market", e))
    }

    pub fn pension(&self, market: &Market) -> Result<PensionParams, ConfigError> {
        let p = &self.pension;
        let a0 = match (p.a0, p.ell0) {
            (Some(a0), None) => a0,
            (None, Some(ell0)) => market.a0_for_ell0(ell0).map_err(|e| field_error("pension", e))?,
            _ => return Err(ConfigError::Field { field: "pension.a0".into(), reason: "give exactly one of a0 and ell0".into() }),
        };
        let mut pen = PensionParams { c: p.c, y0: p.y0, a0, x0: 1.0, ell: p.ell, kappa: p.kappa, alpha: p.alpha, gamma: p.gamma };
        pen.x0 = match (p.x0, p.z_bar) {
            (Some(x0), None) => x0,
            (None, Some(z)) => x0_for_z_bar(market, &pen, z).map_err(|e| field_error("pension", e))?,
            _ => return Err(ConfigError::Field { field: "pension.x0".into(), reason: "give exactly one of x0 and z_bar".into() }),
        };
        pen.validate().map_err(|e| field_error("pension", e))?;
        Ok(pen)
    }

    /// The validated model; budget infeasibility is not a config error and
    /// is passed through.
    pub fn model(&self) -> Result<Result<Model, tvar_pension::Error>, ConfigError> {
        let market = self.market()?;
        let pension = self.pension(&market)?;
        Ok(Model::new(market, pension))
    }

    pub fn sim(&self, seed: Option<u64>) -> SimConfig {
        SimConfig {
            n_paths: self.sim.n_paths,
            n_steps: self.sim.n_steps,
            seed: seed.unwrap_or(self.sim.seed),
            antithetic: self.sim.antithetic,
            t_grid: Vec::new(),
        }
    }
}

fn field_error(block: &str, e: tvar_pension::Error) -> ConfigError {
    match e {
        tvar_pension::Error::InvalidParameter { field, reason } => ConfigError::Field { field: format!("{block}.{field}"), reason },
        other => ConfigError::Field { field: block.to_string(), reason: other.to_string() },
    }
}
