use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-positive risk premium: kappa_I = {kappa_i}, kappa_S = {kappa_s}")]
    NonPositivePremium { kappa_i: f64, kappa_s: f64 },

    #[error("infeasible budget: z_bar = {z_bar} < 0")]
    InfeasibleBudget { z_bar: f64 },

    #[error("bracket failure in {what}: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    BracketFailure { what: &'static str, lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("divergent integral in {what}: tail term {tail} vs running sum {total}")]
    DivergentIntegral { what: &'static str, tail: f64, total: f64 },

    #[error("infeasible: z_bar = {z_bar} < R(z_under) = {r_value}")]
    Infeasible { z_bar: f64, r_value: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

pub type Result<T> = std::result::Result<T, Error>;
