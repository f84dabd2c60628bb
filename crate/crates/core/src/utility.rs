use crate::error::{Error, Result};

/// A strictly concave increasing utility satisfying the Inada conditions.
pub trait Utility: Copy + Send + Sync {
    fn u(&self, x: f64) -> f64;
    /// U′(x); U′(0) = ∞.
    fn u_prime(&self, x: f64) -> f64;
    /// (U′)⁻¹(y) for y > 0.
    fn inv_marginal(&self, y: f64) -> f64;
}

/// U(x) = x^{1−γ}/(1−γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crra {
    gamma: f64,
}

impl Crra {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter { field: "gamma", reason: format!("must lie in (0, 1), got {gamma}") });
        }
        Ok(Crra { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Utility for Crra {
    fn u(&self, x: f64) -> f64 {
        x.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    fn u_prime(&self, x: f64) -> f64 {
        if x == 0.0 {
            f64::INFINITY
        } else {
            x.powf(-self.gamma)
        }
    }

    fn inv_marginal(&self, y: f64) -> f64 {
        y.powf(-1.0 / self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn inverse_marginal_round_trip(g in 0.05f64..0.95, x in 1e-3f64..1e3) {
            let u = Crra::new(g).unwrap();
            let back = u.inv_marginal(u.u_prime(x));
            prop_assert!(((back - x) / x).abs() < 1e-12);
        }

        #[test]
        fn concave_increasing(g in 0.05f64..0.95, x in 1e-2f64..1e2, h in 1e-3f64..1.0) {
            let u = Crra::new(g).unwrap();
            prop_assert!(u.u(x + h) > u.u(x));
            prop_assert!(u.u_prime(x + h) < u.u_prime(x));
        }
    }

    #[test]
    fn inada() {
        let u = Crra::new(0.8).unwrap();
        assert_eq!(u.u_prime(0.0), f64::INFINITY);
        assert!(u.u_prime(1e12) < 1e-9);
        assert!(Crra::new(1.0).is_err());
    }
}
