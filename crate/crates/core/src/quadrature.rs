//! Gauss–Legendre rules and Gaussian-weighted integrals on the normal score axis.

use crate::error::{Error, Result};
use crate::normal;
use std::sync::OnceLock;

/// Core score range: |u| beyond this carries less than 1e−16 of the Gaussian mass.
pub const U_MAX: f64 = 8.3;
/// Outermost score reached by the tail extension; φ(U_FAR) underflows.
pub const U_FAR: f64 = 38.5;
/// Number of uniform panels covering [−U_MAX, U_MAX].
pub const PANELS: usize = 32;
const DIVERGENCE_RATIO: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// n-point Gauss–Legendre rule on [−1, 1] via Newton iteration on P_n.
    pub fn gauss_legendre(n: usize) -> Rule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    /// ∫_a^b f(x) dx on a single panel.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl64() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::gauss_legendre(64))
}

/// ∫_lo^hi φ(u) h(u) du.
///
/// The core range [−U_MAX, U_MAX] is split at a uniform panel grid and at
/// `breaks`. Beyond it, panels of the same width are added outward while
/// they still contribute (up to |u| = U_FAR). If the integrand is still
/// significant where integration stops, the Gaussian tail does not tame it and
/// the integral is reported as divergent.
pub fn normal_expectation(what: &'static str, lo: f64, hi: f64, breaks: &[f64], mut h: impl FnMut(f64) -> f64) -> Result<f64> {
    if !(hi > lo) {
        return Ok(0.0);
    }
    let width = 2.0 * U_MAX / PANELS as f64;
    let rule = gl64();
    let mut f = |u: f64| normal::pdf(u) * h(u);
    let mut total = 0.0;

    let a = lo.max(-U_MAX);
    let b = hi.min(U_MAX);
    if b > a {
        let mut cuts: Vec<f64> = Vec::with_capacity(PANELS + breaks.len() + 2);
        cuts.push(a);
        for k in 1..PANELS {
            let g = -U_MAX + k as f64 * width;
            if g > a && g < b {
                cuts.push(g);
            }
        }
        cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            total += rule.integrate(w[0], w[1], &mut f);
        }
    }

    // outward extensions: (start, end, direction)
    let mut edge = 0.0_f64;
    for (start, end, dir) in [(lo.max(U_MAX), hi, 1.0), (hi.min(-U_MAX), lo, -1.0)] {
        if !(dir * (end - start) > 0.0) {
            continue;
        }
        let stop = if dir > 0.0 { end.min(U_FAR) } else { end.max(-U_FAR) };
        let mut x = start;
        let mut pieces: Vec<f64> = breaks.iter().copied().filter(|&p| dir * (p - start) > 0.0 && dir * (stop - p) > 0.0).collect();
        pieces.sort_by(|p, q| (dir * p).total_cmp(&(dir * q)));
        let mut next_break = pieces.into_iter().peekable();
        loop {
            let mut y = x + dir * width;
            if dir * (y - stop) > 0.0 {
                y = stop;
            }
            if let Some(&p) = next_break.peek() {
                if dir * (y - p) > 0.0 {
                    y = p;
                    next_break.next();
                }
            }
            let part = rule.integrate(x.min(y), x.max(y), &mut f);
            total += part;
            x = y;
            if x == stop {
                break;
            }
            let tail = f(x).abs();
            if part.abs() <= 1e-18 * total.abs() && tail <= 1e-18 * total.abs() {
                break;
            }
        }
        if x != end {
            edge = edge.max(f(x).abs());
        }
    }
    if !total.is_finite() || (edge > DIVERGENCE_RATIO * total.abs() && edge > 1e-300) {
        return Err(Error::DivergentIntegral { what, tail: edge, total });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_are_exact() {
        let r = gl64();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let v = r.integrate(0.0, 1.0, |x| x.powi(127));
        assert!((v - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        let one = normal_expectation("t", f64::NEG_INFINITY, f64::INFINITY, &[], |_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-14);
        let lognormal = normal_expectation("t", f64::NEG_INFINITY, f64::INFINITY, &[], |u| (0.7 * u).exp()).unwrap();
        assert!((lognormal - (0.245f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn heavy_tail_is_flagged() {
        let r = normal_expectation("t", f64::NEG_INFINITY, f64::INFINITY, &[], |u| (0.5 * u * u + u).exp());
        assert!(matches!(r, Err(Error::DivergentIntegral { .. })));
    }

    #[test]
    fn mass_beyond_the_core_range() {
        // E[e^{12u}] = e^{72}, centred near u = 12
        let v = normal_expectation("t", f64::NEG_INFINITY, f64::INFINITY, &[], |u| (12.0 * u - 72.0).exp()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let t = normal_expectation("t", 9.0, f64::INFINITY, &[], |_| 1.0).unwrap();
        assert!(((t - normal::sf(9.0)) / normal::sf(9.0)).abs() < 1e-12);
    }
}
