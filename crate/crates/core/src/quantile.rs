//! Piecewise analytic quantile functions of the terminal surplus above the floor.
//!
//! A quantile G on (0, 1) is stored through its composition with the kernel,
//! G̃(ρ) = G(1 − F(ρ)). Pieces are kept in increasing z, which is decreasing ρ:
//! the first piece reaches ρ = ∞ (z = 0) and the last reaches ρ = 0 (z = 1).
//! A piece covers kernel values [rho_lo, rho_hi), i.e. z ∈ (z(rho_hi), z(rho_lo)],
//! which makes G left-continuous. Working in ρ keeps breakpoints exact even when
//! they sit far beyond double precision in z (z2 within 1e−300 of 1, say).

use crate::error::{Error, Result};
use crate::kernel::LogNormal;
use crate::quadrature::normal_expectation;
use crate::utility::Utility;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Zero,
    Flat(f64),
    /// (U′)⁻¹(νρ) − ℓ
    Merton {
        nu: f64,
    },
    /// (U′)⁻¹(ν(ρ − shift)) − ℓ
    ShiftedMerton {
        nu: f64,
        shift: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub segment: Segment,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

#[derive(Debug, Clone)]
pub struct PiecewiseQuantile<U: Utility> {
    law: LogNormal,
    util: U,
    ell: f64,
    pieces: Vec<Piece>,
}

impl<U: Utility> PiecewiseQuantile<U> {
    /// Builds a quantile from segments and the kernel values separating them.
    ///
    /// `cuts` are strictly decreasing kernel values between consecutive
    /// segments, so `segments.len() == cuts.len() + 1`. Segments whose range
    /// collapses are dropped.
    pub fn new(law: LogNormal, util: U, ell: f64, segments: &[Segment], cuts: &[f64]) -> Result<Self> {
        if segments.len() != cuts.len() + 1 {
            return Err(Error::Domain("segment/cut count mismatch".into()));
        }
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(f64::INFINITY);
        bounds.extend_from_slice(cuts);
        bounds.push(0.0);
        let mut pieces = Vec::with_capacity(segments.len());
        for (i, seg) in segments.iter().enumerate() {
            let (hi, lo) = (bounds[i], bounds[i + 1]);
            if !(lo <= hi) || lo.is_nan() {
                return Err(Error::Domain(format!("cuts must be nonincreasing, got {lo} after {hi}")));
            }
            if lo < hi {
                pieces.push(Piece { segment: *seg, rho_lo: lo, rho_hi: hi });
            }
        }
        Ok(PiecewiseQuantile { law, util, ell, pieces })
    }

    pub fn zero(law: LogNormal, util: U, ell: f64) -> Self {
        Self::new(law, util, ell, &[Segment::Zero], &[]).expect("single segment")
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn law(&self) -> &LogNormal {
        &self.law
    }

    pub fn utility(&self) -> &U {
        &self.util
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Interior breakpoints in z (ascending); these may round to 0 or 1.
    pub fn breakpoints_z(&self) -> Vec<f64> {
        self.pieces[..self.pieces.len() - 1].iter().map(|p| self.law.sf(p.rho_lo)).collect()
    }

    fn segment_value(&self, seg: Segment, rho: f64) -> f64 {
        match seg {
            Segment::Zero => 0.0,
            Segment::Flat(level) => level,
            // clamped so rounding at a threshold cannot dip below the floor
            Segment::Merton { nu } => (self.util.inv_marginal(nu * rho) - self.ell).max(0.0),
            Segment::ShiftedMerton { nu, shift } => (self.util.inv_marginal(nu * (rho - shift)) - self.ell).max(0.0),
        }
    }

    /// G̃(ρ) = G(1 − F(ρ)).
    pub fn value_at_kernel(&self, rho: f64) -> f64 {
        let piece = self.pieces.iter().find(|p| rho >= p.rho_lo).unwrap_or_else(|| self.pieces.last().expect("nonempty"));
        self.segment_value(piece.segment, rho)
    }

    /// G(z) for z ∈ (0, 1).
    pub fn value_at(&self, z: f64) -> f64 {
        self.value_at_kernel(self.law.inv_sf(z))
    }

    /// Extra panel cuts for a shifted Merton piece whose lower end sits close
    /// to the shift, where (ρ − shift)^{−1/γ} varies on a scale much finer than
    /// the panel grid: geometric cuts in ρ − shift.
    fn grading(&self, seg: Segment, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let Segment::ShiftedMerton { shift, .. } = seg {
            let mut d = lo - shift;
            if d > 0.0 {
                while d < shift && shift + d < hi {
                    d *= 4.0;
                    out.push(self.law.score((shift + d).min(hi)));
                }
            }
        }
        out
    }

    /// E[w(ρ) h(G̃(ρ)) 1{ρ ≥ floor}], piece by piece.
    fn expect<W, H>(&self, what: &'static str, floor: f64, weight: W, h: H, flat: impl Fn(f64, f64, f64, f64) -> f64) -> Result<f64>
    where
        W: Fn(f64) -> f64,
        H: Fn(f64) -> f64,
    {
        let mut total = 0.0;
        for p in &self.pieces {
            let lo = p.rho_lo.max(floor);
            if lo >= p.rho_hi {
                continue;
            }
            total += match p.segment {
                Segment::Zero => flat(0.0, h(0.0), lo, p.rho_hi),
                Segment::Flat(level) => flat(level, h(level), lo, p.rho_hi),
                seg => {
                    let (a, b) = (self.law.score(lo), self.law.score(p.rho_hi));
                    let breaks = self.grading(seg, lo, p.rho_hi);
                    normal_expectation(what, a, b, &breaks, |u| {
                        let rho = self.law.at_score(u);
                        weight(rho) * h(self.segment_value(seg, rho))
                    })?
                }
            };
        }
        Ok(total)
    }

    /// f = ∫₀¹ G(z) F⁻¹(1 − z) dz = E[ρ G̃(ρ)].
    pub fn budget_f(&self) -> Result<f64> {
        self.expect(
            "budget_f",
            0.0,
            |rho| rho,
            |g| g,
            |level, _, lo, hi| {
                if level == 0.0 {
                    0.0
                } else {
                    level * self.law.partial_power(1.0, lo, hi)
                }
            },
        )
    }

    /// g = (1/α) ∫₀^α G(z) dz = E[G̃(ρ) 1{ρ ≥ F⁻¹(1 − α)}]/α.
    pub fn tvar_g(&self, alpha: f64) -> Result<f64> {
        let floor = self.law.inv_sf(alpha);
        let s = self.expect(
            "tvar_g",
            floor,
            |_| 1.0,
            |g| g,
            |level, _, lo, hi| {
                if level == 0.0 {
                    0.0
                } else {
                    level * self.law.band_probability(lo, hi)
                }
            },
        )?;
        Ok(s / alpha)
    }

    /// ∫₀¹ U(G(z) + ℓ) dz.
    pub fn objective(&self) -> Result<f64> {
        let ell = self.ell;
        self.expect("objective", 0.0, |_| 1.0, |g| self.util.u(g + ell), |_, uval, lo, hi| uval * self.law.band_probability(lo, hi))
    }
}
