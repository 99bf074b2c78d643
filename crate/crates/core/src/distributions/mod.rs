//! Parent laws and the derived laws of sums and products of independent
//! variates.
//!
//! Conventions: `Exponential` takes a rate, `Normal` a variance, and
//! `Rayleigh(σ)` has density `(2x/σ)·exp(−x²/σ)` on `x ≥ 0`.

mod derived;
mod parent;

pub use derived::{hetero_product_law, hetero_sum_law, product_law, sum_law, Aggregate, DerivedLaw, LawForm};
pub use parent::ParentDistribution;

use crate::error::{domain, Result};
use crate::quad::QuadTol;

/// Tail mass left outside [`Law::effective_range`] on each side (roughly).
pub const RANGE_TAIL: f64 = 1e-16;

/// Tolerance for the quadratures hidden inside numeric laws.
pub(crate) const LAW_TOL: QuadTol = QuadTol::new(1e-14, 1e-11).with_max_intervals(600);

/// A univariate law with a density.
pub trait Law: Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;

    /// Survival function `1 − cdf`, accurate in the upper tail where possible.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// `(cdf, sf)` together; numeric laws evaluate only one integral.
    fn cdf_sf(&self, x: f64) -> (f64, f64) {
        (self.cdf(x), self.sf(x))
    }

    /// Closed support `[lo, hi]`; endpoints may be infinite.
    fn support(&self) -> (f64, f64);

    /// Finite interval outside of which the law has negligible mass.
    fn effective_range(&self) -> (f64, f64);

    /// Points where the density has a kink, jump or singularity.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        invert_cdf(self, p)
    }
}

pub(crate) fn check_probability(func: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(domain(func, p, "probability must lie in (0, 1)"))
    }
}

/// Bracketing bisection with Newton steps whenever they stay in the bracket.
pub(crate) fn invert_cdf<L: Law + ?Sized>(law: &L, p: f64) -> Result<f64> {
    check_probability("quantile", p)?;
    let (mut lo, mut hi) = law.effective_range();
    // Widen if the effective range does not bracket p (extreme p).
    let mut step = (hi - lo).max(1.0);
    for _ in 0..200 {
        if law.cdf(lo) <= p {
            break;
        }
        lo -= step;
        step *= 2.0;
    }
    let mut step = (hi - lo).max(1.0);
    for _ in 0..200 {
        if law.cdf(hi) >= p {
            break;
        }
        hi += step;
        step *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let f = law.cdf(x) - p;
        if f.abs() <= 1e-15 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let d = law.pdf(x);
        let newton = x - f / d;
        if d > 0.0 && d.is_finite() && (newton - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return Ok(newton);
        }
        x = if d > 0.0 && d.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

#[cfg(test)]
mod tests;
