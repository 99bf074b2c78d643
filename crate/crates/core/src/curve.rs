//! Sampled density curves and grid helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order_engine::LatentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Quadrature,
    Asymptotic,
    MonteCarlo,
}

/// A density tabulated on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub label: String,
    pub spec: Option<LatentSpec>,
    pub points: Vec<(f64, f64)>,
    pub provenance: Provenance,
    pub tolerance: f64,
}

impl DensityCurve {
    pub fn new(
        label: impl Into<String>,
        spec: Option<LatentSpec>,
        points: Vec<(f64, f64)>,
        provenance: Provenance,
        tolerance: f64,
    ) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::Parameter(format!(
                    "curve grid must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(x, f)) = points.iter().find(|(x, f)| !x.is_finite() || !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Parameter(format!("invalid curve point ({x}, {f})")));
        }
        Ok(Self {
            label: label.into(),
            spec,
            points,
            provenance,
            tolerance,
        })
    }

    /// Tabulates `f` on `xs`.
    pub fn from_fn(
        label: impl Into<String>,
        xs: &[f64],
        provenance: Provenance,
        tolerance: f64,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let pts = xs.iter().map(|&x| Ok((x, f(x)?))).collect::<Result<Vec<_>>>()?;
        Self::new(label, None, pts, provenance, tolerance)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// Trapezoid-rule mass over the grid.
    pub fn trapezoid_mass(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    }

    /// Largest absolute pointwise difference to `other` on a shared grid.
    pub fn sup_distance(&self, other: &DensityCurve) -> Result<f64> {
        if self.points.len() != other.points.len()
            || self.points.iter().zip(&other.points).any(|(a, b)| a.0 != b.0)
        {
            return Err(Error::Parameter("curves are not on the same grid".into()));
        }
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max))
    }

    /// Trapezoid L1 distance `∫|f − g|` to `other` on a shared grid.
    pub fn l1_distance(&self, other: &DensityCurve) -> Result<f64> {
        self.sup_distance(other)?;
        Ok(self
            .points
            .windows(2)
            .zip(other.points.windows(2))
            .map(|(a, b)| {
                0.5 * (a[1].0 - a[0].0) * ((a[0].1 - b[0].1).abs() + (a[1].1 - b[1].1).abs())
            })
            .sum())
    }
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Interval `[x_lo, x_hi]` holding the central `mass` of density `f`,
/// located by trapezoid integration over `samples` points of `[lo, hi]`.
pub fn central_interval(
    f: impl Fn(f64) -> Result<f64> + Sync,
    lo: f64,
    hi: f64,
    mass: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    use rayon::prelude::*;
    let xs = linspace(lo, hi, samples.max(3));
    let ys = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    let mut cum = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cum[i] = cum[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::Degenerate("density has no mass on the search interval".into()));
    }
    let tail = 0.5 * (1.0 - mass) * total;
    let find = |target: f64| {
        let i = cum.partition_point(|&c| c < target).clamp(1, xs.len() - 1);
        let (c0, c1) = (cum[i - 1], cum[i]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        xs[i - 1] + t * (xs[i] - xs[i - 1])
    };
    Ok((find(tail), find(total - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(DensityCurve::new("", None, vec![(0.0, 1.0), (0.0, 1.0)], Provenance::Analytic, 0.0).is_err());
        assert!(DensityCurve::new("", None, vec![(0.0, -1.0)], Provenance::Analytic, 0.0).is_err());
        assert!(DensityCurve::new("", None, vec![(0.0, f64::NAN)], Provenance::Analytic, 0.0).is_err());
    }

    #[test]
    fn trapezoid_and_distances() {
        let xs = linspace(0.0, 1.0, 101);
        let a = DensityCurve::from_fn("a", &xs, Provenance::Analytic, 0.0, |x| Ok(2.0 * x)).unwrap();
        let b = DensityCurve::from_fn("b", &xs, Provenance::Analytic, 0.0, |_| Ok(1.0)).unwrap();
        assert!((a.trapezoid_mass() - 1.0).abs() < 1e-12);
        assert!((a.sup_distance(&b).unwrap() - 1.0).abs() < 1e-12);
        // ∫|2x − 1| = 1/2
        assert!((a.l1_distance(&b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn central_interval_of_uniform() {
        let (a, b) = central_interval(|_| Ok(1.0), 0.0, 1.0, 0.9, 1001).unwrap();
        assert!((a - 0.05).abs() < 1e-9 && (b - 0.95).abs() < 1e-9);
    }
}
