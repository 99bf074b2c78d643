//! Goodness of fit of samples against a reference density.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::DensityCurve;
use crate::distributions::Law;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_points, QuadTol};

const SEGMENT_TOL: QuadTol = QuadTol::new(1e-15, 1e-11);
const MAX_DEPTH: u32 = 40;

/// Distribution function of a reference density, tabulated once so it can
/// be evaluated at millions of sample points.
///
/// Each segment stores its exact mass (by quadrature) and interpolates the
/// cumulative mass inside with a cubic Hermite polynomial whose end slopes
/// are the density values. Segments are halved until the interpolant
/// matches quadrature at the midpoint to the requested tolerance.
#[derive(Debug, Clone)]
pub struct ReferenceCdf {
    nodes: Vec<f64>,
    cum: Vec<f64>,
    slopes: Vec<(f64, f64)>,
    support: (f64, f64),
    total: f64,
}

struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    mass: f64,
}

fn hermite_increment(mass: f64, h: f64, sa: f64, sb: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h10 = t3 - 2.0 * t2 + t;
    let h11 = t3 - t2;
    (mass * h01 + h * (h10 * sa + h11 * sb)).clamp(0.0, mass)
}

/// End slopes for a segment, falling back to the secant where the density
/// is not finite (integrable singularities).
fn slopes(s: &Segment) -> (f64, f64) {
    let secant = s.mass / (s.b - s.a);
    let pick = |v: f64| if v.is_finite() { v } else { secant };
    (pick(s.fa), pick(s.fb))
}

impl ReferenceCdf {
    /// Tabulates `f` on `window` (clipped to `support`); mass of `support`
    /// outside the window is integrated separately and kept as tail mass.
    pub fn from_density(
        f: impl Fn(f64) -> Result<f64> + Sync,
        support: (f64, f64),
        window: (f64, f64),
        breakpoints: &[f64],
        tol: f64,
    ) -> Result<Self> {
        let failure = Mutex::new(None::<Error>);
        let eval = |x: f64| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0.0
            }
        };
        let lo = window.0.max(support.0);
        let hi = window.1.min(support.1);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Parameter(format!("bad tabulation window [{lo}, {hi}]")));
        }
        let mut edges = vec![lo];
        let mut inner: Vec<f64> = breakpoints.iter().cloned().filter(|&b| b > lo && b < hi).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        edges.extend(inner);
        edges.push(hi);
        let mut pieces = Vec::new();
        for w in edges.windows(2) {
            let count = ((w[1] - w[0]) / (hi - lo) * 64.0).ceil().max(1.0) as usize;
            for i in 0..count {
                let a = w[0] + (w[1] - w[0]) * i as f64 / count as f64;
                let b = if i + 1 == count { w[1] } else { w[0] + (w[1] - w[0]) * (i + 1) as f64 / count as f64 };
                pieces.push((a, b));
            }
        }
        let segments: Vec<Vec<Segment>> = pieces
            .par_iter()
            .map(|&(a, b)| {
                let mut out = Vec::new();
                let mass = integrate(eval, a, b, SEGMENT_TOL).value;
                refine(&eval, Segment { a, b, fa: eval(a), fb: eval(b), mass }, tol, 0, &mut out);
                out
            })
            .collect();
        let lower = if support.0 < lo {
            integrate_with_points(eval, support.0, lo, breakpoints, SEGMENT_TOL).value
        } else {
            0.0
        };
        let upper = if support.1 > hi {
            integrate_with_points(eval, hi, support.1, breakpoints, SEGMENT_TOL).value
        } else {
            0.0
        };
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let mut nodes = vec![lo];
        let mut cum = vec![lower];
        let mut sl = Vec::new();
        for s in segments.iter().flatten() {
            nodes.push(s.b);
            cum.push(cum.last().unwrap() + s.mass.max(0.0));
            sl.push(slopes(s));
        }
        let total = cum.last().unwrap() + upper;
        Ok(Self {
            nodes,
            cum,
            slopes: sl,
            support,
            total,
        })
    }

    /// Tabulates the density of `law`.
    pub fn from_law<L: Law + ?Sized>(law: &L) -> Result<Self> {
        Self::from_density(
            |x| Ok(law.pdf(x)),
            law.support(),
            law.effective_range(),
            &law.breakpoints(),
            1e-11,
        )
    }

    /// Distribution of a tabulated curve, read as a piecewise linear density
    /// that vanishes outside the grid.
    pub fn from_curve(curve: &DensityCurve) -> Result<Self> {
        let pts = &curve.points;
        if pts.len() < 2 {
            return Err(Error::Parameter("a reference curve needs at least two points".into()));
        }
        let mut nodes = vec![pts[0].0];
        let mut cum = vec![0.0];
        let mut sl = Vec::new();
        for w in pts.windows(2) {
            let mass = 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
            nodes.push(w[1].0);
            cum.push(cum.last().unwrap() + mass);
            sl.push((w[0].1, w[1].1));
        }
        let total = *cum.last().unwrap();
        Ok(Self {
            support: (pts[0].0, pts[pts.len() - 1].0),
            nodes,
            cum,
            slopes: sl,
            total,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.support.0 {
            return 0.0;
        }
        if x >= self.support.1 {
            return self.total;
        }
        let last = self.nodes.len() - 1;
        if x <= self.nodes[0] {
            return self.cum[0];
        }
        if x >= self.nodes[last] {
            return self.cum[last];
        }
        let i = self.nodes.partition_point(|&n| n <= x) - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let (sa, sb) = self.slopes[i];
        self.cum[i] + hermite_increment(self.cum[i + 1] - self.cum[i], h, sa, sb, (x - a) / h)
    }

    /// Smallest tabulated `x` with `cdf(x) >= p` (bisection inside a segment).
    pub fn quantile(&self, p: f64) -> f64 {
        let last = self.nodes.len() - 1;
        if p <= self.cum[0] {
            return self.nodes[0];
        }
        if p >= self.cum[last] {
            return self.nodes[last];
        }
        let i = self.cum.partition_point(|&c| c < p).clamp(1, last) - 1;
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn refine(f: &impl Fn(f64) -> f64, s: Segment, tol: f64, depth: u32, out: &mut Vec<Segment>) {
    let m = 0.5 * (s.a + s.b);
    let h = s.b - s.a;
    if depth >= MAX_DEPTH || m <= s.a || m >= s.b {
        out.push(s);
        return;
    }
    let left_mass = integrate(f, s.a, m, SEGMENT_TOL).value;
    let (sa, sb) = slopes(&s);
    let predicted = hermite_increment(s.mass, h, sa, sb, 0.5);
    if (predicted - left_mass).abs() <= tol && depth >= 1 {
        out.push(s);
        return;
    }
    let fm = f(m);
    let right_mass = s.mass - left_mass;
    refine(f, Segment { a: s.a, b: m, fa: s.fa, fb: fm, mass: left_mass }, tol, depth + 1, out);
    refine(f, Segment { a: m, b: s.b, fa: fm, fb: s.fb, mass: right_mass }, tol, depth + 1, out);
}

/// What the samples are compared with.
pub enum Reference<'a> {
    Table(&'a ReferenceCdf),
    Curve(&'a DensityCurve),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    /// Largest gap between the empirical and reference distribution functions.
    pub ks_distance: f64,
    /// `Σ |observed fraction − reference probability|` over the bins.
    pub l1_distance: f64,
    /// Pearson χ² over the bins divided by `bins − 1`.
    pub chi2_per_dof: f64,
    pub sample_mean: f64,
    pub sample_count: u64,
    pub bins: usize,
}

/// Compares `samples` with `reference` using the KS distance and an
/// equal-probability histogram of `bins` bins.
pub fn goodness_of_fit(samples: &[f64], reference: Reference<'_>, bins: usize) -> Result<GofReport> {
    if samples.len() < 1000 {
        return Err(Error::Parameter(format!(
            "goodness of fit needs at least 1000 samples, got {}",
            samples.len()
        )));
    }
    if bins < 2 {
        return Err(Error::Parameter("bins must be at least 2".into()));
    }
    let owned;
    let table = match reference {
        Reference::Table(t) => t,
        Reference::Curve(c) => {
            owned = ReferenceCdf::from_curve(c)?;
            &owned
        }
    };
    let total = table.total_mass();
    if !((total - 1.0).abs() <= 1e-3) {
        return Err(Error::InvalidReference { mass: total });
    }
    let mut xs = samples.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Parameter("samples contain NaN".into()));
    }
    xs.par_sort_unstable_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let ks = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = table.cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .reduce(|| 0.0, f64::max);

    let p = total / bins as f64;
    let mut chi2 = 0.0;
    let mut l1 = 0.0;
    let mut start = 0;
    for j in 1..=bins {
        let end = if j == bins {
            n
        } else {
            let edge = table.quantile(j as f64 * p);
            xs.partition_point(|&x| x < edge)
        };
        let observed = (end - start) as f64;
        let expected = nf * p;
        chi2 += (observed - expected).powi(2) / expected;
        l1 += (observed / nf - p).abs();
        start = end;
    }
    Ok(GofReport {
        ks_distance: ks,
        l1_distance: l1,
        chi2_per_dof: chi2 / (bins - 1) as f64,
        sample_mean: xs.iter().sum::<f64>() / nf,
        sample_count: n as u64,
        bins,
    })
}

/// Two-sample KS distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
