use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Law, ParentDistribution, LAW_TOL};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_points, QuadTol};
use crate::rng::CounterRng;
use crate::special::{erf_raw, k0_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Sum,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawForm {
    /// A closed-form density is known; the tag names it.
    ClosedForm(&'static str),
    /// Density obtained by convolution or Mellin quadrature.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
enum Closed {
    Parent(ParentDistribution),
    /// Sum of two `Uniform(a, b)`.
    Triangular { a: f64, b: f64 },
    /// Sum of two `Rayleigh(σ)`.
    RayleighSum { sigma: f64 },
    /// Product of two `Uniform(0, 1)`.
    UniformProduct,
    /// Product of two `Normal(0, σ²)`.
    NormalProduct { sigma2: f64 },
}

/// Law of the sum or product of independent variates.
///
/// Every law with two or more parents also keeps a split `head · rest`
/// (or `head + rest`), used for distribution functions by conditioning on
/// the head variate, and as the whole evaluation path when no closed form
/// is known.
#[derive(Debug, Clone)]
pub struct DerivedLaw {
    aggregate: Aggregate,
    parents: Vec<ParentDistribution>,
    closed: Option<(Closed, &'static str)>,
    split: Option<(ParentDistribution, Box<DerivedLaw>)>,
    median: OnceLock<f64>,
}

/// Law of the sum of `m` iid copies of `parent`.
pub fn sum_law(parent: ParentDistribution, m: usize) -> Result<DerivedLaw> {
    DerivedLaw::new(Aggregate::Sum, vec![parent; m])
}

/// Law of the product of `m` iid copies of `parent`.
pub fn product_law(parent: ParentDistribution, m: usize) -> Result<DerivedLaw> {
    DerivedLaw::new(Aggregate::Product, vec![parent; m])
}

/// Law of the product of independent, not identically distributed factors.
/// `Gamma(2, θ) × Uniform(0, 1)` is recognised as `Exponential(1/θ)`.
pub fn hetero_product_law(parents: &[ParentDistribution]) -> Result<DerivedLaw> {
    DerivedLaw::new(Aggregate::Product, parents.to_vec())
}

/// Law of the sum of independent, not identically distributed addends.
pub fn hetero_sum_law(parents: &[ParentDistribution]) -> Result<DerivedLaw> {
    DerivedLaw::new(Aggregate::Sum, parents.to_vec())
}

fn all_same(ps: &[ParentDistribution]) -> bool {
    ps.windows(2).all(|w| w[0] == w[1])
}

fn closed_form(aggregate: Aggregate, ps: &[ParentDistribution]) -> Option<(Closed, &'static str)> {
    use ParentDistribution as P;
    if ps.len() == 1 {
        return Some((Closed::Parent(ps[0]), "parent"));
    }
    let m = ps.len() as f64;
    match aggregate {
        Aggregate::Sum => {
            if ps.iter().all(|p| matches!(p, P::Normal { .. })) {
                let (mu, s2) = ps.iter().fold((0.0, 0.0), |(mu, s2), p| match *p {
                    P::Normal { mu: a, sigma2: b } => (mu + a, s2 + b),
                    _ => unreachable!(),
                });
                return Some((Closed::Parent(P::Normal { mu, sigma2: s2 }), "normal"));
            }
            if !all_same(ps) {
                return None;
            }
            match ps[0] {
                P::Uniform { a, b } if ps.len() == 2 => Some((Closed::Triangular { a, b }, "triangular")),
                P::Exponential { lambda } => Some((
                    Closed::Parent(P::Gamma { shape: m, scale: 1.0 / lambda }),
                    "erlang",
                )),
                P::Gamma { shape, scale } => {
                    Some((Closed::Parent(P::Gamma { shape: m * shape, scale }), "gamma"))
                }
                P::Rayleigh { sigma } if ps.len() == 2 => {
                    Some((Closed::RayleighSum { sigma }, "rayleigh_sum"))
                }
                _ => None,
            }
        }
        Aggregate::Product => {
            if ps.len() != 2 {
                return None;
            }
            match (ps[0], ps[1]) {
                (P::Uniform { a: 0.0, b: 1.0 }, P::Uniform { a: 0.0, b: 1.0 }) => {
                    Some((Closed::UniformProduct, "uniform_product"))
                }
                (P::Normal { mu: 0.0, sigma2: s1 }, P::Normal { mu: 0.0, sigma2: s2 }) if s1 == s2 => {
                    Some((Closed::NormalProduct { sigma2: s1 }, "normal_product"))
                }
                (P::Gamma { shape, scale }, P::Uniform { a: 0.0, b: 1.0 })
                | (P::Uniform { a: 0.0, b: 1.0 }, P::Gamma { shape, scale })
                    if shape == 2.0 =>
                {
                    Some((
                        Closed::Parent(P::Exponential { lambda: 1.0 / scale }),
                        "gamma_uniform_exponential",
                    ))
                }
                _ => None,
            }
        }
    }
}

/// Product treating `0 · ∞` as 0 (interval corner arithmetic).
fn corner_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn product_interval((a, b): (f64, f64), (c, d): (f64, f64)) -> (f64, f64) {
    let corners = [corner_mul(a, c), corner_mul(a, d), corner_mul(b, c), corner_mul(b, d)];
    let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

impl DerivedLaw {
    pub fn new(aggregate: Aggregate, parents: Vec<ParentDistribution>) -> Result<Self> {
        if parents.is_empty() {
            return Err(Error::Parameter("a derived law needs m >= 1 parents".into()));
        }
        for p in &parents {
            p.validated()?;
        }
        let closed = closed_form(aggregate, &parents);
        let split = if parents.len() > 1 {
            let rest = DerivedLaw::new(aggregate, parents[1..].to_vec())?;
            Some((parents[0], Box::new(rest)))
        } else {
            None
        };
        Ok(Self {
            aggregate,
            parents,
            closed,
            split,
            median: OnceLock::new(),
        })
    }

    /// Drops the closed form (if any) so every evaluation goes through
    /// quadrature. Laws with a single parent are unchanged.
    pub fn force_numeric(mut self) -> Self {
        if self.split.is_some() {
            self.closed = None;
        }
        self
    }

    pub fn aggregate(&self) -> Aggregate {
        self.aggregate
    }

    pub fn m(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[ParentDistribution] {
        &self.parents
    }

    pub fn form(&self) -> LawForm {
        match &self.closed {
            Some((_, tag)) => LawForm::ClosedForm(tag),
            None => LawForm::Numeric,
        }
    }

    /// The law as a single parent distribution, when it is one.
    pub fn as_parent(&self) -> Option<ParentDistribution> {
        match self.closed {
            Some((Closed::Parent(p), _)) => Some(p),
            _ => None,
        }
    }

    /// Draws the parents in order and aggregates them.
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        match self.aggregate {
            Aggregate::Sum => self.parents.iter().map(|p| p.sample(rng)).sum(),
            Aggregate::Product => self.parents.iter().map(|p| p.sample(rng)).product(),
        }
    }

    fn split(&self) -> (&ParentDistribution, &DerivedLaw) {
        let (h, t) = self.split.as_ref().expect("derived law with m >= 2");
        (h, t)
    }

    /// Density by conditioning on the head variate.
    fn numeric_pdf(&self, x: f64) -> f64 {
        let (head, tail) = self.split();
        let (lh, hh) = head.effective_range();
        let (lt, ht) = tail.effective_range();
        let v = match self.aggregate {
            Aggregate::Sum => {
                let a = lh.max(x - ht);
                let b = hh.min(x - lt);
                if a >= b {
                    return 0.0;
                }
                let mut pts = head.breakpoints();
                pts.extend(tail.breakpoints().iter().map(|t| x - t));
                let pts = sorted_unique(pts);
                integrate_with_points(|y| head.pdf(y) * tail.pdf(x - y), a, b, &pts, LAW_TOL).value
            }
            Aggregate::Product => {
                let pts = self.product_points(x, head, tail);
                let f = |y: f64| {
                    if y == 0.0 {
                        0.0
                    } else {
                        head.pdf(y) * tail.pdf(x / y) / y.abs()
                    }
                };
                integrate_with_points(f, lh, hh, &pts, LAW_TOL).value
            }
        };
        if v.is_finite() {
            v.max(0.0)
        } else {
            0.0
        }
    }

    fn product_points(&self, x: f64, head: &ParentDistribution, tail: &DerivedLaw) -> Vec<f64> {
        let (lt, ht) = tail.effective_range();
        let mut pts = head.breakpoints();
        pts.push(0.0);
        let mut tb = tail.breakpoints();
        tb.extend([lt, ht]);
        pts.extend(tb.iter().filter(|t| **t != 0.0).map(|t| x / t));
        sorted_unique(pts)
    }

    fn median(&self) -> f64 {
        *self
            .median
            .get_or_init(|| super::invert_cdf(&ConditionedCdf(self), 0.5).unwrap_or(0.0))
    }

    /// `(cdf, sf)` by conditioning on the head variate. Only the smaller
    /// tail is integrated; the other follows by complement.
    fn numeric_cdf_sf(&self, x: f64) -> (f64, f64) {
        let (lo, hi) = self.support();
        if x <= lo {
            return (0.0, 1.0);
        }
        if x >= hi {
            return (1.0, 0.0);
        }
        if x <= self.median() {
            let c = self.conditioned(x, true).clamp(0.0, 1.0);
            (c, 1.0 - c)
        } else {
            let s = self.conditioned(x, false).clamp(0.0, 1.0);
            (1.0 - s, s)
        }
    }

    /// `P(aggregate <= x)` when `lower`, else `P(aggregate > x)`.
    fn conditioned(&self, x: f64, lower: bool) -> f64 {
        let (head, tail) = self.split();
        let (lh, hh) = head.effective_range();
        let (lt, ht) = tail.effective_range();
        // Tail probability of the rest, on the requested or opposite side.
        let same = |r: f64| if lower { tail.cdf(r) } else { tail.sf(r) };
        let flip = |r: f64| if lower { tail.sf(r) } else { tail.cdf(r) };
        match self.aggregate {
            Aggregate::Sum => {
                if x <= lh + lt {
                    return if lower { 0.0 } else { 1.0 };
                }
                if x >= hh + ht {
                    return if lower { 1.0 } else { 0.0 };
                }
                let a = lh.max(x - ht);
                let b = hh.min(x - lt);
                let mut pts = head.breakpoints();
                pts.extend(tail.breakpoints().iter().map(|t| x - t));
                let pts = sorted_unique(pts);
                let outside = if lower { head.cdf(a) } else { head.sf(b) };
                outside + integrate_with_points(|y| head.pdf(y) * same(x - y), a, b, &pts, LAW_TOL).value
            }
            Aggregate::Product => {
                let pts = self.product_points(x, head, tail);
                let mut v = 0.0;
                if hh > 0.0 {
                    let a = lh.max(0.0);
                    v += integrate_with_points(|y| head.pdf(y) * same(x / y), a, hh, &pts, LAW_TOL).value;
                }
                if lh < 0.0 {
                    let b = hh.min(0.0);
                    v += integrate_with_points(|y| head.pdf(y) * flip(x / y), lh, b, &pts, LAW_TOL).value;
                }
                v
            }
        }
    }
}

/// The conditioning cdf of a law, used to locate its median.
struct ConditionedCdf<'a>(&'a DerivedLaw);

impl Law for ConditionedCdf<'_> {
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.0.conditioned(x, true).clamp(0.0, 1.0)
    }
    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
    fn effective_range(&self) -> (f64, f64) {
        self.0.effective_range()
    }
}

/// Bickley function `Ki₁(x) = ∫ₓ^∞ K₀(t) dt = ∫₀^{π/2} exp(−x / cos θ) dθ`.
fn bickley_ki1(x: f64) -> f64 {
    let f = |t: f64| {
        let c = t.cos();
        if c <= 0.0 {
            0.0
        } else {
            (-x / c).exp()
        }
    };
    integrate(f, 0.0, std::f64::consts::FRAC_PI_2, QuadTol::new(1e-17, 1e-13)).value
}

/// `(cdf, sf)` of the sum of two `Rayleigh(σ)` variates.
fn rayleigh_sum_cdf_sf(sigma: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x == f64::INFINITY {
        return (1.0, 0.0);
    }
    let r = x * x / sigma;
    let cross = x * (std::f64::consts::PI / (2.0 * sigma)).sqrt() * (-0.5 * r).exp() * erf_raw(x / (2.0 * sigma).sqrt());
    let sf = ((-r).exp() + cross).min(1.0);
    let cdf = if sf > 0.5 { -(-r).exp_m1() - cross } else { 1.0 - sf };
    (cdf.max(0.0), sf)
}

/// `(cdf, sf)` of the product of two `Normal(0, σ²)` variates.
fn normal_product_cdf_sf(sigma2: f64, x: f64) -> (f64, f64) {
    let t = bickley_ki1(x.abs() / sigma2) / std::f64::consts::PI;
    if x >= 0.0 {
        (1.0 - t, t)
    } else {
        (t, 1.0 - t)
    }
}

fn triangular_cdf(a: f64, b: f64, x: f64) -> f64 {
    let w = b - a;
    let s = x - 2.0 * a;
    if s <= 0.0 {
        0.0
    } else if s <= w {
        s * s / (2.0 * w * w)
    } else if s < 2.0 * w {
        let r = 2.0 * w - s;
        1.0 - r * r / (2.0 * w * w)
    } else {
        1.0
    }
}

impl Law for DerivedLaw {
    fn pdf(&self, x: f64) -> f64 {
        match &self.closed {
            Some((Closed::Parent(p), _)) => p.pdf(x),
            Some((Closed::Triangular { a, b }, _)) => {
                let w = b - a;
                let s = x - 2.0 * a;
                if !(0.0..=2.0 * w).contains(&s) {
                    0.0
                } else if s <= w {
                    s / (w * w)
                } else {
                    (2.0 * w - s) / (w * w)
                }
            }
            Some((Closed::RayleighSum { sigma }, _)) => {
                if x < 0.0 {
                    return 0.0;
                }
                let s = *sigma;
                let r = x * x / s;
                let v = x / s * (-r).exp()
                    + (std::f64::consts::PI / (2.0 * s)).sqrt()
                        * (-0.5 * r).exp()
                        * erf_raw(x / (2.0 * s).sqrt())
                        * (r - 1.0);
                v.max(0.0)
            }
            Some((Closed::UniformProduct, _)) => {
                if x > 0.0 && x <= 1.0 {
                    -x.ln()
                } else {
                    0.0
                }
            }
            Some((Closed::NormalProduct { sigma2 }, _)) => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    k0_raw(x.abs() / sigma2) / (std::f64::consts::PI * sigma2)
                }
            }
            None => self.numeric_pdf(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        self.cdf_sf(x).0
    }

    fn sf(&self, x: f64) -> f64 {
        self.cdf_sf(x).1
    }

    fn cdf_sf(&self, x: f64) -> (f64, f64) {
        match &self.closed {
            Some((Closed::Parent(p), _)) => (p.cdf(x), p.sf(x)),
            Some((Closed::Triangular { a, b }, _)) => (triangular_cdf(*a, *b, x), triangular_cdf(-*b, -*a, -x)),
            Some((Closed::UniformProduct, _)) => {
                let c = if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    x - x * x.ln()
                };
                (c, 1.0 - c)
            }
            Some((Closed::RayleighSum { sigma }, _)) => rayleigh_sum_cdf_sf(*sigma, x),
            Some((Closed::NormalProduct { sigma2 }, _)) => normal_product_cdf_sf(*sigma2, x),
            None => self.numeric_cdf_sf(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        if let Some((Closed::Parent(p), _)) = &self.closed {
            return p.support();
        }
        let (head, tail) = self.split();
        let (h, t) = (head.support(), tail.support());
        match self.aggregate {
            Aggregate::Sum => (h.0 + t.0, h.1 + t.1),
            Aggregate::Product => product_interval(h, t),
        }
    }

    fn effective_range(&self) -> (f64, f64) {
        match &self.closed {
            Some((Closed::Parent(p), _)) => return p.effective_range(),
            Some((Closed::UniformProduct, _)) => return (0.0, 1.0),
            Some((Closed::NormalProduct { sigma2 }, _)) => return (-36.0 * sigma2, 36.0 * sigma2),
            _ => {}
        }
        let (head, tail) = self.split();
        let (h, t) = (head.effective_range(), tail.effective_range());
        match self.aggregate {
            Aggregate::Sum => (h.0 + t.0, h.1 + t.1),
            Aggregate::Product => product_interval(h, t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.closed {
            Some((Closed::Parent(p), _)) => return p.breakpoints(),
            Some((Closed::Triangular { a, b }, _)) => return vec![2.0 * a, a + b, 2.0 * b],
            Some((Closed::RayleighSum { .. }, _)) => return vec![0.0],
            Some((Closed::UniformProduct, _)) => return vec![0.0, 1.0],
            Some((Closed::NormalProduct { .. }, _)) => return vec![0.0],
            None => {}
        }
        let (head, tail) = self.split();
        let (hb, tb) = (head.breakpoints(), tail.breakpoints());
        let mut pts = Vec::new();
        for h in &hb {
            for t in &tb {
                pts.push(match self.aggregate {
                    Aggregate::Sum => h + t,
                    Aggregate::Product => h * t,
                });
            }
        }
        if self.aggregate == Aggregate::Product {
            let (lo, hi) = self.support();
            if lo <= 0.0 && hi >= 0.0 {
                pts.push(0.0);
            }
        }
        sorted_unique(pts)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        match &self.closed {
            Some((Closed::Parent(d), _)) => d.quantile(p),
            _ => super::invert_cdf(self, p),
        }
    }
}
