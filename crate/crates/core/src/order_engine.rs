//! Densities of the latent addend or factor of the k-th smallest row
//! aggregate among n rows of m independent variates.
//!
//! With `S` the row aggregate, `R` the aggregate of the other `m − 1`
//! entries and `X` the observed entry, the latent density is
//!
//! ```text
//! n!/((k−1)!(n−k)!) · f_X(x) · E_R[ F_S(x ∘ R)^{k−1} (1 − F_S(x ∘ R))^{n−k} ]
//! ```
//!
//! where `∘` is `+` for addends and `×` for factors. The expectation is
//! taken by adaptive quadrature over the central `1 − 2e−12` of `R`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{DensityCurve, Provenance};
use crate::distributions::{hetero_product_law, hetero_sum_law, DerivedLaw, Law, ParentDistribution};
use crate::error::{Error, Result};
use crate::quad::{integrate_with_points, QuadTol};
use crate::special::ln_order_normalizer;

/// Probability left out on each side of the `R` law.
const RANGE_CUT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Addend,
    Factor,
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "addend" | "sum" => Ok(Self::Addend),
            "factor" | "product" => Ok(Self::Factor),
            _ => Err(Error::Parse(format!("unknown role {s:?}"))),
        }
    }
}

/// Which latent density: rank `k` (smallest is 1) among `n` rows of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub n: u64,
    pub k: u64,
    pub m: usize,
    pub role: Role,
}

impl LatentSpec {
    pub fn new(n: u64, k: u64, m: usize, role: Role) -> Result<Self> {
        let s = Self { n, k, m, role };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > self.n {
            return Err(Error::Parameter(format!(
                "rank k = {} must satisfy 1 <= k <= n = {}",
                self.k, self.n
            )));
        }
        if self.m < 1 {
            return Err(Error::Parameter("m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Density of the k-th order statistic of `n` iid draws from `parent`,
/// evaluated in log space.
pub fn order_statistic_density(parent: &ParentDistribution, n: u64, k: u64, x: f64) -> Result<f64> {
    LatentSpec::new(n, k, 1, Role::Addend)?;
    let fx = parent.pdf(x);
    if fx == 0.0 {
        return Ok(0.0);
    }
    Ok(fx * rank_kernel(ln_order_normalizer(n, k), n, k, parent.cdf(x), parent.sf(x)))
}

/// `K · F^{k−1} (1 − F)^{n−k}` with `K = exp(ln_norm)`.
fn rank_kernel(ln_norm: f64, n: u64, k: u64, cdf: f64, sf: f64) -> f64 {
    let mut ln = ln_norm;
    if k > 1 {
        if cdf <= 0.0 {
            return 0.0;
        }
        ln += (k - 1) as f64 * cdf.ln();
    }
    if n > k {
        if sf <= 0.0 {
            return 0.0;
        }
        ln += (n - k) as f64 * sf.ln();
    }
    ln.exp()
}

/// Evaluator for one latent density; caches the laws and the integration
/// range so repeated evaluation on a grid is cheap to set up.
#[derive(Debug, Clone)]
pub struct LatentDensity {
    spec: LatentSpec,
    latent: ParentDistribution,
    aggregate: DerivedLaw,
    rest: Option<DerivedLaw>,
    range: (f64, f64),
    rest_points: Vec<f64>,
    aggregate_points: Vec<f64>,
    peak: f64,
    ln_norm: f64,
    tol: QuadTol,
}

impl LatentDensity {
    /// Rows of `spec.m` iid copies of `parent`.
    pub fn new(parent: ParentDistribution, spec: LatentSpec) -> Result<Self> {
        spec.validate()?;
        Self::hetero(&vec![parent; spec.m], spec)
    }

    /// Rows whose entries follow `parents` in order; the first entry is the
    /// latent one. `spec.m` must equal `parents.len()`.
    pub fn hetero(parents: &[ParentDistribution], spec: LatentSpec) -> Result<Self> {
        spec.validate()?;
        if parents.len() != spec.m {
            return Err(Error::Parameter(format!(
                "m = {} but {} parent laws were given",
                spec.m,
                parents.len()
            )));
        }
        let build = |ps: &[ParentDistribution]| match spec.role {
            Role::Addend => hetero_sum_law(ps),
            Role::Factor => hetero_product_law(ps),
        };
        let aggregate = build(parents)?;
        let rest = if spec.m > 1 { Some(build(&parents[1..])?) } else { None };
        let (range, rest_points) = match &rest {
            Some(r) => ((r.quantile(RANGE_CUT)?, r.quantile(1.0 - RANGE_CUT)?), r.breakpoints()),
            None => ((0.0, 0.0), Vec::new()),
        };
        // Mode of the rank kernel as a function of the aggregate value.
        let peak = if spec.n > 1 {
            let p = (spec.k - 1) as f64 / (spec.n - 1) as f64;
            aggregate.quantile(p.clamp(1e-9, 1.0 - 1e-9))?
        } else {
            f64::NAN
        };
        Ok(Self {
            spec,
            latent: parents[0],
            aggregate_points: aggregate.breakpoints(),
            aggregate,
            rest,
            range,
            rest_points,
            peak,
            ln_norm: ln_order_normalizer(spec.n, spec.k),
            tol: QuadTol::new(1e-13, 1e-10),
        })
    }

    pub fn with_tolerance(mut self, tol: QuadTol) -> Self {
        self.tol = tol;
        self
    }

    pub fn spec(&self) -> LatentSpec {
        self.spec
    }

    pub fn latent_parent(&self) -> &ParentDistribution {
        &self.latent
    }

    /// Law of the full row aggregate.
    pub fn aggregate_law(&self) -> &DerivedLaw {
        &self.aggregate
    }

    fn kernel(&self, s: f64) -> f64 {
        let (cdf, sf) = self.aggregate.cdf_sf(s);
        rank_kernel(self.ln_norm, self.spec.n, self.spec.k, cdf, sf)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        let fx = self.latent.pdf(x);
        if fx == 0.0 || !x.is_finite() {
            return Ok(0.0);
        }
        let rest = match &self.rest {
            None => return Ok(fx * self.kernel(x)),
            Some(r) => r,
        };
        if self.spec.n == 1 {
            return Ok(fx);
        }
        let (lo, hi) = self.range;
        let mut pts = self.rest_points.clone();
        let expectation = match self.spec.role {
            Role::Addend => {
                pts.extend(self.aggregate_points.iter().map(|b| b - x));
                pts.push(self.peak - x);
                integrate_with_points(|t| rest.pdf(t) * self.kernel(x + t), lo, hi, &pts, self.tol)
            }
            Role::Factor => {
                if x == 0.0 {
                    return Ok(fx * self.kernel(0.0));
                }
                pts.extend(self.aggregate_points.iter().map(|b| b / x));
                pts.push(self.peak / x);
                integrate_with_points(|v| rest.pdf(v) * self.kernel(x * v), lo, hi, &pts, self.tol)
            }
        };
        Ok(fx * expectation.checked("latent density expectation")?)
    }

    /// Finite interval carrying essentially all of the latent mass.
    pub fn effective_range(&self) -> (f64, f64) {
        self.latent.effective_range()
    }

    /// Points where the density may have kinks or peaks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = self.latent.breakpoints();
        pts.push(0.0);
        pts
    }

    /// `∫ g(x) f(x) dx` over the latent support.
    fn integrate_moment(&self, g: impl Fn(f64) -> f64 + Sync, tol: QuadTol, what: &str) -> Result<f64> {
        let (lo, hi) = self.effective_range();
        let pts = self.breakpoints();
        let failure = std::sync::Mutex::new(None);
        let r = integrate_with_points(
            |x| match self.density(x) {
                Ok(v) => g(x) * v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            &pts,
            tol,
        );
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        r.checked(what)
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.integrate_moment(|_| 1.0, QuadTol::new(1e-9, 1e-9), "latent density mass")
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate_moment(|x| x, QuadTol::new(1e-8, 1e-8), "latent mean")
    }

    /// Evaluates the density on `xs` in parallel; output order follows `xs`.
    pub fn curve(&self, xs: &[f64]) -> Result<DensityCurve> {
        let ys = xs.par_iter().map(|&x| self.density(x)).collect::<Result<Vec<f64>>>()?;
        DensityCurve::new(
            format!("{:?} n={} k={} m={}", self.spec.role, self.spec.n, self.spec.k, self.spec.m).to_lowercase(),
            Some(self.spec),
            xs.iter().cloned().zip(ys).collect(),
            Provenance::Quadrature,
            self.tol.abs.max(1e-8),
        )
    }
}

/// Latent addend density for rows of iid `parent` entries.
pub fn latent_addend_density(parent: &ParentDistribution, spec: LatentSpec, x: f64) -> Result<f64> {
    expect_role(spec, Role::Addend)?;
    LatentDensity::new(*parent, spec)?.density(x)
}

/// Latent factor density for rows of iid `parent` entries.
pub fn latent_factor_density(parent: &ParentDistribution, spec: LatentSpec, x: f64) -> Result<f64> {
    expect_role(spec, Role::Factor)?;
    LatentDensity::new(*parent, spec)?.density(x)
}

/// Latent factor density when row entries follow different laws; the first
/// listed law is the latent one.
pub fn latent_factor_density_hetero(parents: &[ParentDistribution], spec: LatentSpec, x: f64) -> Result<f64> {
    expect_role(spec, Role::Factor)?;
    LatentDensity::hetero(parents, spec)?.density(x)
}

/// Mean of a latent density, by quadrature.
pub fn latent_mean(parents: &[ParentDistribution], spec: LatentSpec) -> Result<f64> {
    let ps = if parents.len() == 1 && spec.m > 1 {
        vec![parents[0]; spec.m]
    } else {
        parents.to_vec()
    };
    LatentDensity::hetero(&ps, spec)?.mean()
}

fn expect_role(spec: LatentSpec, role: Role) -> Result<()> {
    if spec.role == role {
        Ok(())
    } else {
        Err(Error::Parameter(format!("expected role {role:?}, got {:?}", spec.role)))
    }
}
