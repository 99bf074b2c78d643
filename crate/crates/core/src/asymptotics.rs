//! Limits of the latent densities as `n, k → ∞` with `k/n → η`.
//!
//! With `β` the η-quantile of the row aggregate law `g_m`, the limits are
//! `g_{m−1}(β − x)·f_X(x)/g_m(β)` for addends and
//! `g_{m−1}(β/x)·f_X(x)/(g_m(β)·|x|)` for factors.

use serde::{Deserialize, Serialize};

use crate::curve::{central_interval, linspace, DensityCurve, Provenance};
use crate::distributions::{hetero_product_law, hetero_sum_law, DerivedLaw, Law, ParentDistribution};
use crate::error::{domain, Error, Result};
use crate::order_engine::{LatentDensity, LatentSpec, Role};
use crate::quad::{integrate_with_points, QuadTol};

/// η closer than this to 0 or 1 is rejected: the quantile is ill-conditioned.
pub const ETA_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub eta: f64,
    pub m: usize,
    pub role: Role,
}

impl ScalingSpec {
    pub fn new(eta: f64, m: usize, role: Role) -> Result<Self> {
        check_eta(eta)?;
        if m < 2 {
            return Err(Error::Parameter("the scaling limit needs m >= 2".into()));
        }
        Ok(Self { eta, m, role })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(domain("eta", eta, "must lie in (0, 1)"));
    }
    if eta <= ETA_MARGIN || eta >= 1.0 - ETA_MARGIN {
        return Err(domain("eta", eta, "must lie in (0.001, 0.999)"));
    }
    Ok(())
}

fn aggregate(parents: &[ParentDistribution], role: Role) -> Result<DerivedLaw> {
    match role {
        Role::Addend => hetero_sum_law(parents),
        Role::Factor => hetero_product_law(parents),
    }
}

/// η-quantile of the law of a row aggregate.
pub fn beta_of_eta(parents: &[ParentDistribution], role: Role, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    aggregate(parents, role)?.quantile(eta)
}

/// Limit density for rows whose entries follow `parents` (first is latent).
#[derive(Debug, Clone)]
pub struct AsymptoticDensity {
    spec: ScalingSpec,
    latent: ParentDistribution,
    rest: DerivedLaw,
    beta: f64,
    g_beta: f64,
}

impl AsymptoticDensity {
    /// Rows of `m` iid copies of `parent`.
    pub fn new(parent: ParentDistribution, m: usize, role: Role, eta: f64) -> Result<Self> {
        Self::hetero(&vec![parent; m.max(1)], role, eta)
    }

    pub fn hetero(parents: &[ParentDistribution], role: Role, eta: f64) -> Result<Self> {
        let spec = ScalingSpec::new(eta, parents.len(), role)?;
        let law = aggregate(parents, role)?;
        let beta = law.quantile(eta)?;
        let g_beta = law.pdf(beta);
        if !(g_beta > 1e-300 && g_beta.is_finite()) {
            return Err(Error::Degenerate(format!(
                "aggregate density at its {eta}-quantile {beta} is {g_beta}"
            )));
        }
        Ok(Self {
            spec,
            latent: parents[0],
            rest: aggregate(&parents[1..], role)?,
            beta,
            g_beta,
        })
    }

    pub fn spec(&self) -> ScalingSpec {
        self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        let fx = self.latent.pdf(x);
        match self.spec.role {
            Role::Addend => {
                if fx == 0.0 {
                    return Ok(0.0);
                }
                Ok(self.rest.pdf(self.beta - x) * fx / self.g_beta)
            }
            Role::Factor => {
                if x == 0.0 {
                    return Err(Error::Singular(0.0));
                }
                if fx == 0.0 {
                    return Ok(0.0);
                }
                Ok(self.rest.pdf(self.beta / x) * fx / (self.g_beta * x.abs()))
            }
        }
    }

    fn moment(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let (lo, hi) = self.latent.effective_range();
        let mut pts = self.latent.breakpoints();
        pts.push(0.0);
        let rb = self.rest.breakpoints();
        match self.spec.role {
            Role::Addend => pts.extend(rb.iter().map(|b| self.beta - b)),
            Role::Factor => pts.extend(rb.iter().filter(|b| **b != 0.0).map(|b| self.beta / b)),
        }
        // The integrand is evaluated at interior nodes only, so x = 0 is
        // never hit when it is a breakpoint.
        integrate_with_points(
            |x| self.density(x).map(|v| g(x) * v).unwrap_or(0.0),
            lo,
            hi,
            &pts,
            QuadTol::new(1e-12, 1e-10),
        )
        .checked("asymptotic density moment")
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.moment(|_| 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        self.moment(|x| x)
    }

    /// Tabulates the limit on `xs`; a grid point at exactly 0 in the factor
    /// role is an error.
    pub fn curve(&self, xs: &[f64]) -> Result<DensityCurve> {
        let pts = xs.iter().map(|&x| Ok((x, self.density(x)?))).collect::<Result<Vec<_>>>()?;
        DensityCurve::new(
            format!("{:?} limit eta={} m={}", self.spec.role, self.spec.eta, self.spec.m).to_lowercase(),
            None,
            pts,
            Provenance::Asymptotic,
            1e-10,
        )
    }
}

pub fn asymptotic_addend_density(parent: &ParentDistribution, m: usize, eta: f64, x: f64) -> Result<f64> {
    AsymptoticDensity::new(*parent, m, Role::Addend, eta)?.density(x)
}

pub fn asymptotic_factor_density(parents: &[ParentDistribution], m: usize, eta: f64, x: f64) -> Result<f64> {
    let ps = if parents.len() == 1 { vec![parents[0]; m] } else { parents.to_vec() };
    if ps.len() != m {
        return Err(Error::Parameter(format!("m = {m} but {} parent laws were given", ps.len())));
    }
    AsymptoticDensity::hetero(&ps, Role::Factor, eta)?.density(x)
}

/// Exact finite-`n` latent density next to its `η = k/n` limit.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub spec: LatentSpec,
    pub eta: f64,
    pub beta: f64,
    pub exact: DensityCurve,
    pub limit: DensityCurve,
    /// Trapezoid `∫|exact − limit|` over the shared grid.
    pub l1_distance: f64,
}

/// Compares the quadrature density at `(n, k)` with its limit on a grid of
/// `points` covering the central `1 − 1e−6` of both densities.
pub fn asymptotic_vs_exact_report(
    parents: &[ParentDistribution],
    spec: LatentSpec,
    points: usize,
) -> Result<AsymptoticReport> {
    spec.validate()?;
    let ps = if parents.len() == 1 { vec![parents[0]; spec.m] } else { parents.to_vec() };
    let eta = spec.k as f64 / spec.n as f64;
    let limit = AsymptoticDensity::hetero(&ps, spec.role, eta)?;
    let exact = LatentDensity::hetero(&ps, spec)?;
    let (lo, hi) = ps[0].effective_range();
    let lim_f = |x: f64| if x == 0.0 { Ok(0.0) } else { limit.density(x) };
    let (a1, b1) = central_interval(lim_f, lo, hi, 1.0 - 1e-6, 4001)?;
    let (a2, b2) = central_interval(|x| exact.density(x), lo, hi, 1.0 - 1e-6, 1001)?;
    let mut xs = linspace(a1.min(a2), b1.max(b2), points.max(3));
    if spec.role == Role::Factor {
        // Keep 0 off the grid: the limit has no value there.
        for x in xs.iter_mut().filter(|x| **x == 0.0) {
            *x = 1e-12;
        }
    }
    let exact_curve = exact.curve(&xs)?;
    let limit_curve = limit.curve(&xs)?;
    let l1 = exact_curve.l1_distance(&limit_curve)?;
    Ok(AsymptoticReport {
        spec,
        eta,
        beta: limit.beta(),
        exact: exact_curve,
        limit: limit_curve,
        l1_distance: l1,
    })
}
