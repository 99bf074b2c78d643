//! Cache sizing for a catalogue ranked by importance (size × popularity).
//!
//! The closed-form results assume Gamma(2, 1) sizes and Uniform(0, 1)
//! popularities, whose importance is Exp(1). Sizes are in bits, popularity
//! in requests per second, importance in bits per second.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ParentDistribution;
use crate::error::{domain, Error, Result};
use crate::order_engine::{latent_factor_density_hetero, LatentDensity, LatentSpec, Role};
use crate::rng::CounterRng;
use crate::special::{harmonic, ln_binomial, ln_factorial, ln_pochhammer_abs, EULER_GAMMA};

/// Largest catalogue for which the alternating series is ever used.
pub const SERIES_MAX_N: u64 = 60;
/// Largest tolerated rounding error of the alternating series before
/// falling back to quadrature.
const SERIES_ABS_ERROR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogModel {
    pub n: u64,
    pub size_dist: ParentDistribution,
    pub popularity_dist: ParentDistribution,
}

impl CatalogModel {
    pub fn new(n: u64, size_dist: ParentDistribution, popularity_dist: ParentDistribution) -> Result<Self> {
        if n < 1 {
            return Err(Error::Parameter("catalogue size n must be at least 1".into()));
        }
        Ok(Self {
            n,
            size_dist: size_dist.validated()?,
            popularity_dist: popularity_dist.validated()?,
        })
    }

    /// Gamma(2, 1) sizes with Uniform(0, 1) popularities.
    pub fn reference(n: u64) -> Result<Self> {
        Self::new(n, ParentDistribution::gamma(2.0, 1.0)?, ParentDistribution::uniform(0.0, 1.0)?)
    }

    pub fn is_reference(&self) -> bool {
        let r = Self::reference(self.n).unwrap();
        self.size_dist == r.size_dist && self.popularity_dist == r.popularity_dist
    }

    /// Size density of the most important file, by quadrature, for any model.
    pub fn most_important_size(&self) -> Result<LatentDensity> {
        LatentDensity::hetero(
            &[self.size_dist, self.popularity_dist],
            LatentSpec::new(self.n, self.n, 2, Role::Factor)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Asymptotic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheReport {
    pub q: u64,
    pub n: u64,
    pub expected_bytes: f64,
    pub ratio: f64,
    pub method: Method,
    pub standard_error: Option<f64>,
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(domain("cache_sizing", 0.0, "catalogue size n must be at least 1"));
    }
    Ok(())
}

fn check_q(q: u64, n: u64) -> Result<()> {
    check_n(n)?;
    if q < 1 || q > n {
        return Err(domain("cache_sizing", q as f64, "q must lie in [1, n]"));
    }
    Ok(())
}

/// Neumaier-compensated sum; also returns Σ|t| for an error bound.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut s, mut c, mut abs) = (0.0f64, 0.0f64, 0.0f64);
    for t in terms {
        let u = s + t;
        c += if s.abs() >= t.abs() { (s - u) + t } else { (t - u) + s };
        s = u;
        abs += t.abs();
    }
    (s + c, abs)
}

/// The alternating series for the density and its rounding-error bound.
fn size_density_series(n: u64, x: f64) -> (f64, f64) {
    let lead = n as f64 * (-x).exp() * (x - harmonic(n - 1));
    let ln_n_choose = |j: u64| ln_binomial(n, j);
    let (s, abs) = compensated_sum(std::iter::once(lead).chain((2..=n).map(|j| {
        let jf = j as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * (ln_n_choose(j) - jf * x).exp() * jf / (jf - 1.0)
    })));
    (s, abs * 4.0 * f64::EPSILON)
}

/// Size density of the most important of `n` files (reference model).
///
/// Small catalogues use the alternating binomial series; where its
/// cancellation could cost more than 1e-12 absolute, and for every
/// `n > SERIES_MAX_N`, the density comes from quadrature of the latent
/// factor density instead.
pub fn most_important_size_density(n: u64, x: f64) -> Result<f64> {
    check_n(n)?;
    if x.is_nan() {
        return Err(domain("most_important_size_density", x, "NaN argument"));
    }
    if x <= 0.0 || x.is_infinite() {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(x * (-x).exp());
    }
    if n <= SERIES_MAX_N {
        let (v, err) = size_density_series(n, x);
        if err <= SERIES_ABS_ERROR {
            return Ok(v.max(0.0));
        }
    }
    let model = CatalogModel::reference(n)?;
    latent_factor_density_hetero(
        &[model.size_dist, model.popularity_dist],
        LatentSpec::new(n, n, 2, Role::Factor)?,
        x,
    )
}

/// Mean size of the most important file: 1 + 1/n + H_{n−1}.
pub fn expected_max_importance_size(n: u64) -> Result<f64> {
    check_n(n)?;
    Ok(1.0 + 1.0 / n as f64 + harmonic(n - 1))
}

/// Harmonic-number bounds `(lower, upper)` on the mean size of the most
/// important file, 1 + 1/n + γ + ln(n−1) and 1 + 1/n + γ + ln n.
pub fn expected_max_importance_bounds(n: u64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(domain("expected_max_importance_bounds", n as f64, "needs n >= 2"));
    }
    let base = 1.0 + 1.0 / n as f64 + EULER_GAMMA;
    Ok((base + ((n - 1) as f64).ln(), base + (n as f64).ln()))
}

/// Large-catalogue mean size of the k-th least important file,
/// 1 − ln(1 − k/n). Undefined for the most important file (k = n).
pub fn expected_kth_size_asymptotic(k: u64, n: u64) -> Result<f64> {
    check_n(n)?;
    if k == n {
        return Err(domain(
            "expected_kth_size_asymptotic",
            k as f64,
            "k = n has no asymptotic form; use expected_max_importance_size",
        ));
    }
    if k < 1 || k > n {
        return Err(domain("expected_kth_size_asymptotic", k as f64, "k must lie in [1, n - 1]"));
    }
    Ok(1.0 - (-(k as f64) / n as f64).ln_1p())
}

/// Mean total size of the `q` most important files: the exact term for the
/// top file plus asymptotic terms for the next `q − 1`.
pub fn cumulative_expected_size(q: u64, n: u64) -> Result<f64> {
    check_q(q, n)?;
    let rest: f64 = (n - q + 1..n).map(|i| expected_kth_size_asymptotic(i, n)).sum::<Result<f64>>()?;
    let direct = expected_max_importance_size(n)? + rest;
    let pochhammer = expected_max_importance_size(n)? + rest_pochhammer(q, n)?;
    if (direct - pochhammer).abs() > 1e-8 * direct.abs() {
        return Err(Error::Convergence {
            what: "cumulative_expected_size cross-check".into(),
            partial: direct,
            error: (direct - pochhammer).abs(),
        });
    }
    Ok(direct)
}

/// Sum of the `q − 1` asymptotic terms written with the Pochhammer symbol,
/// q − 1 − ln(−(−1/n)^q · n · (1 − q)_{q−1}), evaluated in log space.
pub fn rest_pochhammer(q: u64, n: u64) -> Result<f64> {
    check_q(q, n)?;
    let (ln_poch, poch_sign) = ln_pochhammer_abs(1.0 - q as f64, q - 1)?;
    let sign = -(if q.is_multiple_of(2) { 1.0 } else { -1.0 }) * poch_sign;
    if sign <= 0.0 {
        return Err(domain("rest_pochhammer", q as f64, "non-positive logarithm argument"));
    }
    let ln_arg = -(q as f64) * (n as f64).ln() + (n as f64).ln() + ln_poch;
    Ok(q as f64 - 1.0 - ln_arg)
}

/// The simplified form (q − 1)(1 + ln n) − ln((q − 1)!).
pub fn rest_simplified(q: u64, n: u64) -> Result<f64> {
    check_q(q, n)?;
    Ok((q - 1) as f64 * (1.0 + (n as f64).ln()) - ln_factorial(q - 1))
}

/// Fraction of the catalogue's bytes held by the `q` most important files.
pub fn cache_ratio(q: u64, n: u64) -> Result<f64> {
    Ok(cumulative_expected_size(q, n)? / cumulative_expected_size(n, n)?)
}

pub fn cache_report(q: u64, n: u64) -> Result<CacheReport> {
    Ok(CacheReport {
        q,
        n,
        expected_bytes: cumulative_expected_size(q, n)?,
        ratio: cache_ratio(q, n)?,
        method: if q == 1 { Method::Exact } else { Method::Asymptotic },
        standard_error: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub standard_error: f64,
    pub replications: u64,
    /// Mean total size of the top `q` files.
    pub mean_top: f64,
    pub mean_total: f64,
}

/// Simulated catalogues: per replication, rank `n` sampled files by
/// importance and sum the sizes of the top `q`. Returns the ratio of mean
/// top-`q` size to mean total size with a jackknife standard error.
pub fn mc_cache_ratio(model: &CatalogModel, q: u64, replications: u64, seed: u64) -> Result<RatioEstimate> {
    check_q(q, model.n)?;
    if replications < 100 {
        return Err(Error::Parameter("mc_cache_ratio needs at least 100 replications".into()));
    }
    let n = model.n as usize;
    let q = q as usize;
    let sums: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |files: &mut Vec<(f64, f64)>, r| {
                let mut rng = CounterRng::new(seed, r);
                files.clear();
                for _ in 0..n {
                    let size = model.size_dist.sample(&mut rng);
                    let pop = model.popularity_dist.sample(&mut rng);
                    files.push((size * pop, size));
                }
                if q < n {
                    files.select_nth_unstable_by(q - 1, |a, b| b.0.total_cmp(&a.0));
                }
                let top: f64 = files[..q].iter().map(|f| f.1).sum();
                let total = top + files[q..].iter().map(|f| f.1).sum::<f64>();
                (top, total)
            },
        )
        .collect();
    let rf = replications as f64;
    let sum_top: f64 = sums.iter().map(|s| s.0).sum();
    let sum_total: f64 = sums.iter().map(|s| s.1).sum();
    let ratio = sum_top / sum_total;
    let loo: Vec<f64> = sums.iter().map(|&(t, a)| (sum_top - t) / (sum_total - a)).collect();
    let loo_mean = loo.iter().sum::<f64>() / rf;
    let var = loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>() * (rf - 1.0) / rf;
    Ok(RatioEstimate {
        ratio,
        standard_error: var.sqrt(),
        replications,
        mean_top: sum_top / rf,
        mean_total: sum_total / rf,
    })
}

#[cfg(test)]
mod tests;
