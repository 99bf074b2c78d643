use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_probability, Law, RANGE_TAIL};
use crate::error::{Error, Result};
use crate::quad::integrate_with_points;
use crate::rng::CounterRng;
use crate::special::{ln_gamma, norm_cdf, norm_quantile, norm_sf};

/// Largest integer Gamma shape handled through Erlang formulas and sums of
/// exponentials.
const ERLANG_MAX_SHAPE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParentDistribution {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma2: f64 },
    /// Rate parameterisation: density `λ·exp(−λx)`.
    Exponential { lambda: f64 },
    /// Density `(2x/σ)·exp(−x²/σ)` for `x ≥ 0`.
    Rayleigh { sigma: f64 },
    Gamma { shape: f64, scale: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and positive, got {v}")))
    }
}

impl ParentDistribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::Uniform { a, b }.validated()
    }
    pub fn normal(mu: f64, sigma2: f64) -> Result<Self> {
        Self::Normal { mu, sigma2 }.validated()
    }
    pub fn exponential(lambda: f64) -> Result<Self> {
        Self::Exponential { lambda }.validated()
    }
    pub fn rayleigh(sigma: f64) -> Result<Self> {
        Self::Rayleigh { sigma }.validated()
    }
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::Gamma { shape, scale }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Parameter(format!(
                        "uniform needs finite a < b, got ({a}, {b})"
                    )));
                }
            }
            Self::Normal { mu, sigma2 } => {
                if !mu.is_finite() {
                    return Err(Error::Parameter(format!("mu must be finite, got {mu}")));
                }
                positive("sigma2", sigma2)?;
            }
            Self::Exponential { lambda } => positive("lambda", lambda)?,
            Self::Rayleigh { sigma } => positive("sigma", sigma)?,
            Self::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)?;
            }
        }
        Ok(self)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::Normal { mu, .. } => mu,
            Self::Exponential { lambda } => 1.0 / lambda,
            Self::Rayleigh { sigma } => 0.5 * (std::f64::consts::PI * sigma).sqrt(),
            Self::Gamma { shape, scale } => shape * scale,
        }
    }

    /// True when the support is contained in `[0, ∞)`.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            Self::Uniform { a, .. } => a >= 0.0,
            Self::Normal { .. } => false,
            _ => true,
        }
    }

    fn erlang_shape(&self) -> Option<u64> {
        match *self {
            Self::Gamma { shape, .. } if shape.fract() == 0.0 && shape <= ERLANG_MAX_SHAPE => {
                Some(shape as u64)
            }
            _ => None,
        }
    }

    /// Draws one variate by inverse transform (Gamma with integer shape is a
    /// sum of exponentials).
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        match *self {
            Self::Uniform { a, b } => a + (b - a) * rng.next_f64(),
            Self::Normal { mu, sigma2 } => mu + sigma2.sqrt() * norm_quantile(rng.next_open01()),
            Self::Exponential { lambda } => -(-rng.next_f64()).ln_1p() / lambda,
            Self::Rayleigh { sigma } => (-sigma * (-rng.next_f64()).ln_1p()).sqrt(),
            Self::Gamma { scale, .. } => match self.erlang_shape() {
                Some(k) => {
                    let s: f64 = (0..k).map(|_| -(-rng.next_f64()).ln_1p()).sum();
                    s * scale
                }
                None => {
                    let u = rng.next_open01();
                    self.quantile(u).unwrap_or(f64::NAN)
                }
            },
        }
    }

    /// `(cdf, sf)` of an Erlang law at `y = x/scale`, each summed without
    /// cancellation on its own side of the mode.
    fn erlang_cdf_sf(k: u64, y: f64) -> (f64, f64) {
        if y <= 0.0 {
            return (0.0, 1.0);
        }
        if y == f64::INFINITY {
            return (1.0, 0.0);
        }
        let kf = k as f64;
        if y < kf {
            // cdf = e^{-y} Σ_{j≥k} y^j/j!
            let mut term = (kf * y.ln() - y - ln_gamma(kf + 1.0)).exp();
            let mut sum = 0.0;
            let mut j = kf;
            while term > sum * 1e-17 && term > 0.0 {
                sum += term;
                j += 1.0;
                term *= y / j;
            }
            let cdf = sum.min(1.0);
            (cdf, 1.0 - cdf)
        } else {
            // sf = e^{-y} Σ_{j<k} y^j/j!, summed from the largest term down.
            let mut term = ((kf - 1.0) * y.ln() - y - ln_gamma(kf)).exp();
            let mut sum = 0.0;
            let mut j = kf - 1.0;
            loop {
                sum += term;
                if j == 0.0 || term < sum * 1e-17 {
                    break;
                }
                term *= j / y;
                j -= 1.0;
            }
            let sf = sum.min(1.0);
            (1.0 - sf, sf)
        }
    }

    fn gamma_numeric_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let r = integrate_with_points(|t| self.pdf(t), 0.0, x, &[], super::LAW_TOL);
        r.value.clamp(0.0, 1.0)
    }
}

impl Law for ParentDistribution {
    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { a, b } => {
                if (a..=b).contains(&x) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Self::Normal { mu, sigma2 } => {
                let z = x - mu;
                (-0.5 * z * z / sigma2).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            }
            Self::Exponential { lambda } => {
                if x < 0.0 {
                    0.0
                } else {
                    lambda * (-lambda * x).exp()
                }
            }
            Self::Rayleigh { sigma } => {
                if x < 0.0 {
                    0.0
                } else {
                    2.0 * x / sigma * (-x * x / sigma).exp()
                }
            }
            Self::Gamma { shape, scale } => {
                if x < 0.0 {
                    return 0.0;
                }
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                let y = x / scale;
                ((shape - 1.0) * y.ln() - y - ln_gamma(shape)).exp() / scale
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Self::Normal { mu, sigma2 } => norm_cdf((x - mu) / sigma2.sqrt()),
            Self::Exponential { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda * x).exp_m1()
                }
            }
            Self::Rayleigh { sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x * x / sigma).exp_m1()
                }
            }
            Self::Gamma { scale, .. } => match self.erlang_shape() {
                Some(k) => Self::erlang_cdf_sf(k, x / scale).0,
                None => self.gamma_numeric_cdf(x),
            },
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
            Self::Normal { mu, sigma2 } => norm_sf((x - mu) / sigma2.sqrt()),
            Self::Exponential { lambda } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-lambda * x).exp()
                }
            }
            Self::Rayleigh { sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x * x / sigma).exp()
                }
            }
            Self::Gamma { scale, .. } => match self.erlang_shape() {
                Some(k) => Self::erlang_cdf_sf(k, x / scale).1,
                None => 1.0 - self.gamma_numeric_cdf(x),
            },
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { a, b } => (a, b),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn effective_range(&self) -> (f64, f64) {
        // -ln(RANGE_TAIL) ≈ 36.8; the normal cut sits at |z| ≈ 8.2.
        let tail = -RANGE_TAIL.ln();
        match *self {
            Self::Uniform { a, b } => (a, b),
            Self::Normal { mu, sigma2 } => {
                let w = 8.3 * sigma2.sqrt();
                (mu - w, mu + w)
            }
            Self::Exponential { lambda } => (0.0, tail / lambda),
            Self::Rayleigh { sigma } => (0.0, (tail * sigma).sqrt()),
            Self::Gamma { shape, scale } => {
                (0.0, scale * (shape + 10.0 * shape.sqrt() + 2.0 * tail))
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { a, b } => vec![a, b],
            Self::Normal { .. } => Vec::new(),
            _ => vec![0.0],
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_probability("quantile", p)?;
        Ok(match *self {
            Self::Uniform { a, b } => a + (b - a) * p,
            Self::Normal { mu, sigma2 } => mu + sigma2.sqrt() * norm_quantile(p),
            Self::Exponential { lambda } => -(-p).ln_1p() / lambda,
            Self::Rayleigh { sigma } => (-sigma * (-p).ln_1p()).sqrt(),
            Self::Gamma { .. } => return super::invert_cdf(self, p),
        })
    }
}

impl fmt::Display for ParentDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            Self::Normal { mu, sigma2 } => write!(f, "normal({mu},{sigma2})"),
            Self::Exponential { lambda } => write!(f, "exp({lambda})"),
            Self::Rayleigh { sigma } => write!(f, "rayleigh({sigma})"),
            Self::Gamma { shape, scale } => write!(f, "gamma({shape},{scale})"),
        }
    }
}

/// Parses `name(p1,p2,...)`, case-insensitive, whitespace tolerated.
///
/// Names and parameters: `uniform(a,b)`, `normal(mu,sigma2)`,
/// `exp(lambda)` / `exponential(lambda)`, `rayleigh(sigma)`,
/// `gamma(shape,scale)`.
impl FromStr for ParentDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let open = t
            .find('(')
            .ok_or_else(|| Error::Parse(format!("expected name(params), got {s:?}")))?;
        let body = t[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse(format!("missing closing parenthesis in {s:?}")))?;
        let name = t[..open].trim().to_ascii_lowercase();
        let params = body
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {:?} in {s:?}", p.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "{name} takes {n} parameter(s), got {} in {s:?}",
                    params.len()
                )))
            }
        };
        let d = match name.as_str() {
            "uniform" => {
                want(2)?;
                Self::Uniform { a: params[0], b: params[1] }
            }
            "normal" => {
                want(2)?;
                Self::Normal { mu: params[0], sigma2: params[1] }
            }
            "exp" | "exponential" => {
                want(1)?;
                Self::Exponential { lambda: params[0] }
            }
            "rayleigh" => {
                want(1)?;
                Self::Rayleigh { sigma: params[0] }
            }
            "gamma" => {
                want(2)?;
                Self::Gamma { shape: params[0], scale: params[1] }
            }
            _ => return Err(Error::Parse(format!("unknown distribution {name:?}"))),
        };
        d.validated()
    }
}
