//! Closed-form latent densities for two rows of two entries, where the
//! latent entry belongs to the row with the larger aggregate
//! (`n = k = m = 2`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{Law, ParentDistribution};
use crate::error::{Error, Result};
use crate::order_engine::Role;
use crate::quad::{integrate, QuadTol};
use crate::special::{e1_raw, erfc_raw, norm_sf};

/// The two candidate Rayleigh factor densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayleighFactorForm {
    /// `(4x³/σ²)·E1(x²/σ)`, derived from the exponential factor density
    /// under the `Rayleigh(σ)` parameterisation.
    Derived,
    /// `(x³/σ⁴)·E1(x²/(2σ²))`, the alternative candidate. It is the density
    /// for a textbook Rayleigh scale σ, i.e. `Rayleigh(2σ²)`.
    Tabulated,
}

/// Form used unless a caller asks for the other one. Chosen because it is
/// the only candidate that matches simulation under `Rayleigh(1)`.
pub const RAYLEIGH_FACTOR_DEFAULT: RayleighFactorForm = RayleighFactorForm::Derived;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite and positive, got {v}")))
    }
}

/// Standard normal upper tail `Q(x)`.
fn q(x: f64) -> f64 {
    norm_sf(x)
}

pub fn uniform_addend(a: f64, b: f64, x: f64) -> Result<f64> {
    ParentDistribution::uniform(a, b)?;
    if !(a..=b).contains(&x) {
        return Ok(0.0);
    }
    let d = (a - b).powi(4);
    let c3 = -2.0 / (3.0 * d);
    let c2 = (a + b) / d;
    let c1 = (a * a - 4.0 * a * b + b * b) / d;
    let c0 = (-5.0 * a.powi(3) + 12.0 * a * a * b - 6.0 * a * b * b + b.powi(3)) / (3.0 * d);
    Ok(((c3 * x + c2) * x + c1) * x + c0)
}

pub fn normal_addend(mu: f64, sigma2: f64, x: f64) -> Result<f64> {
    ParentDistribution::normal(mu, sigma2)?;
    let z = mu - x;
    Ok((-z * z / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2).sqrt() * erfc_raw(z / (6.0 * sigma2).sqrt()))
}

pub fn exponential_addend(lambda: f64, x: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    let e = (-lambda * x).exp();
    Ok(lambda * e * (2.0 - e * (lambda * x + 1.5)))
}

/// `π·Q(x/√(3σ)) − 2∫₀^{π/6} exp(−x²/(6σ sin²θ)) dθ`.
fn angle_integral(sigma: f64, x: f64) -> f64 {
    let c = x * x / (6.0 * sigma);
    let f = |t: f64| {
        let s = t.sin();
        if s == 0.0 {
            if c == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-c / (s * s)).exp()
        }
    };
    let r = integrate(f, 0.0, PI / 6.0, QuadTol::new(1e-15, 1e-12));
    PI * q(x / (3.0 * sigma).sqrt()) - 2.0 * r.value
}

fn i_term(sigma: f64, x: f64) -> f64 {
    0.5 * (-x * x / sigma).exp()
        - x * (-x * x / (2.0 * sigma)).exp() * (PI / (2.0 * sigma)).sqrt() * q(x / sigma.sqrt())
}

fn j_term(sigma: f64, x: f64) -> f64 {
    let r = (sigma / (2.0 * PI)).sqrt();
    let e2 = (-x * x / (2.0 * sigma)).exp();
    r - 4.0 * x / 9.0 * e2 + 23.0 * x / 18.0 * e2 * q(x / sigma.sqrt())
        - 5.0 / 6.0 * r * (-x * x / sigma).exp()
        + (2.0 * sigma / (3.0 * PI)).sqrt()
            * (4.0 * x * x / (9.0 * sigma) - 2.0 / 3.0)
            * (-x * x / (3.0 * sigma)).exp()
            * angle_integral(sigma, x)
}

/// The factor `h(x)` multiplying the Rayleigh density in the addend form.
fn h(sigma: f64, x: f64) -> f64 {
    0.5 - 0.5 * i_term(sigma, x) + (PI / (2.0 * sigma)).sqrt() * j_term(sigma, x)
}

/// Latent addend density for `Rayleigh(σ)` parents.
pub fn rayleigh_addend(sigma: f64, x: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    Ok(4.0 * x / sigma * (-x * x / sigma).exp() * h(sigma, x))
}

/// Latent factor density for `Uniform(0, 1)` parents.
pub fn uniform_factor(x: f64) -> f64 {
    if x > 0.0 && x <= 1.0 {
        -x * x.ln() + 1.5 * x
    } else {
        0.0
    }
}

/// Latent factor density for `Normal(0, σ²)` parents: the parent density.
pub fn normal_factor(sigma2: f64, x: f64) -> Result<f64> {
    Ok(ParentDistribution::normal(0.0, sigma2)?.pdf(x))
}

pub fn exponential_factor(lambda: f64, x: f64) -> Result<f64> {
    positive("lambda", lambda)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * lambda * lambda * x * e1_raw(lambda * x))
}

/// Latent factor density for `Rayleigh(σ)` parents in the default form.
pub fn rayleigh_factor(sigma: f64, x: f64) -> Result<f64> {
    rayleigh_factor_form(sigma, x, RAYLEIGH_FACTOR_DEFAULT)
}

pub fn rayleigh_factor_form(sigma: f64, x: f64, form: RayleighFactorForm) -> Result<f64> {
    positive("sigma", sigma)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let x2 = x * x;
    Ok(match form {
        RayleighFactorForm::Derived => 4.0 * x2 * x / (sigma * sigma) * e1_raw(x2 / sigma),
        RayleighFactorForm::Tabulated => x2 * x / sigma.powi(4) * e1_raw(x2 / (2.0 * sigma * sigma)),
    })
}

/// Whether a closed form exists for `parent` in `role` at `n = k = m = 2`.
pub fn has_closed_form(parent: &ParentDistribution, role: Role) -> bool {
    closed_form_density(parent, role, RAYLEIGH_FACTOR_DEFAULT, 0.5).is_ok()
}

/// Dispatches to the closed form for `parent` and `role` at `n = k = m = 2`.
pub fn closed_form_density(
    parent: &ParentDistribution,
    role: Role,
    rayleigh: RayleighFactorForm,
    x: f64,
) -> Result<f64> {
    use ParentDistribution as P;
    match (role, *parent) {
        (Role::Addend, P::Uniform { a, b }) => uniform_addend(a, b, x),
        (Role::Addend, P::Normal { mu, sigma2 }) => normal_addend(mu, sigma2, x),
        (Role::Addend, P::Exponential { lambda }) => exponential_addend(lambda, x),
        (Role::Addend, P::Rayleigh { sigma }) => rayleigh_addend(sigma, x),
        (Role::Factor, P::Uniform { a, b }) if a == 0.0 && b == 1.0 => Ok(uniform_factor(x)),
        (Role::Factor, P::Normal { mu, sigma2 }) if mu == 0.0 => normal_factor(sigma2, x),
        (Role::Factor, P::Exponential { lambda }) => exponential_factor(lambda, x),
        (Role::Factor, P::Rayleigh { sigma }) => rayleigh_factor_form(sigma, x, rayleigh),
        _ => Err(Error::NoClosedForm(format!(
            "the {} density of {parent}",
            match role {
                Role::Addend => "addend",
                Role::Factor => "factor",
            }
        ))),
    }
}
