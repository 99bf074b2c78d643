//! Reduced invariant suite for a quick installation check.

use std::process::ExitCode;

use anyhow::Result;
use ordstat_core::cache_sizing::{cache_ratio, expected_kth_size_asymptotic, expected_max_importance_size, rest_pochhammer};
use ordstat_core::closed_forms::{closed_form_density, RAYLEIGH_FACTOR_DEFAULT};
use ordstat_core::curve::linspace;
use ordstat_core::distributions::{Law, ParentDistribution};
use ordstat_core::monte_carlo::{goodness_of_fit, sample_latent, McConfig, Reference, ReferenceCdf};
use ordstat_core::order_engine::{order_statistic_density, LatentDensity, LatentSpec, Role};

use crate::SelfcheckArgs;

struct Check {
    name: &'static str,
    run: fn(&SelfcheckArgs) -> Result<(bool, String)>,
}

fn normal_factor_is_parent(a: &SelfcheckArgs) -> Result<(bool, String)> {
    let p = ParentDistribution::normal(0.0, 1.0)?;
    let cfg = McConfig::new(LatentSpec::new(2, 2, 2, Role::Factor)?, vec![p], a.trials, a.seed)?;
    let r = goodness_of_fit(&sample_latent(&cfg)?, Reference::Table(&ReferenceCdf::from_law(&p)?), 20)?;
    let crit = 1.63 / (a.trials as f64).sqrt();
    Ok((r.ks_distance < crit, format!("KS {:.5} < {crit:.5}", r.ks_distance)))
}

fn engine_matches_closed_forms(_: &SelfcheckArgs) -> Result<(bool, String)> {
    let mut sup: f64 = 0.0;
    for p in [ParentDistribution::uniform(0.0, 1.0)?, ParentDistribution::normal(0.0, 1.0)?] {
        for role in [Role::Addend, Role::Factor] {
            let d = LatentDensity::new(p, LatentSpec::new(2, 2, 2, role)?)?;
            for x in linspace(0.05, 0.95, 19) {
                sup = sup.max((d.density(x)? - closed_form_density(&p, role, RAYLEIGH_FACTOR_DEFAULT, x)?).abs());
            }
        }
    }
    Ok((sup < 1e-5, format!("sup {sup:.2e}")))
}

fn single_entry_rows(_: &SelfcheckArgs) -> Result<(bool, String)> {
    let p = ParentDistribution::exponential(1.0)?;
    let d = LatentDensity::new(p, LatentSpec::new(5, 3, 1, Role::Addend)?)?;
    let mut sup: f64 = 0.0;
    for x in linspace(0.1, 5.0, 25) {
        sup = sup.max((d.density(x)? - order_statistic_density(&p, 5, 3, x)?).abs());
    }
    Ok((sup < 1e-10, format!("sup {sup:.2e}")))
}

fn rank_average(_: &SelfcheckArgs) -> Result<(bool, String)> {
    let p = ParentDistribution::uniform(0.0, 1.0)?;
    let mut sup: f64 = 0.0;
    for x in [0.2, 0.5, 0.8] {
        let mut avg = 0.0;
        for k in 1..=4 {
            avg += LatentDensity::new(p, LatentSpec::new(4, k, 2, Role::Addend)?)?.density(x)? / 4.0;
        }
        sup = sup.max((avg - p.pdf(x)).abs());
    }
    Ok((sup < 1e-6, format!("sup {sup:.2e}")))
}

fn cache_formulas(_: &SelfcheckArgs) -> Result<(bool, String)> {
    let e = expected_max_importance_size(1000)?;
    let r32 = cache_ratio(32, 100)?;
    let mut worst: f64 = 0.0;
    for q in 2..100 {
        let direct: f64 = (100 - q + 1..100).map(|i| expected_kth_size_asymptotic(i, 100)).sum::<ordstat_core::Result<f64>>()?;
        worst = worst.max((direct - rest_pochhammer(q, 100)?).abs() / direct);
    }
    let ok = (e - 8.48547).abs() < 1e-5 && r32 > 0.5 && worst < 1e-8;
    Ok((ok, format!("E_max(1000) {e:.6}, R(32) {r32:.4}, sum forms {worst:.1e}")))
}

fn deterministic_across_threads(a: &SelfcheckArgs) -> Result<(bool, String)> {
    let cfg = McConfig::new(
        LatentSpec::new(6, 2, 3, Role::Addend)?,
        vec![ParentDistribution::rayleigh(1.0)?],
        a.trials,
        a.seed,
    )?;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build()?.install(|| sample_latent(&cfg))?;
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build()?.install(|| sample_latent(&cfg))?;
    let same = one.iter().zip(&many).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((same, format!("{} samples", one.len())))
}

pub fn run(a: &SelfcheckArgs) -> Result<ExitCode> {
    let checks = [
        Check { name: "normal factor follows the parent", run: normal_factor_is_parent },
        Check { name: "quadrature matches closed forms", run: engine_matches_closed_forms },
        Check { name: "m = 1 gives order statistics", run: single_entry_rows },
        Check { name: "averaging ranks gives the parent", run: rank_average },
        Check { name: "cache sizing formulas", run: cache_formulas },
        Check { name: "simulation independent of threads", run: deterministic_across_threads },
    ];
    let mut failed = 0;
    for c in &checks {
        let (ok, detail) = (c.run)(a).unwrap_or_else(|e| (false, format!("error: {e:#}")));
        if !ok {
            failed += 1;
        }
        println!("{} {}: {detail}", if ok { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
