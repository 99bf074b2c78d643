use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use ordstat_core::asymptotics::{asymptotic_vs_exact_report, AsymptoticDensity};
use ordstat_core::cache_sizing::{cache_report, mc_cache_ratio, CatalogModel};
use ordstat_core::closed_forms::{closed_form_density, RAYLEIGH_FACTOR_DEFAULT};
use ordstat_core::curve::{central_interval, linspace, DensityCurve, Provenance};
use ordstat_core::distributions::{Law, ParentDistribution};
use ordstat_core::monte_carlo::{goodness_of_fit, sample_latent, McConfig, Reference, ReferenceCdf};
use ordstat_core::order_engine::{order_statistic_density, LatentDensity, LatentSpec, Role};
use ordstat_core::Error;
use rayon::prelude::*;
use serde_json::json;

use crate::output::{open, write_csv, write_json};
use crate::{
    AsymptoticArgs, CacheArgs, DensityArgs, DensityRole, Format, Grid, Method, SampleArgs, SampleFormat, VerifyArgs,
};

type DensityFn<'a> = Box<dyn Fn(f64) -> ordstat_core::Result<f64> + Sync + 'a>;

const DEFAULT_POINTS: usize = 401;

/// Grid from `--grid`, else `DEFAULT_POINTS` over the central 99.9% of `f`
/// inside the effective range of `latent`.
fn grid_for(grid: Option<Grid>, latent: &ParentDistribution, f: &DensityFn<'_>) -> Result<Vec<f64>> {
    if let Some(g) = grid {
        return Ok(linspace(g.min, g.max, g.points));
    }
    let (lo, hi) = latent.effective_range();
    let (a, b) = central_interval(f, lo, hi, 0.999, 801)?;
    Ok(linspace(a, b, DEFAULT_POINTS))
}

fn tabulate(label: String, spec: Option<LatentSpec>, xs: &[f64], f: &DensityFn<'_>, provenance: Provenance, tol: f64) -> Result<DensityCurve> {
    let ys = xs.par_iter().map(|&x| f(x)).collect::<ordstat_core::Result<Vec<f64>>>()?;
    Ok(DensityCurve::new(label, spec, xs.iter().cloned().zip(ys).collect(), provenance, tol)?)
}

fn emit_curve(curve: &DensityCurve, args_out: Option<&std::path::Path>, format: Format, extra: serde_json::Value) -> Result<()> {
    match format {
        Format::Csv => write_csv(
            args_out,
            "x,density",
            curve.points.iter().map(|&(x, y)| vec![Some(x), Some(y)]),
        ),
        Format::Json => {
            let mut body = extra;
            body["curve"] = serde_json::to_value(curve)?;
            write_json(args_out, "density", body)
        }
    }
}

fn role_of(r: DensityRole) -> Option<Role> {
    match r {
        DensityRole::Addend => Some(Role::Addend),
        DensityRole::Factor => Some(Role::Factor),
        DensityRole::Orderstat => None,
    }
}

pub fn density(a: &DensityArgs) -> Result<ExitCode> {
    let out = a.out.as_deref();
    let Some(role) = role_of(a.role) else {
        let parent = a
            .law
            .parent
            .ok_or_else(|| Error::Parameter("orderstat takes --parent, not --hetero".into()))?;
        if a.method == Method::Asymptotic {
            return Err(Error::Parameter("orderstat has no asymptotic method".into()).into());
        }
        let (n, k) = (a.rank.n, a.rank.k.unwrap_or(a.rank.n));
        let f: DensityFn = Box::new(move |x| order_statistic_density(&parent, n, k, x));
        f(parent.effective_range().0)?;
        let xs = grid_for(a.grid, &parent, &f)?;
        let curve = tabulate(format!("{parent} order statistic k={k} of n={n}"), None, &xs, &f, Provenance::Analytic, 1e-12)?;
        emit_curve(&curve, out, a.format, json!({"method": "closed", "role": "orderstat", "parent": parent, "n": n, "k": k}))?;
        return Ok(ExitCode::SUCCESS);
    };
    let spec = a.rank.spec(role, &a.law)?;
    let parents = a.law.columns(spec.m)?;
    let latent = parents[0];
    let meta = json!({"role": role, "spec": spec, "parents": parents});
    let (curve, method) = match a.method {
        Method::Closed => {
            let homogeneous = parents.iter().all(|p| *p == latent);
            if (spec.n, spec.k, spec.m) != (2, 2, 2) || !homogeneous {
                return Err(Error::NoClosedForm(format!(
                    "closed forms cover iid rows with n = k = m = 2, not {spec:?}"
                ))
                .into());
            }
            let form = a.rayleigh_form.into();
            let f: DensityFn = Box::new(move |x| closed_form_density(&latent, role, form, x));
            f(0.5)?;
            let xs = grid_for(a.grid, &latent, &f)?;
            (tabulate(format!("{latent} closed form"), Some(spec), &xs, &f, Provenance::Analytic, 1e-12)?, "closed")
        }
        Method::Quadrature => {
            let d = LatentDensity::hetero(&parents, spec)?;
            let f: DensityFn = Box::new(|x| d.density(x));
            let xs = grid_for(a.grid, &latent, &f)?;
            let mut curve = d.curve(&xs)?;
            curve.label = format!("{latent} latent density by quadrature");
            (curve, "quadrature")
        }
        Method::Asymptotic => {
            let d = AsymptoticDensity::hetero(&parents, role, spec.k as f64 / spec.n as f64)?;
            let f: DensityFn = Box::new(move |x| limit_at(&d, role, x));
            let xs = grid_for(a.grid, &latent, &f)?;
            (
                tabulate(format!("{latent} scaling limit"), Some(spec), &xs, &f, Provenance::Asymptotic, 1e-10)?,
                "asymptotic",
            )
        }
    };
    let mut meta = meta;
    meta["method"] = method.into();
    emit_curve(&curve, out, a.format, meta)?;
    Ok(ExitCode::SUCCESS)
}

/// The factor limit has no value at exactly 0; the grid point is nudged.
fn limit_at(d: &AsymptoticDensity, role: Role, x: f64) -> ordstat_core::Result<f64> {
    if role == Role::Factor && x == 0.0 {
        d.density(1e-12)
    } else {
        d.density(x)
    }
}

pub fn sample(a: &SampleArgs) -> Result<ExitCode> {
    let spec = a.rank.spec(a.role.into(), &a.law)?;
    let cfg = McConfig::new(spec, a.law.columns(spec.m)?, a.trials, a.seed)?.with_column(a.column);
    cfg.validate()?;
    let xs = sample_latent(&cfg)?;
    let mut w = open(a.out.as_deref())?;
    match a.format {
        SampleFormat::Text => {
            for x in &xs {
                writeln!(w, "{x}")?;
            }
        }
        SampleFormat::Binary => {
            for x in &xs {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush().context("writing samples")?;
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: &VerifyArgs) -> Result<ExitCode> {
    let role: Role = a.role.into();
    let spec = a.rank.spec(role, &a.law)?;
    let parents = a.law.columns(spec.m)?;
    let latent = parents[0];
    let cfg = McConfig::new(spec, parents.clone(), a.trials, a.seed)?.with_bins(a.bins);
    cfg.validate()?;
    let homogeneous = parents.iter().all(|p| *p == latent);
    let (reference, table) = if let Some(expect) = a.expect {
        (format!("law {expect}"), ReferenceCdf::from_law(&expect)?)
    } else if (spec.n, spec.k, spec.m) == (2, 2, 2)
        && homogeneous
        && closed_form_density(&latent, role, RAYLEIGH_FACTOR_DEFAULT, 0.5).is_ok()
    {
        let f = |x| closed_form_density(&latent, role, RAYLEIGH_FACTOR_DEFAULT, x);
        ("closed".to_string(), table_on(&latent, f, &[])?)
    } else {
        let d = LatentDensity::hetero(&parents, spec)?;
        ("quadrature".to_string(), table_on(&latent, |x| d.density(x), &d.breakpoints())?)
    };
    let samples = sample_latent(&cfg)?;
    let report = goodness_of_fit(&samples, Reference::Table(&table), cfg.bins)?;
    let threshold = a.threshold.unwrap_or(1.63 / (a.trials as f64).sqrt());
    let pass = report.ks_distance < threshold;
    eprintln!(
        "{}: KS {:.6} (threshold {:.6}), chi2/dof {:.4}, L1 {:.5}, reference {reference}",
        if pass { "pass" } else { "FAIL" },
        report.ks_distance,
        threshold,
        report.chi2_per_dof,
        report.l1_distance
    );
    write_json(
        a.report.as_deref(),
        "verify",
        json!({
            "config": cfg,
            "reference": reference,
            "threshold": threshold,
            "pass": pass,
            "report": report,
        }),
    )?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn table_on(
    latent: &ParentDistribution,
    f: impl Fn(f64) -> ordstat_core::Result<f64> + Sync,
    extra_points: &[f64],
) -> Result<ReferenceCdf> {
    let mut pts = latent.breakpoints();
    pts.extend_from_slice(extra_points);
    pts.push(0.0);
    Ok(ReferenceCdf::from_density(f, latent.support(), latent.effective_range(), &pts, 1e-10)?)
}

pub fn asymptotic(a: &AsymptoticArgs) -> Result<ExitCode> {
    let role: Role = a.role.into();
    let m = a.law.width(a.m);
    let parents = a.law.columns(m)?;
    let out = a.out.as_deref();
    if a.compare {
        let (n, k) = (a.n.unwrap(), a.k.unwrap());
        let report = asymptotic_vs_exact_report(&parents, LatentSpec::new(n, k, m, role)?, DEFAULT_POINTS)?;
        eprintln!("eta {:.6}, beta {:.6}, L1(exact, limit) = {:.6}", report.eta, report.beta, report.l1_distance);
        match a.format {
            Format::Csv => write_csv(
                out,
                "x,limit,exact",
                report
                    .limit
                    .points
                    .iter()
                    .zip(&report.exact.points)
                    .map(|(l, e)| vec![Some(l.0), Some(l.1), Some(e.1)]),
            )?,
            Format::Json => write_json(out, "asymptotic", serde_json::to_value(&report)?)?,
        }
        return Ok(ExitCode::SUCCESS);
    }
    let eta = match (a.eta, a.n, a.k) {
        (Some(eta), _, _) => eta,
        (None, Some(n), Some(k)) => {
            LatentSpec::new(n, k, m, role)?;
            k as f64 / n as f64
        }
        _ => unreachable!("clap requires --eta or both --n and --k"),
    };
    let d = AsymptoticDensity::hetero(&parents, role, eta)?;
    let f: DensityFn = Box::new(|x| limit_at(&d, role, x));
    let xs = grid_for(a.grid, &parents[0], &f)?;
    let curve = tabulate(format!("{} scaling limit, eta {eta}", parents[0]), None, &xs, &f, Provenance::Asymptotic, 1e-10)?;
    match a.format {
        Format::Csv => emit_curve(&curve, out, a.format, json!({}))?,
        Format::Json => write_json(
            out,
            "asymptotic",
            json!({"role": role, "m": m, "parents": parents, "eta": eta, "beta": d.beta(), "curve": curve}),
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cache(a: &CacheArgs) -> Result<ExitCode> {
    let model = CatalogModel::new(a.n, a.sizes, a.popularity)?;
    let qs: Vec<u64> = match (a.q, a.q_range) {
        (Some(q), _) => vec![q],
        (None, Some(r)) => (r.from..=r.to).step_by(r.step as usize).collect(),
        (None, None) => (1..=a.n).collect(),
    };
    let analytic = model.is_reference();
    if !analytic && a.mc_replications == 0 {
        return Err(Error::Parameter(
            "closed-form sizing needs gamma(2,1) sizes and uniform(0,1) popularity; add --mc-replications".into(),
        )
        .into());
    }
    let mut rows = Vec::with_capacity(qs.len());
    for &q in &qs {
        let exact = if analytic { Some(cache_report(q, a.n)?) } else { None };
        if !analytic && (q < 1 || q > a.n) {
            return Err(Error::Parameter(format!("q = {q} outside [1, {}]", a.n)).into());
        }
        let mc = if a.mc_replications > 0 {
            Some(mc_cache_ratio(&model, q, a.mc_replications, a.seed)?)
        } else {
            None
        };
        rows.push((q, exact, mc));
    }
    let out = a.out.as_deref();
    match a.format {
        Format::Csv => write_csv(
            out,
            "q,expected_bits,ratio,mc_ratio,mc_se",
            rows.iter().map(|(q, e, mc)| {
                vec![
                    Some(*q as f64),
                    e.map(|e| e.expected_bytes),
                    e.map(|e| e.ratio),
                    mc.map(|m| m.ratio),
                    mc.map(|m| m.standard_error),
                ]
            }),
        )?,
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(q, e, mc)| json!({"q": q, "exact": e, "monte_carlo": mc}))
                .collect();
            write_json(out, "cache", json!({"model": model, "seed": a.seed, "rows": rows}))?
        }
    }
    Ok(ExitCode::SUCCESS)
}
