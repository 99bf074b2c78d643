use super::*;
use crate::quad::{integrate_with_points, QuadTol};
use crate::rng::CounterRng;
use proptest::prelude::*;
use std::f64::consts::{E, LN_2, PI};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

fn total_mass<L: Law>(law: &L) -> f64 {
    let (lo, hi) = law.support();
    let r = integrate_with_points(
        |x| law.pdf(x),
        lo,
        hi,
        &law.breakpoints(),
        QuadTol::new(1e-12, 1e-10),
    );
    r.value
}

/// Upper bound on the KS distance using the cdf at every 25th order
/// statistic (the cdf is monotone, so each block is bracketed). The slack
/// is below 1e-3 for 1e5 samples.
fn ks_vs_cdf<L: Law>(law: &L, mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut j = 0;
    while j < n {
        let j2 = (j + 25).min(n - 1);
        let (fa, fb) = (law.cdf(xs[j]), law.cdf(xs[j2]));
        d = d.max(fb - j as f64 / nf).max((j2 + 1) as f64 / nf - fa);
        if j2 == n - 1 {
            break;
        }
        j = j2;
    }
    d
}

fn parents() -> Vec<ParentDistribution> {
    vec![
        ParentDistribution::uniform(0.0, 1.0).unwrap(),
        ParentDistribution::normal(0.0, 1.0).unwrap(),
        ParentDistribution::exponential(1.0).unwrap(),
        ParentDistribution::rayleigh(1.0).unwrap(),
        ParentDistribution::gamma(2.0, 1.0).unwrap(),
    ]
}

fn derived_laws() -> Vec<DerivedLaw> {
    let p = parents();
    let mut v = Vec::new();
    for d in &p {
        v.push(sum_law(*d, 2).unwrap());
        v.push(product_law(*d, 2).unwrap());
    }
    v.push(sum_law(p[0], 3).unwrap());
    v.push(sum_law(p[3], 3).unwrap());
    v.push(hetero_product_law(&[p[4], p[0]]).unwrap());
    v.push(hetero_product_law(&[p[3], p[2]]).unwrap());
    v
}

#[test]
fn pdf_examples() {
    let p = parents();
    close(p[1].pdf(0.0), 1.0 / (2.0 * PI).sqrt(), 1e-15);
    close(p[3].pdf(1.0), 2.0 / E, 1e-15);
    close(p[4].pdf(2.0), 2.0 * (-2.0f64).exp(), 1e-15);
    assert_eq!(p[2].pdf(-1.0), 0.0);
    assert_eq!(p[0].pdf(1.5), 0.0);
}

#[test]
fn rayleigh_normalises() {
    for s in [0.5, 1.0, 3.0] {
        close(total_mass(&ParentDistribution::rayleigh(s).unwrap()), 1.0, 1e-10);
    }
}

#[test]
fn cdf_examples() {
    let erlang = sum_law(ParentDistribution::exponential(1.0).unwrap(), 2).unwrap();
    assert_eq!(erlang.form(), LawForm::ClosedForm("erlang"));
    close(erlang.cdf(1.0), 1.0 - 2.0 / E, 1e-15);
    for x in [0.3, 2.0, 7.0] {
        close(erlang.cdf(x), 1.0 - x * (-x).exp() - (-x).exp(), 1e-15);
    }
    close(ParentDistribution::uniform(0.0, 1.0).unwrap().cdf(0.3), 0.3, 1e-15);
    for d in parents() {
        assert_eq!(d.cdf(f64::NEG_INFINITY), 0.0);
    }
    for law in derived_laws() {
        assert_eq!(law.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(law.cdf(f64::INFINITY), 1.0);
    }
}

#[test]
fn quantile_examples() {
    let e = ParentDistribution::exponential(1.0).unwrap();
    close(e.quantile(1.0 - 1.0 / E).unwrap(), 1.0, 1e-14);
    close(e.quantile(0.5).unwrap(), LN_2, 1e-15);
    let n2 = ParentDistribution::normal(0.0, 2.0).unwrap();
    close(n2.quantile(0.25).unwrap(), -0.9538725524089398, 1e-12);
    assert!(e.quantile(0.0).is_err());
    assert!(e.quantile(1.0).is_err());
    assert!(e.quantile(f64::NAN).is_err());
    let g = ParentDistribution::gamma(2.5, 1.0).unwrap();
    close(g.cdf(g.quantile(0.3).unwrap()), 0.3, 1e-9);
}

#[test]
fn sampling_means() {
    let n = 1_000_000u64;
    let e = ParentDistribution::exponential(1.0).unwrap();
    let g = ParentDistribution::gamma(2.0, 1.0).unwrap();
    let (mut se, mut sg) = (0.0, 0.0);
    for i in 0..n {
        let mut r = CounterRng::new(11, i);
        se += e.sample(&mut r);
        sg += g.sample(&mut r);
    }
    close(se / n as f64, 1.0, 0.005);
    close(sg / n as f64, 2.0, 0.006);
    let mut a = CounterRng::new(5, 0);
    let mut b = CounterRng::new(5, 0);
    let u = ParentDistribution::uniform(0.0, 1.0).unwrap();
    let x = u.sample(&mut a);
    assert_eq!(x, u.sample(&mut b));
    assert!((0.0..1.0).contains(&x));
}

#[test]
fn sum_law_examples() {
    let p = parents();
    let tri = sum_law(p[0], 2).unwrap();
    assert_eq!(tri.form(), LawForm::ClosedForm("triangular"));
    close(tri.pdf(1.0), 1.0, 1e-15);
    let n = sum_law(p[1], 2).unwrap();
    assert_eq!(n.as_parent(), Some(ParentDistribution::normal(0.0, 2.0).unwrap()));
    close(n.pdf(0.0), 1.0 / (4.0 * PI).sqrt(), 1e-15);
    let r = sum_law(p[3], 2).unwrap();
    close(r.pdf(1.0), 1.0 / E, 1e-15);
    assert_eq!(sum_law(p[2], 1).unwrap().as_parent(), Some(p[2]));
    assert_eq!(sum_law(p[0], 3).unwrap().form(), LawForm::Numeric);
    assert!(sum_law(p[0], 0).is_err());
}

#[test]
fn product_law_examples() {
    let p = parents();
    let u = product_law(p[0], 2).unwrap();
    close(u.cdf(1.0 / E), 2.0 / E, 1e-15);
    let n = product_law(p[1], 2).unwrap();
    close(n.pdf(1.0), 0.4210244382407083 / PI, 1e-14);
    // Uniform not on (0, 1): no closed form, numeric fallback.
    let w = product_law(ParentDistribution::uniform(0.0, 2.0).unwrap(), 2).unwrap();
    assert_eq!(w.form(), LawForm::Numeric);
    close(w.cdf(4.0), 1.0, 1e-12);
}

#[test]
fn exponential_product_matches_simulation() {
    let e = ParentDistribution::exponential(1.0).unwrap();
    let law = product_law(e, 2).unwrap();
    let xs: Vec<f64> = (0..1_000_000u64)
        .map(|i| law.sample(&mut CounterRng::new(3, i)))
        .collect();
    for x in [0.1, 0.5, 1.0, 3.0] {
        let emp = xs.iter().filter(|&&v| v < x).count() as f64 / xs.len() as f64;
        close(law.cdf(x), emp, 0.003);
    }
}

#[test]
fn hetero_gamma_uniform_is_exponential() {
    let g = ParentDistribution::gamma(2.0, 1.0).unwrap();
    let u = ParentDistribution::uniform(0.0, 1.0).unwrap();
    let law = hetero_product_law(&[g, u]).unwrap();
    assert_eq!(law.form(), LawForm::ClosedForm("gamma_uniform_exponential"));
    close(law.cdf(LN_2), 0.5, 1e-15);
    let xs: Vec<f64> = (0..1_000_000u64)
        .map(|i| law.sample(&mut CounterRng::new(21, i)))
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    close(mean, 1.0, 0.01);
    assert!(ks_vs_cdf(&law, xs) < 0.0017);
    // Other pairs fall back to a numeric product.
    let r = ParentDistribution::rayleigh(1.0).unwrap();
    assert_eq!(hetero_product_law(&[r, u]).unwrap().form(), LawForm::Numeric);
}

#[test]
fn derived_laws_normalise_and_invert() {
    for law in derived_laws() {
        let mass = total_mass(&law);
        assert!((mass - 1.0).abs() < 1e-6, "{:?}: mass {mass}", law.parents());
        for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let q = law.quantile(p).unwrap();
            let c = law.cdf(q);
            assert!((c - p).abs() < 1e-8, "{:?}: cdf(q({p})) = {c}", law.parents());
        }
    }
}

#[test]
fn closed_sums_match_numeric_convolution() {
    for d in parents() {
        let closed = sum_law(d, 2).unwrap();
        let numeric = closed.clone().force_numeric();
        assert_eq!(numeric.form(), LawForm::Numeric);
        let (lo, hi) = (closed.quantile(0.0005).unwrap(), closed.quantile(0.9995).unwrap());
        for i in 0..200 {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / 200.0;
            let (a, b) = (closed.pdf(x), numeric.pdf(x));
            assert!((a - b).abs() < 1e-6, "{d}: x={x}: {a} vs {b}");
            let (a, b) = (closed.cdf_sf(x), numeric.cdf_sf(x));
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "{d}: x={x}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn closed_products_match_numeric_quadrature() {
    let laws = [
        product_law(ParentDistribution::uniform(0.0, 1.0).unwrap(), 2).unwrap(),
        product_law(ParentDistribution::normal(0.0, 1.0).unwrap(), 2).unwrap(),
        hetero_product_law(&[
            ParentDistribution::gamma(2.0, 1.0).unwrap(),
            ParentDistribution::uniform(0.0, 1.0).unwrap(),
        ])
        .unwrap(),
    ];
    for closed in laws {
        let numeric = closed.clone().force_numeric();
        for x in [-2.0, -0.3, 0.05, 0.4, 0.9, 1.7, 3.0] {
            let (a, b) = (closed.pdf(x), numeric.pdf(x));
            assert!((a - b).abs() < 1e-6, "{:?}: x={x}: {a} vs {b}", closed.parents());
            let (a, b) = (closed.cdf(x), numeric.cdf(x));
            assert!((a - b).abs() < 1e-8, "{:?}: cdf x={x}: {a} vs {b}", closed.parents());
        }
    }
}

#[test]
fn sampling_agrees_with_cdf() {
    let crit = 1.63 / (1e5f64).sqrt();
    for d in parents() {
        let xs: Vec<f64> = (0..100_000u64).map(|i| d.sample(&mut CounterRng::new(8, i))).collect();
        let ks = ks_vs_cdf(&d, xs);
        assert!(ks < crit, "{d}: ks {ks}");
    }
    for law in derived_laws() {
        let xs: Vec<f64> = (0..100_000u64).map(|i| law.sample(&mut CounterRng::new(9, i))).collect();
        let ks = ks_vs_cdf(&law, xs);
        assert!(ks < crit, "{:?}: ks {ks}", law.parents());
    }
}

#[test]
fn parse_grammar() {
    assert_eq!("normal(0,1)".parse::<ParentDistribution>().unwrap(), ParentDistribution::normal(0.0, 1.0).unwrap());
    assert_eq!(" Uniform( 0 , 1 ) ".parse::<ParentDistribution>().unwrap(), ParentDistribution::uniform(0.0, 1.0).unwrap());
    assert_eq!("EXP(2)".parse::<ParentDistribution>().unwrap(), ParentDistribution::exponential(2.0).unwrap());
    assert_eq!("rayleigh(1)".parse::<ParentDistribution>().unwrap(), ParentDistribution::rayleigh(1.0).unwrap());
    assert_eq!("gamma(2,1)".parse::<ParentDistribution>().unwrap(), ParentDistribution::gamma(2.0, 1.0).unwrap());
    for bad in ["normal(0)", "cauchy(0,1)", "normal 0,1", "exp(x)", "uniform(1,0)", "exp(-1)", "gamma(2,1"] {
        assert!(bad.parse::<ParentDistribution>().is_err(), "{bad}");
    }
}

proptest! {
    #[test]
    fn display_round_trips(a in -10.0f64..10.0, w in 0.01f64..10.0, s in 0.01f64..10.0) {
        for d in [
            ParentDistribution::uniform(a, a + w).unwrap(),
            ParentDistribution::normal(a, s).unwrap(),
            ParentDistribution::exponential(s).unwrap(),
            ParentDistribution::rayleigh(s).unwrap(),
            ParentDistribution::gamma(w, s).unwrap(),
        ] {
            prop_assert_eq!(d.to_string().parse::<ParentDistribution>().unwrap(), d);
        }
    }

    #[test]
    fn cdf_is_monotone(x in -5.0f64..5.0, dx in 0.0f64..2.0) {
        for d in parents() {
            prop_assert!(d.cdf(x) <= d.cdf(x + dx));
            prop_assert!((d.cdf(x) + d.sf(x) - 1.0).abs() < 1e-14);
        }
        let tri = sum_law(parents()[0], 2).unwrap();
        prop_assert!(tri.cdf(x) <= tri.cdf(x + dx));
    }
}
