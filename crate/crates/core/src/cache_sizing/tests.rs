use super::*;
use crate::quad::{integrate_with_points, QuadTol};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn density_examples() {
    for x in [0.1, 1.0, 3.0, 10.0] {
        close(most_important_size_density(1, x).unwrap(), x * (-x).exp(), 1e-15);
    }
    close(most_important_size_density(2, 0.0).unwrap(), 0.0, 1e-15);
    // Just above zero the series is the n=2 polynomial expansion, also ~0.
    assert!(most_important_size_density(2, 1e-9).unwrap().abs() < 1e-8);
    assert_eq!(most_important_size_density(5, -1.0).unwrap(), 0.0);
    assert!(most_important_size_density(0, 1.0).is_err());
}

#[test]
fn density_normalises_with_expected_mean() {
    let tol = QuadTol::new(1e-12, 1e-10);
    for n in [1u64, 2, 5, 10, 50] {
        let f = |x: f64| most_important_size_density(n, x).unwrap();
        let mass = integrate_with_points(f, 0.0, f64::INFINITY, &[1.0, 10.0], tol).value;
        let mean = integrate_with_points(|x| x * f(x), 0.0, f64::INFINITY, &[1.0, 10.0], tol).value;
        close(mass, 1.0, 1e-6);
        close(mean, expected_max_importance_size(n).unwrap(), 1e-4);
    }
}

#[test]
fn series_and_quadrature_agree_at_the_crossover() {
    let spec = LatentSpec::new(SERIES_MAX_N, SERIES_MAX_N, 2, Role::Factor).unwrap();
    let model = CatalogModel::reference(SERIES_MAX_N).unwrap();
    let parents = [model.size_dist, model.popularity_dist];
    for x in [2.0, 4.0, 5.0, 6.0, 8.0, 12.0] {
        let series = most_important_size_density(SERIES_MAX_N, x).unwrap();
        let quad = latent_factor_density_hetero(&parents, spec, x).unwrap();
        close(series, quad, 1e-9);
    }
    // One past the crossover uses quadrature throughout and stays continuous in n.
    let a = most_important_size_density(SERIES_MAX_N + 1, 6.0).unwrap();
    let b = most_important_size_density(SERIES_MAX_N, 6.0).unwrap();
    assert!((a - b).abs() < 0.05 * b);
}

#[test]
fn expected_max_examples_and_bounds() {
    close(expected_max_importance_size(1).unwrap(), 2.0, 1e-15);
    close(expected_max_importance_size(2).unwrap(), 2.5, 1e-15);
    close(expected_max_importance_size(1000).unwrap(), 8.48547, 1e-5);
    for n in [2u64, 10, 100, 1000, 1_000_000] {
        let e = expected_max_importance_size(n).unwrap();
        let (lo, hi) = expected_max_importance_bounds(n).unwrap();
        assert!(lo <= e && e <= hi, "n={n}: {lo} <= {e} <= {hi}");
    }
    assert!(expected_max_importance_bounds(1).is_err());
    let seq: Vec<f64> = (1..200).map(|n| expected_max_importance_size(n).unwrap()).collect();
    assert!(seq.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn kth_size_examples() {
    close(expected_kth_size_asymptotic(50, 100).unwrap(), 1.0 + 2f64.ln(), 1e-12);
    close(expected_kth_size_asymptotic(99, 100).unwrap(), 5.605_170_2, 1e-7);
    close(expected_kth_size_asymptotic(1, 1_000_000_000).unwrap(), 1.0, 1e-8);
    assert!(matches!(expected_kth_size_asymptotic(100, 100), Err(Error::Domain { .. })));
    assert!(expected_kth_size_asymptotic(0, 100).is_err());
    let seq: Vec<f64> = (1..100).map(|k| expected_kth_size_asymptotic(k, 100).unwrap()).collect();
    assert!(seq.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn cumulative_size_examples() {
    for n in [1u64, 7, 100] {
        close(cumulative_expected_size(1, n).unwrap(), expected_max_importance_size(n).unwrap(), 1e-15);
    }
    let direct = expected_max_importance_size(100).unwrap()
        + (96..=99).map(|i| 1.0 - (1.0 - i as f64 / 100.0).ln()).sum::<f64>();
    close(cumulative_expected_size(5, 100).unwrap(), direct, 1e-12);
    let full = cumulative_expected_size(100, 100).unwrap();
    assert!(full > 100.0);
    assert!(cumulative_expected_size(0, 100).is_err());
    assert!(cumulative_expected_size(101, 100).is_err());
}

#[test]
fn rest_forms_agree() {
    for n in [10u64, 100, 1000] {
        for q in 2..n {
            let direct: f64 = (n - q + 1..n).map(|i| expected_kth_size_asymptotic(i, n).unwrap()).sum();
            let poch = rest_pochhammer(q, n).unwrap();
            let simple = rest_simplified(q, n).unwrap();
            assert!((direct - poch).abs() <= 1e-8 * direct, "n={n} q={q}: {direct} vs {poch}");
            assert!((direct - simple).abs() <= 1e-8 * direct, "n={n} q={q}: {direct} vs {simple}");
        }
        close(rest_pochhammer(1, n).unwrap(), 0.0, 1e-12);
    }
}

#[test]
fn ratio_properties() {
    let n = 100;
    let r: Vec<f64> = (1..=n).map(|q| cache_ratio(q, n).unwrap()).collect();
    assert!(r[0] > 0.0);
    assert!(r.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(r[n as usize - 1], 1.0);
    assert!(r[31] > 0.5, "R(32) = {}", r[31]);
    assert_eq!(cache_report(1, n).unwrap().method, Method::Exact);
    assert_eq!(cache_report(32, n).unwrap().method, Method::Asymptotic);
}

#[test]
fn simulated_ratio() {
    let model = CatalogModel::reference(100).unwrap();
    let est = mc_cache_ratio(&model, 32, 10_000, 6).unwrap();
    close(est.ratio, cache_ratio(32, 100).unwrap(), 0.02);
    assert_eq!(est, mc_cache_ratio(&model, 32, 10_000, 6).unwrap());

    let full = mc_cache_ratio(&model, 100, 100, 1).unwrap();
    assert_eq!(full.ratio, 1.0);

    let big = CatalogModel::reference(1000).unwrap();
    let top = mc_cache_ratio(&big, 1, 10_000, 9).unwrap();
    let target = expected_max_importance_size(1000).unwrap() / cumulative_expected_size(1000, 1000).unwrap();
    assert!(
        (top.ratio - target).abs() <= 3.0 * top.standard_error,
        "{top:?} vs {target}"
    );
    assert!(mc_cache_ratio(&model, 1, 99, 0).is_err());
}

#[test]
fn general_model_matches_reference_formula() {
    let model = CatalogModel::reference(5).unwrap();
    assert!(model.is_reference());
    let dens = model.most_important_size().unwrap();
    for x in [0.5, 2.0, 4.0] {
        close(dens.density(x).unwrap(), most_important_size_density(5, x).unwrap(), 1e-8);
    }
}
