use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use ordstat_core::cache_sizing::{mc_cache_ratio, CatalogModel};
use ordstat_core::distributions::ParentDistribution;
use ordstat_core::monte_carlo::{goodness_of_fit, sample_latent, McConfig, Reference, ReferenceCdf};
use ordstat_core::order_engine::{LatentSpec, Role};

fn sampling(c: &mut Criterion) {
    let p = ParentDistribution::normal(0.0, 1.0).unwrap();
    let trials = 100_000;
    let cfg = McConfig::new(LatentSpec::new(10, 3, 2, Role::Factor).unwrap(), vec![p], trials, 1).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.throughput(Throughput::Elements(trials));
    g.bench_function("sample_latent n=10 m=2", |b| b.iter(|| sample_latent(&cfg).unwrap()));
    let xs = sample_latent(&cfg).unwrap();
    let table = ReferenceCdf::from_law(&p).unwrap();
    g.bench_function("goodness_of_fit 1e5", |b| {
        b.iter(|| goodness_of_fit(&xs, Reference::Table(&table), 100).unwrap())
    });
    g.finish();
}

fn cache(c: &mut Criterion) {
    let model = CatalogModel::reference(100).unwrap();
    c.bench_function("mc_cache_ratio n=100 1e3 replications", |b| {
        b.iter(|| mc_cache_ratio(&model, 32, 1000, 3).unwrap())
    });
}

criterion_group!(benches, sampling, cache);
criterion_main!(benches);
