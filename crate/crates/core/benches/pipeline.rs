use std::hint::black_box;

use cgolab::cgo::{self, CgoConfig};
use cgolab::par;
use cgolab::proxies::{self, Proxy};
use cgolab::report::{self, PipelineConfig};
use cgolab::synth::{generate_panel, DgpConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn panel() -> cgolab::StockPanel {
    let cfg = DgpConfig {
        n_stocks: 200,
        n_months: 60,
        seed: 1,
        ..DgpConfig::default()
    };
    generate_panel(&cfg).expect("synthetic panel").panel
}

fn bench(c: &mut Criterion) {
    let panel = panel();
    let cfg = PipelineConfig {
        proxies: vec![Proxy::Beta, Proxy::Ivol],
        ..PipelineConfig::default()
    };

    let mut g = c.benchmark_group("cgo_matrix");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| cgo::monthly_cgo_matrix(black_box(&panel), &CgoConfig::default()))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| par::run_sequential(|| cgo::monthly_cgo_matrix(black_box(&panel), &CgoConfig::default())))
    });
    g.finish();

    let mut g = c.benchmark_group("ivol_matrix");
    g.sample_size(10);
    let pc = proxies::ProxyConfig::default();
    g.bench_function("parallel", |b| {
        b.iter(|| proxies::proxy_matrix(black_box(&panel), Proxy::Ivol, &pc))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| par::run_sequential(|| proxies::proxy_matrix(black_box(&panel), Proxy::Ivol, &pc)))
    });
    g.finish();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| report::run_pipeline(black_box(&panel), &cfg).unwrap())
    });
    g.bench_function("sequential", |b| {
        b.iter(|| par::run_sequential(|| report::run_pipeline(black_box(&panel), &cfg).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
