//! Sequential and rayon execution of the three batch estimators.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flatbill::statistics::cells::{locate_cells, CellScanConfig};
use flatbill::statistics::correlations::{correlations, CorrelationConfig, Observable};
use flatbill::statistics::tail::{tail_histograms, ReturnTailConfig};
use flatbill::{build_table, Billiard, Exec, FlatFamilyParams, WindowSpec};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn billiard(beta: f64) -> Billiard {
    let table = build_table(FlatFamilyParams::new(beta)).unwrap();
    let window = WindowSpec::new(&table, 0.5).unwrap();
    Billiard::new(table, window)
}

fn return_tail(c: &mut Criterion) {
    let b = billiard(6.0);
    let cfg = ReturnTailConfig {
        samples: 200_000,
        n_max: 10_000,
        seed: 1,
        batch: 1 << 12,
    };
    let mut g = c.benchmark_group("return_tail");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bch, &e| {
            bch.iter(|| tail_histograms(&b, &cfg, e))
        });
    }
    g.finish();
}

fn correlation_series(c: &mut Criterion) {
    let b = billiard(6.0);
    let mut cfg = CorrelationConfig::new(400_000, Observable::FreePath, Observable::FreePath, 1);
    cfg.chunks = 16;
    cfg.burn_in = 1000;
    let mut g = c.benchmark_group("correlations");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bch, &e| {
            bch.iter(|| correlations(&b, &cfg, e).unwrap())
        });
    }
    g.finish();
}

fn cell_scan(c: &mut Criterion) {
    let b = billiard(6.0);
    let cfg = CellScanConfig {
        n_top: 60,
        ..Default::default()
    };
    let mut g = c.benchmark_group("cells");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bch, &e| {
            bch.iter(|| locate_cells(&b, &cfg, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, return_tail, correlation_series, cell_scan);
criterion_main!(benches);
