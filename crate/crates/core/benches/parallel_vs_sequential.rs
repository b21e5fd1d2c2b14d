use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qconv::moments::moment_sequence;
use qconv::qcore::QContext;
use qconv::special::{SpecialFunction, SpecialKind};
use qconv::verify::{run, VerifyConfig};

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    [("sequential", one), ("parallel", all)]
}

fn moments(c: &mut Criterion) {
    let ctx = QContext::new(0.7).unwrap();
    let f = SpecialFunction::new(SpecialKind::StripExample(0.5), &ctx).on_lattice(0.5).unwrap();
    let mut g = c.benchmark_group("moment_sequence_strip_E120");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| moment_sequence(&f, 120, 0.5, &ctx).unwrap()))
        });
    }
    g.finish();
}

fn suite(c: &mut Criterion) {
    let cfg = VerifyConfig { q: 0.5, gamma: 1.0, only: Some("fourier".into()), ..Default::default() };
    let mut g = c.benchmark_group("verify_fourier_family");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| pool.install(|| run(&cfg).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, moments, suite);
criterion_main!(benches);
