use criterion::{black_box, criterion_group, criterion_main, Criterion};
use twistmoment_core::charsum::{s_brute, CharSumQuery, Flavor};
use twistmoment_core::gauss::{gauss_brute, gauss_closed};
use twistmoment_core::kernels::w_half;
use twistmoment_core::modform::{build_tau, Ladder};
use twistmoment_core::{kronecker, EigenformCoefficients, TwistEngine};

fn tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("tau table 1e5");
    g.sample_size(10);
    g.bench_function("jacobi", |b| b.iter(|| build_tau(black_box(100_000), Ladder::Jacobi).unwrap()));
    g.bench_function("pentagonal", |b| b.iter(|| build_tau(black_box(100_000), Ladder::Pentagonal).unwrap()));
    g.finish();
}

fn arithmetic(c: &mut Criterion) {
    c.bench_function("kronecker 1e4 pairs", |b| {
        b.iter(|| (1..10_000i64).map(|n| kronecker(black_box(-3 * 7 * 11), n) as i64).sum::<i64>())
    });
    c.bench_function("gauss closed n=3003", |b| b.iter(|| gauss_closed(black_box(5), 3003).unwrap()));
    c.bench_function("gauss brute n=3003", |b| b.iter(|| gauss_brute(black_box(5), 3003).unwrap()));
    c.bench_function("w_half", |b| b.iter(|| w_half(black_box(0.7), 12)));
}

fn central_values(c: &mut Criterion) {
    let coeffs = EigenformCoefficients::build_delta(400_000).unwrap();
    let engine = TwistEngine::new(&coeffs);
    let mut g = c.benchmark_group("central value");
    g.sample_size(20);
    for d in [101u64, 1001, 10_001] {
        g.bench_function(format!("d={d}"), |b| b.iter(|| engine.l_half_twist(black_box(d), 1e-8).unwrap()));
    }
    g.finish();
    let query = CharSumQuery {
        m: 100.0,
        n: 1000.0,
        t: 1.0,
        flavor: Flavor::FundamentalDiscriminants,
    };
    c.bench_function("flat character sum M=1e2 N=1e3", |b| b.iter(|| s_brute(&coeffs, black_box(&query)).unwrap()));
}

criterion_group!(benches, tables, arithmetic, central_values);
criterion_main!(benches);
