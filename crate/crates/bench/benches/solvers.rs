use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mwc::connect::mu_map;
use mwc::funcparse::{differentiate, parse};
use mwc::{classify_causal, connect, integrate_geodesic, StopSpec};
use mwc_bench::{coarse, reissner_nordstrom, strip, Fixture, WARP_EXPRESSIONS};

fn fixtures() -> Vec<Fixture> {
    vec![strip(), reissner_nordstrom()]
}

fn expressions(c: &mut Criterion) {
    c.bench_function("parse_and_differentiate", |b| {
        b.iter(|| {
            for text in WARP_EXPRESSIONS {
                let e = parse(black_box(text)).expect("parses");
                black_box(differentiate(&e));
            }
        })
    });
    let parsed: Vec<_> = WARP_EXPRESSIONS.iter().map(|t| parse(t).expect("parses")).collect();
    c.bench_function("evaluate", |b| {
        b.iter(|| {
            for e in &parsed {
                black_box(e.eval(black_box(1.3)).ok());
            }
        })
    });
}

fn causal(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify_causal");
    for f in fixtures() {
        let p = &f.problem;
        g.bench_function(f.name, |b| {
            b.iter(|| classify_causal(&f.model, p.tau0, p.tau1, black_box(&p.l)).expect("classifies"))
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let f = strip();
    let stop = StopSpec::fibers(&f.problem.l);
    c.bench_function("integrate_geodesic/strip", |b| {
        b.iter(|| integrate_geodesic(&f.model, black_box(&[0.9, 0.1]), -2.6, 1.0, 0.2, &stop).expect("integrates"))
    });
}

fn search(c: &mut Criterion) {
    let opts = coarse();
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    for f in fixtures() {
        let res = opts.resolution(f.model.n());
        g.bench_with_input(BenchmarkId::new("mu_map", f.name), &f, |b, f| {
            b.iter(|| mu_map(&f.model, &f.problem, res).expect("maps"))
        });
    }
    // The sphere fixture retries every winding when the coarse grid leaves
    // the base search undecided, which takes over a minute per iteration.
    let f = strip();
    g.bench_function("connect/strip", |b| b.iter(|| connect(&f.model, &f.problem, &opts).expect("runs")));
    g.finish();
}

criterion_group!(benches, expressions, causal, oracle, search);
criterion_main!(benches);
