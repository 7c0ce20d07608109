use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tropt_core::experiments::default_paper_config;
use tropt_core::metrics::v_sat_for_ibo;
use tropt_core::solver::{evaluate, hessian_direct, hessian_fast, RappCost};
use tropt_core::{
    solve_ac_tr, solve_ncc_tr, solve_papr_tr, AcTrConfig, BaselineConfig, Modem, OpCounter, RappPa,
};

fn setup() -> (Modem, RappPa, f64) {
    let modem = Modem::new(default_paper_config());
    let v = v_sat_for_ibo(modem.config(), 7.0);
    (modem, RappPa::new(10.0, v, 1.0).unwrap(), v)
}

fn solvers(c: &mut Criterion) {
    let (modem, pa, v) = setup();
    let sym = modem.symbol(0);
    let opts = AcTrConfig::default();
    let mut g = c.benchmark_group("solve_one_symbol");
    g.bench_function("ac_tr", |b| {
        b.iter(|| solve_ac_tr(&modem, &pa, black_box(&sym), &opts).unwrap())
    });
    let papr = BaselineConfig::papr_tr();
    g.bench_function("papr_tr", |b| {
        b.iter(|| solve_papr_tr(&modem, black_box(&sym), &papr).unwrap())
    });
    let ncc = BaselineConfig::ncc_tr(v);
    g.bench_function("ncc_tr", |b| {
        b.iter(|| solve_ncc_tr(&modem, black_box(&sym), &ncc).unwrap())
    });
    g.finish();
}

fn hessians(c: &mut Criterion) {
    let (modem, pa, _) = setup();
    let cfg = modem.config();
    let y = modem.modulate(&modem.symbol(1)).unwrap().core().to_vec();
    let cost = RappCost::new(&pa, 1.0).unwrap();
    let ev = evaluate(&cost, &y, &cfg.multiplicity(), &mut OpCounter::new());
    let mut g = c.benchmark_group("hessian");
    g.bench_function("fast", |b| {
        b.iter(|| {
            let mut ops = OpCounter::new();
            hessian_fast(
                &modem,
                black_box(&y),
                &ev.power,
                &ev.gamma,
                &ev.lambda,
                &mut ops,
            )
        })
    });
    g.bench_function("direct", |b| {
        b.iter(|| hessian_direct(cfg, black_box(&y), &ev.gamma, &ev.lambda))
    });
    g.finish();
}

criterion_group!(benches, solvers, hessians);
criterion_main!(benches);
