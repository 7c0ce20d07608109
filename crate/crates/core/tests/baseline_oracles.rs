mod common;

use common::*;
use tropt_core::ops::count_ops_ncc_tr;
use tropt_core::{
    count_ops_baseline, solve_ncc_tr, solve_papr_tr, BaselineAlgorithm, BaselineConfig, Complex64,
    Constellation, FreqSymbol, Modem, SystemConfig,
};

fn peak(modem: &Modem, sym: &FreqSymbol) -> f64 {
    let frame = modem.modulate(sym).unwrap();
    frame.core().iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()))
}

/// Smallest peak power over a square grid of single-tone values, refined
/// around the best point.
fn grid_min_peak(modem: &Modem, sym: &FreqSymbol) -> f64 {
    let (mut cx, mut cy, mut half) = (0.0, 0.0, 4.0);
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let steps = 40;
        let (mut bx, mut by) = (cx, cy);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = cx - half + 2.0 * half * i as f64 / steps as f64;
                let y = cy - half + 2.0 * half * j as f64 / steps as f64;
                let p = peak(modem, &sym.with_tr(vec![Complex64::new(x, y)]));
                if p < best {
                    best = p;
                    (bx, by) = (x, y);
                }
            }
        }
        (cx, cy, half) = (bx, by, half / 8.0);
    }
    best
}

#[test]
fn single_tone_papr_tr_matches_grid_search() {
    let data = (-12..=12).filter(|&k| k != 0 && k != 5).collect();
    let cfg = SystemConfig::new(32, 4, data, vec![5], Constellation::Qpsk, 4).unwrap();
    let modem = Modem::new(cfg);
    for i in 0..6 {
        let sym = modem.symbol(i);
        let (out, diag) = solve_papr_tr(&modem, &sym, &BaselineConfig::papr_tr()).unwrap();
        let got = peak(&modem, &out);
        assert!((got - diag.final_objective).abs() < 1e-12 * got);
        let grid = grid_min_peak(&modem, &sym);
        let gap_db = 10.0 * (got / grid).log10();
        assert!(gap_db.abs() < 0.05, "symbol {i}: {gap_db} dB");
    }
}

#[test]
fn papr_tr_lowers_the_peak_on_the_small_system() {
    let modem = small_modem();
    let mut gains = 0.0;
    for i in 0..20 {
        let sym = modem.symbol(i);
        let (out, diag) = solve_papr_tr(&modem, &sym, &BaselineConfig::papr_tr()).unwrap();
        assert_eq!(out.data, sym.data);
        let (before, after) = (peak(&modem, &sym), peak(&modem, &out));
        assert!(after <= before);
        assert!(diag.iterations <= 50);
        gains += before / after;
    }
    assert!(gains / 20.0 > 1.05);
}

#[test]
fn ncc_tr_counter_sums_the_per_iteration_formula() {
    let modem = small_modem();
    let v = 1.1 * modem.config().data_power().sqrt();
    for i in 0..10 {
        let sym = modem.symbol(i);
        let (out, diag) = solve_ncc_tr(&modem, &sym, &BaselineConfig::ncc_tr(v)).unwrap();
        assert_eq!(out.data, sym.data);
        assert_eq!(diag.theta_trace.len(), diag.iterations);
        let want: u64 = diag
            .theta_trace
            .iter()
            .map(|&t| count_ops_ncc_tr(64, t))
            .sum();
        assert_eq!(diag.ops_counted, want);
        assert_eq!(diag.ops_formula, want);
        assert!(out.tr.iter().all(|d| d.re.is_finite() && d.im.is_finite()));
    }
}

#[test]
fn ncc_tr_reduces_clipping_noise() {
    let modem = small_modem();
    let v = 1.2 * modem.config().data_power().sqrt();
    let (mut before, mut after) = (0.0, 0.0);
    for i in 0..20 {
        let (_, diag) = solve_ncc_tr(&modem, &modem.symbol(i), &BaselineConfig::ncc_tr(v)).unwrap();
        before += diag.objective_trace[0];
        after += diag.objective_trace.last().unwrap();
    }
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn ncc_tr_is_idle_when_nothing_clips() {
    let modem = small_modem();
    let sym = modem.symbol(2);
    let (out, diag) = solve_ncc_tr(&modem, &sym, &BaselineConfig::ncc_tr(1e3)).unwrap();
    assert_eq!(out, sym);
    assert_eq!(diag.iterations, 1);
    assert_eq!(diag.theta_trace, vec![0]);
    assert!(diag.converged);
}

#[test]
fn closed_form_tables() {
    assert_eq!(
        count_ops_baseline(BaselineAlgorithm::PaprTr, 1024, 11, 0),
        160_327
    );
    assert_eq!(
        count_ops_baseline(BaselineAlgorithm::NccTr, 1024, 11, 0),
        81_933
    );
    assert_eq!(
        count_ops_baseline(BaselineAlgorithm::NccTr, 1024, 11, 10),
        81_933 + 140
    );
}
