mod common;

use common::*;
use proptest::prelude::*;
use tropt_core::metrics::v_sat_for_ibo;
use tropt_core::{
    ccdf, gamma_lambda, solve_ac_tr, solve_ncc_tr, solve_papr_tr, AcTrConfig, BaselineConfig,
    Complex64, RappPa,
};

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn vec64() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rapp_output_is_bounded_monotone_and_phase_preserving(
        p in 1.0..30.0f64,
        v in 0.1..5.0f64,
        r in 0.0..20.0f64,
        dr in 0.0..1.0f64,
        phase in -3.1..3.1f64,
    ) {
        let pa = RappPa::new(p, v, 1.0).unwrap();
        let a = pa.amplitude(r);
        prop_assert!(a <= v * (1.0 + 1e-12));
        prop_assert!(a <= r * (1.0 + 1e-12));
        // saturated outputs sit at V up to rounding
        prop_assert!(pa.amplitude(r + dr) >= a * (1.0 - 4.0 * f64::EPSILON));
        let out = pa.amplify_sample(Complex64::from_polar(r, phase));
        if r > 1e-9 {
            let diff = (out.arg() - phase).rem_euclid(2.0 * std::f64::consts::PI);
            prop_assert!(diff.min(2.0 * std::f64::consts::PI - diff) < 1e-9);
        }
    }

    #[test]
    fn dft_round_trip_and_parseval(x in vec64()) {
        let modem = small_modem();
        let f = modem.dft(&x).unwrap();
        let back = modem.idft(&f).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ef: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((ex - ef).abs() <= 1e-12 * ex.max(1.0));
    }

    #[test]
    fn modulation_is_linear_with_cyclic_prefix(
        seed in 0u64..1000,
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let modem = small_modem();
        let s1 = random_state(&modem, seed, 2.0);
        let s2 = random_state(&modem, seed + 1, 2.0);
        let mix = |u: &[Complex64], v: &[Complex64]| -> Vec<Complex64> {
            u.iter().zip(v).map(|(x, y)| x * a + y * b).collect()
        };
        let combo = tropt_core::FreqSymbol {
            data: mix(&s1.data, &s2.data),
            tr: mix(&s1.tr, &s2.tr),
        };
        let y1 = modem.modulate(&s1).unwrap();
        let y2 = modem.modulate(&s2).unwrap();
        let y = modem.modulate(&combo).unwrap();
        prop_assert!(y.has_cyclic_prefix());
        for i in 0..y.len() {
            let want = y1.samples()[i] * a + y2.samples()[i] * b;
            prop_assert!((y.samples()[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn ccdf_is_a_decreasing_probability(
        samples in prop::collection::vec(0.0..15.0f64, 1..200),
    ) {
        let table = ccdf(&samples, &tropt_core::metrics::default_ccdf_thresholds()).unwrap();
        prop_assert!(table.iter().all(|(_, p)| (0.0..=1.0).contains(p)));
        prop_assert!(table.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn gamma_is_nonnegative_for_k_at_least_one(
        y in vec64(),
        p in 1.0..20.0f64,
        v in 0.2..3.0f64,
        k in 1.0..2.0f64,
    ) {
        let cfg = small_config();
        let pa = RappPa::new(p, v, 1.0).unwrap();
        let (gamma, _) = gamma_lambda(&cfg, &pa, &y, k).unwrap();
        prop_assert!(gamma.iter().all(|&g| g >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solvers_never_touch_data(seed in 0u64..10_000, ibo in 0.0..10.0f64, p in 1.5..12.0f64) {
        let modem = small_modem();
        let sym = modem.symbol(seed);
        let v = v_sat_for_ibo(modem.config(), ibo);
        let pa = RappPa::new(p, v, 1.0).unwrap();
        let (a, diag) = solve_ac_tr(&modem, &pa, &sym, &AcTrConfig::default()).unwrap();
        prop_assert_eq!(&a.data, &sym.data);
        prop_assert!(diag.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let (b, _) = solve_papr_tr(&modem, &sym, &BaselineConfig::papr_tr()).unwrap();
        prop_assert_eq!(&b.data, &sym.data);
        let (c, _) = solve_ncc_tr(&modem, &sym, &BaselineConfig::ncc_tr(v)).unwrap();
        prop_assert_eq!(&c.data, &sym.data);
    }

    #[test]
    fn papr_tr_never_raises_the_peak(seed in 0u64..10_000, scale in 0.0..3.0f64) {
        let modem = small_modem();
        let sym = random_state(&modem, seed, scale);
        let peak = |s: &tropt_core::FreqSymbol| {
            modem.modulate(s).unwrap().core().iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()))
        };
        let (out, _) = solve_papr_tr(&modem, &sym, &BaselineConfig::papr_tr()).unwrap();
        prop_assert!(peak(&out) <= peak(&sym));
    }
}
