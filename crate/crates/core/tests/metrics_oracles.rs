mod common;

use common::*;
use tropt_core::metrics::v_sat_for_ibo;
use tropt_core::{
    ccdf, ensemble_sdr, papr_db, psd, Algorithm, AlgorithmSettings, Complex64, Constellation,
    Modem, PaModel, SystemConfig, TimeFrame,
};

#[test]
fn papr_is_peak_over_mean() {
    let mut r = rng(1);
    let core: Vec<Complex64> = (0..64).map(|_| gaussian(&mut r, 1.0)).collect();
    let frame = TimeFrame::from_core(&core, 8);
    let peak = core.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mean = core.iter().map(|v| v.norm_sqr()).sum::<f64>() / 64.0;
    assert!((papr_db(&frame).unwrap() - 10.0 * (peak / mean).log10()).abs() < 1e-12);
}

#[test]
fn two_equal_tones_have_three_db_papr() {
    let cfg = SystemConfig::new(64, 8, vec![-3, 7], vec![1], Constellation::Qpsk, 0).unwrap();
    let modem = Modem::new(cfg.clone());
    let one = Complex64::new(1.0, 0.0);
    let sym =
        tropt_core::FreqSymbol::new(&cfg, vec![one, one], vec![Complex64::default()]).unwrap();
    let db = papr_db(&modem.modulate(&sym).unwrap()).unwrap();
    assert!((db - 10.0 * 2f64.log10()).abs() < 1e-9, "{db}");
}

#[test]
fn ccdf_counts_strict_exceedances() {
    let samples = [1.0, 2.0, 2.0, 5.0];
    let t = ccdf(&samples, &[0.0, 1.0, 2.0, 4.9, 5.0]).unwrap();
    let p: Vec<f64> = t.iter().map(|x| x.1).collect();
    assert_eq!(p, vec![1.0, 0.75, 0.25, 0.25, 0.0]);
}

#[test]
fn white_noise_psd_is_flat() {
    let mut r = rng(2024);
    // 125 frames of 1152 samples give 8 segments each
    let frames: Vec<TimeFrame> = (0..125)
        .map(|_| {
            let s: Vec<Complex64> = (0..1152).map(|_| gaussian(&mut r, 1.0)).collect();
            TimeFrame::new(s, 128).unwrap()
        })
        .collect();
    let spec = psd(&frames, 256, 128).unwrap();
    assert_eq!(spec.len(), 256);
    let lin: Vec<f64> = spec.iter().map(|(_, db)| 10f64.powf(db / 10.0)).collect();
    let mean = 10.0 * (lin.iter().sum::<f64>() / lin.len() as f64).log10();
    for (f, db) in &spec {
        assert!((db - mean).abs() <= 0.5, "f={f}: {db} vs {mean}");
    }
    // unit-power noise: one unit per sample on average
    assert!(mean.abs() < 0.1, "{mean}");
}

#[test]
fn single_tone_psd_has_a_clear_peak() {
    let k0 = 40.0;
    let s: Vec<Complex64> = (0..1152)
        .map(|n| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k0 * n as f64 / 256.0))
        .collect();
    let spec = psd(&[TimeFrame::new(s, 128).unwrap()], 256, 128).unwrap();
    let (f_peak, p_peak) =
        spec.iter().copied().fold(
            (0.0, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    assert!((f_peak - k0 / 256.0).abs() < 1e-12);
    let mut sorted: Vec<f64> = spec.iter().map(|x| x.1).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    assert!(p_peak - median >= 30.0);
}

#[test]
fn sdr_is_infinite_without_distortion() {
    let modem = small_modem();
    let pa = PaModel::from_p(10.0, 1e6).unwrap();
    let settings = AlgorithmSettings {
        psd_segment_len: 32,
        psd_overlap: 16,
        ..AlgorithmSettings::new(Algorithm::Reference)
    };
    let m = ensemble_sdr(&modem, &pa, &settings, 10, 3).unwrap();
    assert_eq!(m.sdr_db, f64::INFINITY);
}

#[test]
fn same_backoff_gives_same_threshold_for_every_algorithm() {
    let modem = small_modem();
    let v = v_sat_for_ibo(modem.config(), 6.0);
    let pa = PaModel::from_p(4.0, v).unwrap();
    for alg in Algorithm::ALL {
        let settings = AlgorithmSettings {
            psd_segment_len: 32,
            psd_overlap: 16,
            ..AlgorithmSettings::new(alg)
        };
        let a = ensemble_sdr(&modem, &pa, &settings, 16, 5).unwrap();
        let b = ensemble_sdr(&modem, &pa, &settings, 16, 5).unwrap();
        assert_eq!(a.v_sat, v);
        assert_eq!(a, b, "{alg}");
    }
}
