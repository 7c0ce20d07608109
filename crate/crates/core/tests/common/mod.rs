#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropt_core::{Complex64, Constellation, FreqSymbol, Modem, SystemConfig};

pub const SMALL_TR: [i64; 3] = [-10, 5, 10];

/// 64-point system with 20 data tones and 3 reserved tones.
pub fn small_config() -> SystemConfig {
    let data = (-12..=12)
        .filter(|k| *k != 0 && !SMALL_TR.contains(k))
        .collect();
    SystemConfig::new(64, 8, data, SMALL_TR.to_vec(), Constellation::Qpsk, 11).unwrap()
}

pub fn small_modem() -> Modem {
    Modem::new(small_config())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, sigma: f64) -> Complex64 {
    // Box-Muller, kept local so the oracle does not share sampling code.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = sigma * (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

pub fn random_tr(rng: &mut impl Rng, beta: usize, scale: f64) -> Vec<Complex64> {
    (0..beta)
        .map(|_| {
            Complex64::new(
                scale * (rng.random::<f64>() - 0.5),
                scale * (rng.random::<f64>() - 0.5),
            )
        })
        .collect()
}

/// Symbol `index` of the modem stream with random reserved tones.
pub fn random_state(modem: &Modem, index: u64, tr_scale: f64) -> FreqSymbol {
    let sym = modem.symbol(index);
    let mut r = rng(1000 + index);
    sym.with_tr(random_tr(&mut r, modem.config().beta(), tr_scale))
}

/// `X_m = N^{-1/2} sum_n x_n e^{-i 2 pi n m / N}`, evaluated term by term.
pub fn brute_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (t * m) as f64 / n as f64))
                .sum::<Complex64>()
                / (n as f64).sqrt()
        })
        .collect()
}

/// Time sample `n` (any integer) of the symbol by the direct double sum.
pub fn brute_sample(cfg: &SystemConfig, sym: &FreqSymbol, n: i64) -> Complex64 {
    let nf = cfg.n_fft() as f64;
    cfg.data_indices()
        .iter()
        .zip(&sym.data)
        .chain(cfg.tr_indices().iter().zip(&sym.tr))
        .map(|(&k, d)| d * Complex64::from_polar(1.0, 2.0 * PI * (k * n) as f64 / nf))
        .sum::<Complex64>()
        / nf.sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
