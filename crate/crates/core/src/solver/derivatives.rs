//! Jacobian and Hessian of a separable objective with respect to the stacked
//! real/imaginary parts of the reserved-tone symbols.
//!
//! The gradient is `[q; w]` with `q_l + i w_l = F(Γ ⊙ y)_{T_l}`. The Hessian
//! blocks follow from two more transforms, `P = F(Λ ⊙ y^2)` and
//! `R = F(Γ + Λ ⊙ |y|^2 / 2)`, sampled at `T_l + T_m` and `T_l - T_m`:
//!
//! ```text
//! A_lm =  Re P / (2 sqrt N) + Re R / sqrt N
//! B_lm =  Im P / (2 sqrt N) - Im R / sqrt N
//! D_lm = -Re P / (2 sqrt N) + Re R / sqrt N
//! ```
//!
//! and `C = B^T`. The `direct` variants evaluate the per-element sums with
//! `F_{n,l} = e^{-i 2 pi n T_l / N} / sqrt N` and serve as a cross-check.

use num_complex::Complex64;

use super::linalg::DenseMatrix;
use crate::ofdm::{unit_phase, Modem, SystemConfig};
use crate::ops::OpCounter;

/// Gradient via one forward DFT of `Γ ⊙ y`.
pub fn jacobian_fast(
    modem: &Modem,
    y: &[Complex64],
    gamma: &[f64],
    ops: &mut OpCounter,
) -> Vec<f64> {
    let cfg = modem.config();
    let n = cfg.n_fft();
    let beta = cfg.beta();
    let mut buf: Vec<Complex64> = y.iter().zip(gamma).map(|(s, g)| s * g).collect();
    ops.add_each(n, 2);
    modem.dft_in_place(&mut buf);
    ops.complex_fft(n);
    let mut jac = vec![0.0; 2 * beta];
    for (l, &t) in cfg.tr_indices().iter().enumerate() {
        let v = buf[cfg.bin(t)];
        jac[l] = v.re;
        jac[beta + l] = v.im;
    }
    jac
}

/// Hessian via one complex and one real-input DFT.
pub fn hessian_fast(
    modem: &Modem,
    y: &[Complex64],
    power: &[f64],
    gamma: &[f64],
    lambda: &[f64],
    ops: &mut OpCounter,
) -> DenseMatrix {
    let cfg = modem.config();
    let n = cfg.n_fft();
    let beta = cfg.beta();
    let half = 0.5 / (n as f64).sqrt();
    let full = 1.0 / (n as f64).sqrt();
    let mut sq = Vec::with_capacity(n);
    let mut real = Vec::with_capacity(n);
    for i in 0..n {
        let lam = lambda[i] * half;
        sq.push(y[i] * y[i] * lam);
        real.push(Complex64::new(gamma[i] * full + lam * power[i], 0.0));
    }
    // y^2: 5, scaling: 3, real vector: 3
    ops.add_each(n, 11);
    modem.dft_in_place(&mut sq);
    ops.complex_fft(n);
    modem.dft_in_place(&mut real);
    ops.real_fft(n);

    let t = cfg.tr_indices();
    let mut h = DenseMatrix::zeros(2 * beta);
    for l in 0..beta {
        for m in 0..=l {
            let p = sq[cfg.bin(t[l] + t[m])];
            let r = real[cfg.bin(t[l] - t[m])];
            let a = p.re + r.re;
            let d = r.re - p.re;
            h[(l, m)] = a;
            h[(m, l)] = a;
            h[(beta + l, beta + m)] = d;
            h[(beta + m, beta + l)] = d;
        }
        for m in 0..beta {
            let p = sq[cfg.bin(t[l] + t[m])];
            let r = real[cfg.bin(t[l] - t[m])];
            let b = p.im - r.im;
            h[(l, beta + m)] = b;
            h[(beta + m, l)] = b;
        }
    }
    // A and D: one op per stored entry of each triangle; B: one per entry.
    ops.add((beta * (beta + 1) + beta * beta) as u64);
    h
}

/// `F_{n,l}` for every core sample and reserved tone, tone-major.
fn basis(cfg: &SystemConfig) -> Vec<Vec<Complex64>> {
    let n = cfg.n_fft();
    let norm = 1.0 / (n as f64).sqrt();
    cfg.tr_indices()
        .iter()
        .map(|&t| {
            let bin = cfg.bin(t);
            (0..n)
                .map(|i| unit_phase(-(((i * bin) % n) as f64) / n as f64) * norm)
                .collect()
        })
        .collect()
}

/// Gradient from the per-element sums
/// `q_l = sum Γ (Re y Re F - Im y Im F)`,
/// `w_l = sum Γ (Re y Im F + Im y Re F)`.
pub fn jacobian_direct(cfg: &SystemConfig, y: &[Complex64], gamma: &[f64]) -> Vec<f64> {
    let beta = cfg.beta();
    let f = basis(cfg);
    let mut jac = vec![0.0; 2 * beta];
    for l in 0..beta {
        let (mut q, mut w) = (0.0, 0.0);
        for (i, (s, g)) in y.iter().zip(gamma).enumerate() {
            let fl = f[l][i];
            q += g * (s.re * fl.re - s.im * fl.im);
            w += g * (s.re * fl.im + s.im * fl.re);
        }
        jac[l] = q;
        jac[beta + l] = w;
    }
    jac
}

/// Hessian from the per-element sums for the A, B and D blocks, with
/// `C_lm = B_ml`.
pub fn hessian_direct(
    cfg: &SystemConfig,
    y: &[Complex64],
    gamma: &[f64],
    lambda: &[f64],
) -> DenseMatrix {
    let beta = cfg.beta();
    let f = basis(cfg);
    let mut h = DenseMatrix::zeros(2 * beta);
    for l in 0..beta {
        for m in 0..beta {
            let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
            for (i, s) in y.iter().enumerate() {
                let fl = f[l][i];
                let fm = f[m][i];
                let (g, lam) = (gamma[i], lambda[i]);
                let re_l = s.re * fl.re - s.im * fl.im;
                let re_m = s.re * fm.re - s.im * fm.im;
                let im_l = s.re * fl.im + s.im * fl.re;
                let im_m = s.re * fm.im + s.im * fm.re;
                a += g * (fm.re * fl.re + fm.im * fl.im) + lam * re_l * re_m;
                b += g * (fm.im * fl.re - fm.re * fl.im) + lam * re_l * im_m;
                d += g * (fm.re * fl.re + fm.im * fl.im) + lam * im_l * im_m;
            }
            h[(l, m)] = a;
            h[(l, beta + m)] = b;
            h[(beta + m, l)] = b;
            h[(beta + l, beta + m)] = d;
        }
    }
    h
}
