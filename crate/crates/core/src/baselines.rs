//! Reference tone-reservation algorithms.
//!
//! * PAPR-TR minimizes the peak amplitude `max_n |y_n|` over the reserved
//!   symbols. The min-max problem is solved by Newton's method on the smooth
//!   upper bound `lse_s(q) = (1/s) ln sum_n e^{s q_n}` of `max_n q_n`, with the
//!   sharpness `s` raised stage by stage. `lse_s` overestimates the peak
//!   power by at most `ln(N)/s`. Its Hessian is the separable FFT form with
//!   `Γ = 2 π`, `Λ = 4 s π` (`π` the softmax weights) minus the rank-one term
//!   `s g g^T`, so an iteration costs the same four transforms as AC-TR.
//! * NCC-TR assumes a soft limiter at `V`: each iteration clips the current
//!   waveform, projects the clipping noise onto the reserved tones with one
//!   DFT, resynthesizes the projection with one IDFT and subtracts it. By
//!   default the projection is scaled to best cancel the clipping noise on
//!   the clipped samples, which is work proportional to their count `Θ`.
//!
//! Both stop on the same rule as AC-TR: largest symbol update below
//! `stop_delta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::ofdm::{FreqSymbol, Modem};
use crate::ops::{count_ops_ncc_tr, count_ops_papr_tr, OpCounter};
use crate::solver::{hessian_fast, jacobian_fast, newton_direction, SolveDiagnostics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineAlgorithm {
    PaprTr,
    NccTr,
}

/// Settings for a baseline solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    pub stop_delta: f64,
    pub max_iters: usize,
    /// Clipping threshold assumed by NCC-TR.
    pub v_sat: f64,
    /// Extra factor on every NCC-TR step.
    pub damping: f64,
    pub ncc_step: NccStep,
}

/// Step length applied to the projected clipping noise in NCC-TR.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NccStep {
    /// Subtract the projection as is.
    Unit,
    /// Scale the projection to best cancel the clipping noise on the
    /// currently clipped samples.
    #[default]
    Fitted,
}

impl BaselineConfig {
    pub fn papr_tr() -> Self {
        Self {
            algorithm: BaselineAlgorithm::PaprTr,
            stop_delta: 0.01,
            max_iters: 50,
            v_sat: f64::INFINITY,
            damping: 1.0,
            ncc_step: NccStep::default(),
        }
    }

    pub fn ncc_tr(v_sat: f64) -> Self {
        Self {
            algorithm: BaselineAlgorithm::NccTr,
            v_sat,
            ..Self::papr_tr()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stop_delta > 0.0) {
            return config_err(format!(
                "stop_delta must be positive, got {}",
                self.stop_delta
            ));
        }
        if self.max_iters == 0 {
            return config_err("max_iters must be positive");
        }
        if self.algorithm == BaselineAlgorithm::NccTr {
            if !(self.v_sat > 0.0 && self.v_sat.is_finite()) {
                return config_err(format!("NCC-TR needs a positive v_sat, got {}", self.v_sat));
            }
            if !(self.damping > 0.0) {
                return config_err(format!("damping must be positive, got {}", self.damping));
            }
        }
        Ok(())
    }
}

/// Per-iteration cost from the closed-form table.
pub fn count_ops_baseline(
    algorithm: BaselineAlgorithm,
    n_fft: usize,
    beta: usize,
    theta: usize,
) -> u64 {
    match algorithm {
        BaselineAlgorithm::PaprTr => count_ops_papr_tr(n_fft, beta),
        BaselineAlgorithm::NccTr => count_ops_ncc_tr(n_fft, theta),
    }
}

/// Sharpness stages for PAPR-TR, in units of the inverse mean power.
/// The last stage bounds the peak-power overshoot by `ln(N)/512` of the mean
/// power, under 0.05 dB of a typical peak.
pub const PAPR_SHARPNESS: [f64; 4] = [8.0, 32.0, 128.0, 512.0];

const MAX_HALVINGS: usize = 20;

fn peak_power(y: &[Complex64]) -> f64 {
    y.iter().fold(0.0f64, |m, s| m.max(s.norm_sqr()))
}

fn max_modulus(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0f64, |m, s| m.max(s.norm()))
}

struct SoftMax {
    power: Vec<f64>,
    gamma: Vec<f64>,
    lambda: Vec<f64>,
    value: f64,
}

fn soft_max(y: &[Complex64], s: f64, ops: &mut OpCounter) -> SoftMax {
    let power: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
    let peak = power.iter().fold(f64::NEG_INFINITY, |m, &q| m.max(q));
    let weights: Vec<f64> = power.iter().map(|&q| (s * (q - peak)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let gamma: Vec<f64> = weights.iter().map(|w| 2.0 * w / total).collect();
    let lambda: Vec<f64> = gamma.iter().map(|g| 2.0 * s * g).collect();
    // |y|^2: 3, compare: 1, exponent: 3, sum: 1, Γ: 2, Λ: 1
    ops.add_each(y.len(), 11);
    SoftMax {
        power,
        gamma,
        lambda,
        value: peak + total.ln() / s,
    }
}

fn soft_max_value(y: &[Complex64], s: f64) -> f64 {
    let peak = peak_power(y);
    let total: f64 = y.iter().map(|v| (s * (v.norm_sqr() - peak)).exp()).sum();
    peak + total.ln() / s
}

/// Minimizes the peak amplitude of `sym` over its reserved tones, starting
/// from `sym.tr`. The returned symbols never have a higher peak than the
/// start point.
pub fn solve_papr_tr(
    modem: &Modem,
    sym: &FreqSymbol,
    cfg: &BaselineConfig,
) -> Result<(FreqSymbol, SolveDiagnostics)> {
    cfg.validate()?;
    let sys = modem.config();
    let n = sys.n_fft();
    let beta = sys.beta();
    let mut y = modem.modulate(sym)?.core().to_vec();
    let mut d = sym.tr.clone();
    let mut diag = SolveDiagnostics::default();
    let start_peak = peak_power(&y);
    diag.objective_trace.push(start_peak);
    let mean_power = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    if beta == 0 || mean_power == 0.0 {
        diag.converged = true;
        diag.final_objective = start_peak;
        return Ok((sym.clone(), diag));
    }

    let mut ops = OpCounter::new();
    let mut best = (start_peak, d.clone());
    let mut converged = false;
    'stages: for (stage, kappa) in PAPR_SHARPNESS.iter().enumerate() {
        let s = kappa / mean_power;
        let last = stage + 1 == PAPR_SHARPNESS.len();
        let mut current = soft_max(&y, s, &mut ops);
        loop {
            if diag.iterations >= cfg.max_iters {
                break 'stages;
            }
            let g = jacobian_fast(modem, &y, &current.gamma, &mut ops);
            let mut h = hessian_fast(
                modem,
                &y,
                &current.power,
                &current.gamma,
                &current.lambda,
                &mut ops,
            );
            for i in 0..2 * beta {
                for j in 0..2 * beta {
                    h[(i, j)] -= s * g[i] * g[j];
                }
            }
            ops.add((3 * 4 * beta * beta) as u64);
            let Some(dir) = newton_direction(&h, &g, &mut ops) else {
                break 'stages;
            };
            if dir.shift > 0.0 {
                diag.regularized_steps += 1;
            }
            let delta: Vec<Complex64> = (0..beta)
                .map(|l| Complex64::new(dir.delta[l], dir.delta[beta + l]))
                .collect();
            let dy = modem.tr_waveform(&delta)?;
            ops.complex_fft(n);
            let mut t = 1.0;
            let mut next = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<Complex64> = y.iter().zip(&dy).map(|(a, b)| a - b * t).collect();
                ops.add_each(n, 4);
                if soft_max_value(&trial, s) <= current.value {
                    next = Some(trial);
                    break;
                }
                diag.rejected_steps += 1;
                t *= 0.5;
            }
            diag.iterations += 1;
            let full_change = max_modulus(&delta);
            ops.add_each(beta, 4);
            let Some(trial) = next else {
                if full_change < cfg.stop_delta {
                    converged = last;
                    continue 'stages;
                }
                break 'stages;
            };
            y = trial;
            for (dl, step) in d.iter_mut().zip(&delta) {
                *dl -= step * t;
            }
            let peak = peak_power(&y);
            diag.objective_trace.push(peak);
            if peak < best.0 {
                best = (peak, d.clone());
            }
            current = soft_max(&y, s, &mut ops);
            if t * full_change < cfg.stop_delta {
                converged = last;
                continue 'stages;
            }
        }
    }

    diag.converged = converged;
    diag.final_objective = best.0;
    diag.ops_counted = ops.total();
    diag.ops_formula = diag.iterations as u64 * count_ops_papr_tr(n, beta);
    Ok((sym.with_tr(best.1), diag))
}

/// Step `mu` minimizing `sum |c_n - mu p_n|^2` over the clipped samples,
/// where `p` is the time-domain projection of the clipping noise `c`.
fn fitted_step(clip: &[Complex64], dy: &[Complex64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (c, p) in clip.iter().zip(dy) {
        if c.re != 0.0 || c.im != 0.0 {
            num += (c * p.conj()).re;
            den += p.norm_sqr();
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Clipping noise `y - V y/|y|` of the samples above `v_sat`.
fn clipping_noise(y: &[Complex64], v_sat: f64) -> (Vec<Complex64>, usize) {
    let mut theta = 0;
    let noise = y
        .iter()
        .map(|&s| {
            let r = s.norm();
            if r > v_sat {
                theta += 1;
                s * (1.0 - v_sat / r)
            } else {
                Complex64::default()
            }
        })
        .collect();
    (noise, theta)
}

/// Projects the soft-limiter clipping noise onto the reserved tones and
/// subtracts it, repeating until the update falls below `stop_delta` or no
/// sample exceeds `v_sat`.
pub fn solve_ncc_tr(
    modem: &Modem,
    sym: &FreqSymbol,
    cfg: &BaselineConfig,
) -> Result<(FreqSymbol, SolveDiagnostics)> {
    cfg.validate()?;
    let sys = modem.config();
    let n = sys.n_fft();
    let mut y = modem.modulate(sym)?.core().to_vec();
    let mut d = sym.tr.clone();
    let mut diag = SolveDiagnostics::default();
    let mut ops = OpCounter::new();

    while diag.iterations < cfg.max_iters {
        let (mut noise, theta) = clipping_noise(&y, cfg.v_sat);
        diag.iterations += 1;
        diag.theta_trace.push(theta);
        ops.add(count_ops_ncc_tr(n, theta));
        diag.objective_trace
            .push(noise.iter().map(|c| c.norm_sqr()).sum());
        if theta == 0 || sys.beta() == 0 {
            diag.converged = true;
            break;
        }
        let clip = noise.clone();
        modem.dft_in_place(&mut noise);
        let proj: Vec<Complex64> = sys
            .tr_indices()
            .iter()
            .map(|&t| noise[sys.bin(t)])
            .collect();
        let dy = modem.tr_waveform(&proj)?;
        let mu = cfg.damping
            * match cfg.ncc_step {
                NccStep::Unit => 1.0,
                NccStep::Fitted => fitted_step(&clip, &dy),
            };
        let step: Vec<Complex64> = proj.iter().map(|p| -p * mu).collect();
        for (dl, s) in d.iter_mut().zip(&step) {
            *dl += s;
        }
        for (v, dv) in y.iter_mut().zip(&dy) {
            *v -= dv * mu;
        }
        if max_modulus(&step) < cfg.stop_delta {
            diag.converged = true;
            break;
        }
    }

    let (noise, _) = clipping_noise(&y, cfg.v_sat);
    diag.final_objective = noise.iter().map(|c| c.norm_sqr()).sum();
    diag.ops_counted = ops.total();
    diag.ops_formula = diag
        .theta_trace
        .iter()
        .map(|&theta| count_ops_ncc_tr(n, theta))
        .sum();
    Ok((sym.with_tr(d), diag))
}
