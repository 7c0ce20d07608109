//! Ensemble measurements: PAPR and its CCDF, Welch PSD, and the Bussgang SDR
//! of an amplified symbol stream.
//!
//! [`ensemble_sdr`] runs in two phases. The optimization phase draws symbol
//! `i` from `symbol_rng(seed, i)` and runs the selected TR algorithm; it is
//! parallel over symbols and collects results in index order. The
//! evaluation phase amplifies every frame, estimates one ensemble `lambda`,
//! then measures the distortion `s = y~ - lambda y` and its spectrum. All
//! reductions run in a fixed order so results do not depend on the thread
//! count.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::baselines::{solve_ncc_tr, solve_papr_tr, BaselineAlgorithm, BaselineConfig, NccStep};
use crate::error::{config_err, Error, Result};
use crate::ofdm::{symbol_rng, FreqSymbol, Modem, SystemConfig, TimeFrame};
use crate::pa::{db_to_lin, lin_to_db, sdr_db, PaModel, RappPa};
use crate::solver::{solve_ac_tr, AcTrConfig};

/// PAPR in dB over the `N` core samples of a frame.
pub fn papr_db(frame: &TimeFrame) -> Result<f64> {
    papr_db_core(frame.core())
}

fn papr_db_core(core: &[Complex64]) -> Result<f64> {
    let (peak, sum) = core.iter().fold((0.0f64, 0.0), |(m, s), v| {
        (m.max(v.norm_sqr()), s + v.norm_sqr())
    });
    if sum == 0.0 {
        return Err(Error::ZeroFrame);
    }
    Ok(lin_to_db(peak * core.len() as f64 / sum))
}

/// Empirical `P(PAPR > threshold)` for each threshold.
pub fn ccdf(samples: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return config_err("CCDF needs at least one sample");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&g| {
            let at_or_below = sorted.partition_point(|&s| s <= g);
            (g, (sorted.len() - at_or_below) as f64 / n)
        })
        .collect())
}

/// Default CCDF grid: 0 to 14 dB in 0.1 dB steps.
pub fn default_ccdf_thresholds() -> Vec<f64> {
    (0..=140).map(|i| i as f64 * 0.1).collect()
}

/// Welch periodogram accumulator with a periodic Hann window.
///
/// Segments never straddle two inputs: every call to [`Welch::add`] is
/// segmented on its own.
#[derive(Clone)]
pub struct Welch {
    len: usize,
    hop: usize,
    window: Vec<f64>,
    window_power: f64,
    plan: Arc<dyn Fft<f64>>,
    sum: Vec<f64>,
    segments: usize,
}

impl fmt::Debug for Welch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Welch")
            .field("len", &self.len)
            .field("hop", &self.hop)
            .field("segments", &self.segments)
            .finish()
    }
}

impl Welch {
    pub fn new(segment_len: usize, overlap: usize) -> Result<Self> {
        if !segment_len.is_power_of_two() || segment_len < 2 {
            return config_err(format!(
                "segment length must be a power of two, got {segment_len}"
            ));
        }
        if overlap >= segment_len {
            return config_err(format!(
                "overlap {overlap} must be shorter than the segment {segment_len}"
            ));
        }
        let window: Vec<f64> = (0..segment_len)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / segment_len as f64).cos())
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        Ok(Self {
            len: segment_len,
            hop: segment_len - overlap,
            window,
            window_power,
            plan: FftPlanner::new().plan_fft_forward(segment_len),
            sum: vec![0.0; segment_len],
            segments: 0,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.len
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn add(&mut self, x: &[Complex64]) {
        let mut buf = vec![Complex64::default(); self.len];
        let mut start = 0;
        while start + self.len <= x.len() {
            for ((b, s), w) in buf
                .iter_mut()
                .zip(&x[start..start + self.len])
                .zip(&self.window)
            {
                *b = s * w;
            }
            self.plan.process(&mut buf);
            for (acc, v) in self.sum.iter_mut().zip(&buf) {
                *acc += v.norm_sqr();
            }
            self.segments += 1;
            start += self.hop;
        }
    }

    pub fn merge(&mut self, other: &Welch) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.segments += other.segments;
    }

    /// Average periodogram per sample, as `(normalized frequency, power)`
    /// with frequencies ascending in `[-0.5, 0.5)`.
    pub fn spectrum(&self) -> Vec<(f64, f64)> {
        let scale = 1.0 / (self.window_power * self.segments.max(1) as f64);
        let l = self.len as i64;
        (0..l)
            .map(|k| {
                let bin = (k - l / 2).rem_euclid(l) as usize;
                ((k - l / 2) as f64 / l as f64, self.sum[bin] * scale)
            })
            .collect()
    }
}

fn to_db(spectrum: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    spectrum
        .into_iter()
        .map(|(f, p)| (f, lin_to_db(p)))
        .collect()
}

/// Welch PSD in dB (not normalized) of an ensemble of frames, each frame
/// segmented on its own.
pub fn psd(frames: &[TimeFrame], segment_len: usize, overlap: usize) -> Result<Vec<(f64, f64)>> {
    let mut w = Welch::new(segment_len, overlap)?;
    if let Some(f) = frames.first() {
        if segment_len > f.n_fft() {
            return config_err(format!(
                "segment length {segment_len} exceeds the symbol length {}",
                f.n_fft()
            ));
        }
    }
    for f in frames {
        w.add(f.samples());
    }
    Ok(to_db(w.spectrum()))
}

/// Mean PSD level in dB over `|f| <= band_edge`, averaged in linear power.
pub fn in_band_mean_db(psd_db: &[(f64, f64)], band_edge: f64) -> f64 {
    let inside: Vec<f64> = psd_db
        .iter()
        .filter(|(f, _)| f.abs() <= band_edge)
        .map(|(_, p)| db_to_lin(*p))
        .collect();
    lin_to_db(inside.iter().sum::<f64>() / inside.len().max(1) as f64)
}

/// Normalized band edge `max |k| / N` of the occupied subcarriers.
pub fn occupied_band_edge(cfg: &SystemConfig) -> f64 {
    cfg.data_indices()
        .iter()
        .chain(cfg.tr_indices())
        .map(|k| k.unsigned_abs())
        .max()
        .unwrap_or(0) as f64
        / cfg.n_fft() as f64
}

/// Clipping threshold for a back-off `ibo_db` relative to the data-only
/// signal power `alpha / N`.
pub fn v_sat_for_ibo(cfg: &SystemConfig, ibo_db: f64) -> f64 {
    (db_to_lin(ibo_db) * cfg.data_power()).sqrt()
}

/// Transmit-side processing compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// No tone reservation: the reserved tones stay silent.
    Reference,
    AcTr,
    PaprTr,
    NccTr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Reference,
        Algorithm::AcTr,
        Algorithm::PaprTr,
        Algorithm::NccTr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Reference => "reference",
            Algorithm::AcTr => "ac-tr",
            Algorithm::PaprTr => "papr-tr",
            Algorithm::NccTr => "ncc-tr",
        }
    }

    /// Whether the optimized symbols depend on the amplifier.
    pub fn depends_on_pa(self) -> bool {
        matches!(self, Algorithm::AcTr | Algorithm::NccTr)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "reference" | "ref" | "none" => Ok(Algorithm::Reference),
            "ac-tr" | "actr" => Ok(Algorithm::AcTr),
            "papr-tr" | "paprtr" => Ok(Algorithm::PaprTr),
            "ncc-tr" | "ncctr" => Ok(Algorithm::NccTr),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Algorithm choice plus the knobs shared by an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    pub algorithm: Algorithm,
    /// AC-TR options. `stop_delta` and `max_iters` also drive the baselines.
    pub actr: AcTrConfig,
    pub ncc_damping: f64,
    pub ncc_step: NccStep,
    /// Largest `p` the AC-TR model uses; sharper amplifiers, including the
    /// soft limiter, are modeled with this value.
    pub p_model_cap: f64,
    pub psd_segment_len: usize,
    pub psd_overlap: usize,
    pub ccdf_thresholds: Vec<f64>,
}

impl AlgorithmSettings {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            actr: AcTrConfig::default(),
            ncc_damping: 1.0,
            ncc_step: NccStep::default(),
            p_model_cap: 10.0,
            psd_segment_len: 256,
            psd_overlap: 128,
            ccdf_thresholds: default_ccdf_thresholds(),
        }
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..self.clone()
        }
    }

    /// Smoothness used by the AC-TR model for an amplifier with `p_true`.
    pub fn p_model(&self, p_true: f64) -> f64 {
        p_true.min(self.p_model_cap)
    }

    fn baseline(&self, algorithm: BaselineAlgorithm, v_sat: f64) -> BaselineConfig {
        BaselineConfig {
            algorithm,
            stop_delta: self.actr.stop_delta,
            max_iters: self.actr.max_iters,
            v_sat,
            damping: self.ncc_damping,
            ncc_step: self.ncc_step,
        }
    }
}

/// Symbols after tone reservation, with per-symbol solver statistics.
#[derive(Clone, Debug)]
pub struct OptimizedEnsemble {
    pub algorithm: Algorithm,
    pub symbols: Vec<FreqSymbol>,
    pub iterations: Vec<usize>,
    pub ops_counted: Vec<u64>,
    pub ops_formula: Vec<u64>,
    pub converged: Vec<bool>,
}

impl OptimizedEnsemble {
    fn mean<T: Copy + Into<f64>>(v: &[T]) -> f64 {
        v.iter().map(|&x| x.into()).sum::<f64>() / v.len().max(1) as f64
    }

    pub fn mean_iters(&self) -> f64 {
        Self::mean(
            &self
                .iterations
                .iter()
                .map(|&i| i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn mean_ops_counted(&self) -> f64 {
        Self::mean(
            &self
                .ops_counted
                .iter()
                .map(|&i| i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn mean_ops_formula(&self) -> f64 {
        Self::mean(
            &self
                .ops_formula
                .iter()
                .map(|&i| i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn converged_fraction(&self) -> f64 {
        self.converged.iter().filter(|&&c| c).count() as f64 / self.converged.len().max(1) as f64
    }
}

/// Phase one: draws `n_symbols` symbols from `seed` and runs the selected
/// algorithm on each. `pa` supplies the threshold and smoothness the
/// PA-aware algorithms assume.
pub fn optimize_ensemble(
    modem: &Modem,
    pa: &PaModel,
    settings: &AlgorithmSettings,
    n_symbols: usize,
    seed: u64,
) -> Result<OptimizedEnsemble> {
    if n_symbols == 0 {
        return config_err("n_symbols must be at least 1");
    }
    let v_sat = pa.v_sat();
    let model = RappPa::new(settings.p_model(pa.p()), v_sat, 1.0)?;
    let run = |i: usize| -> Result<(FreqSymbol, usize, u64, u64, bool)> {
        let sym = modem.random_frame(&mut symbol_rng(seed, i as u64));
        let (out, diag) = match settings.algorithm {
            Algorithm::Reference => return Ok((sym, 0, 0, 0, true)),
            Algorithm::AcTr => solve_ac_tr(modem, &model, &sym, &settings.actr)?,
            Algorithm::PaprTr => solve_papr_tr(
                modem,
                &sym,
                &settings.baseline(BaselineAlgorithm::PaprTr, v_sat),
            )?,
            Algorithm::NccTr => solve_ncc_tr(
                modem,
                &sym,
                &settings.baseline(BaselineAlgorithm::NccTr, v_sat),
            )?,
        };
        Ok((
            out,
            diag.iterations,
            diag.ops_counted,
            diag.ops_formula,
            diag.converged,
        ))
    };
    let results: Vec<_> = (0..n_symbols)
        .into_par_iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;
    let mut ens = OptimizedEnsemble {
        algorithm: settings.algorithm,
        symbols: Vec::with_capacity(n_symbols),
        iterations: Vec::with_capacity(n_symbols),
        ops_counted: Vec::with_capacity(n_symbols),
        ops_formula: Vec::with_capacity(n_symbols),
        converged: Vec::with_capacity(n_symbols),
    };
    for (sym, it, oc, of, conv) in results {
        ens.symbols.push(sym);
        ens.iterations.push(it);
        ens.ops_counted.push(oc);
        ens.ops_formula.push(of);
        ens.converged.push(conv);
    }
    Ok(ens)
}

/// Ensemble results for one algorithm at one amplifier setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub algorithm: Algorithm,
    /// Real part of the ensemble Bussgang coefficient.
    pub lambda_emp: f64,
    pub lambda_imag: f64,
    pub sdr_db: f64,
    pub papr_samples: Vec<f64>,
    pub ccdf: Vec<(f64, f64)>,
    /// Welch PSD of the amplifier output, dB per sample, not normalized.
    pub psd_total: Vec<(f64, f64)>,
    /// Welch PSD of the distortion `y~ - lambda y`, same grid and scale.
    pub psd_distortion: Vec<(f64, f64)>,
    pub mean_iters: f64,
    pub mean_ops: f64,
    pub mean_ops_formula: f64,
    pub converged_fraction: f64,
    pub n_symbols: usize,
    pub v_sat: f64,
    pub p_true: f64,
    pub p_model: f64,
}

const CHUNK: usize = 32;

struct Partial {
    cross: Complex64,
    power: f64,
}

/// Phase two: amplifies the optimized ensemble with `pa` and measures it.
pub fn evaluate_ensemble(
    modem: &Modem,
    pa: &PaModel,
    ens: &OptimizedEnsemble,
    settings: &AlgorithmSettings,
) -> Result<RunMetrics> {
    let cfg = modem.config();
    if settings.psd_segment_len > cfg.n_fft() {
        return config_err(format!(
            "segment length {} exceeds the symbol length {}",
            settings.psd_segment_len,
            cfg.n_fft()
        ));
    }
    let welch = Welch::new(settings.psd_segment_len, settings.psd_overlap)?;
    let frames = |range: std::ops::Range<usize>| {
        ens.symbols[range].iter().map(|s| {
            let y = modem
                .modulate(s)
                .expect("optimized symbols match the modem");
            let out = pa.amplify(&y);
            (y, out)
        })
    };
    let chunks: Vec<std::ops::Range<usize>> = (0..ens.symbols.len())
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(ens.symbols.len()))
        .collect();

    // Correlation with the input and PAPR of the PA input.
    let first: Vec<(Partial, Vec<f64>)> = chunks
        .par_iter()
        .map(|r| {
            let mut p = Partial {
                cross: Complex64::default(),
                power: 0.0,
            };
            let mut paprs = Vec::with_capacity(r.len());
            for (y, out) in frames(r.clone()) {
                for (a, b) in y.samples().iter().zip(out.samples()) {
                    p.cross += b * a.conj();
                    p.power += a.norm_sqr();
                }
                paprs.push(papr_db(&y)?);
            }
            Ok((p, paprs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cross = Complex64::default();
    let mut power = 0.0;
    let mut papr_samples = Vec::with_capacity(ens.symbols.len());
    for (p, paprs) in first {
        cross += p.cross;
        power += p.power;
        papr_samples.extend(paprs);
    }
    if power == 0.0 {
        return Err(Error::UndefinedLambda);
    }
    let lambda = cross / power;

    // Distortion power and spectra.
    let second: Vec<(f64, usize, Welch, Welch)> = chunks
        .par_iter()
        .map(|r| {
            let mut total = welch.clone();
            let mut dist = welch.clone();
            let (mut energy, mut count) = (0.0, 0);
            for (y, out) in frames(r.clone()) {
                let s: Vec<Complex64> = out
                    .samples()
                    .iter()
                    .zip(y.samples())
                    .map(|(o, a)| o - lambda * a)
                    .collect();
                energy += s.iter().map(|v| v.norm_sqr()).sum::<f64>();
                count += s.len();
                total.add(out.samples());
                dist.add(&s);
            }
            (energy, count, total, dist)
        })
        .collect();
    let mut total = welch.clone();
    let mut dist = welch;
    let (mut energy, mut count) = (0.0, 0usize);
    for (e, c, t, d) in second {
        energy += e;
        count += c;
        total.merge(&t);
        dist.merge(&d);
    }

    let data_power_sum = cfg.alpha() as f64;
    Ok(RunMetrics {
        algorithm: ens.algorithm,
        lambda_emp: lambda.re,
        lambda_imag: lambda.im,
        sdr_db: sdr_db(lambda, data_power_sum, energy / count as f64, cfg.n_fft()),
        ccdf: ccdf(&papr_samples, &settings.ccdf_thresholds)?,
        papr_samples,
        psd_total: to_db(total.spectrum()),
        psd_distortion: to_db(dist.spectrum()),
        mean_iters: ens.mean_iters(),
        mean_ops: ens.mean_ops_counted(),
        mean_ops_formula: ens.mean_ops_formula(),
        converged_fraction: ens.converged_fraction(),
        n_symbols: ens.symbols.len(),
        v_sat: pa.v_sat(),
        p_true: pa.p(),
        p_model: settings.p_model(pa.p()),
    })
}

/// Generates `n_symbols` symbols from `seed`, applies the selected
/// algorithm, amplifies with `pa` and measures the ensemble.
///
/// `pa` should carry the threshold derived from the reference back-off
/// (see [`v_sat_for_ibo`]) so that every algorithm faces the same amplifier.
pub fn ensemble_sdr(
    modem: &Modem,
    pa: &PaModel,
    settings: &AlgorithmSettings,
    n_symbols: usize,
    seed: u64,
) -> Result<RunMetrics> {
    let ens = optimize_ensemble(modem, pa, settings, n_symbols, seed)?;
    evaluate_ensemble(modem, pa, &ens, settings)
}
