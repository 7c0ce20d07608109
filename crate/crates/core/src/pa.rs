//! Memoryless power-amplifier models and the Bussgang decomposition of their
//! output.
//!
//! The Rapp AM-AM characteristic is
//! `|out| = G r / (1 + (r/V)^{2p})^{1/(2p)}` with phase preserved. As `p`
//! grows it approaches the soft limiter `G min(r, V)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config_err, Error, Result};
use crate::ofdm::TimeFrame;
use crate::quadrature;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// `(1 + ratio^{2p})^{-1/(2p)}`, evaluated without overflow for large
/// `ratio` or `p`. `p = inf` gives `min(1, 1/ratio)`.
fn rapp_factor(ratio: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return if ratio <= 1.0 { 1.0 } else { 1.0 / ratio };
    }
    let two_p = 2.0 * p;
    if ratio <= 1.0 {
        (-ratio.powf(two_p).ln_1p() / two_p).exp()
    } else {
        (-ratio.powf(-two_p).ln_1p() / two_p).exp() / ratio
    }
}

/// Rapp amplifier parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RappPa {
    p: f64,
    v_sat: f64,
    gain: f64,
}

impl RappPa {
    /// `p`, `v_sat` and `gain` must be positive and finite.
    pub fn new(p: f64, v_sat: f64, gain: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("v_sat", v_sat), ("gain", gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return config_err(format!("Rapp {name} must be positive and finite, got {v}"));
            }
        }
        Ok(Self { p, v_sat, gain })
    }

    /// Unit-gain amplifier with saturation `V = sqrt(IBO * mean_power)`.
    pub fn from_ibo(p: f64, ibo_db: f64, mean_power: f64) -> Result<Self> {
        Self::new(p, (db_to_lin(ibo_db) * mean_power).sqrt(), 1.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn v_sat(&self) -> f64 {
        self.v_sat
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Input back-off `V^2 / sigma^2` (linear).
    pub fn ibo(&self, mean_power: f64) -> f64 {
        self.v_sat * self.v_sat / mean_power
    }

    pub fn ibo_db(&self, mean_power: f64) -> f64 {
        lin_to_db(self.ibo(mean_power))
    }

    /// Output amplitude for input amplitude `r >= 0`.
    pub fn amplitude(&self, r: f64) -> f64 {
        self.gain * r * rapp_factor(r / self.v_sat, self.p)
    }

    pub fn amplify_sample(&self, y: Complex64) -> Complex64 {
        y * (self.gain * rapp_factor(y.norm() / self.v_sat, self.p))
    }
}

/// Amplifier applied to transmitted frames: Rapp, or the ideal soft limiter
/// (`p = inf`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PaModel {
    Rapp(RappPa),
    SoftLimiter { v_sat: f64 },
}

impl PaModel {
    /// Unit-gain model; `p = inf` selects the soft limiter.
    pub fn from_p(p: f64, v_sat: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            if !(v_sat > 0.0 && v_sat.is_finite()) {
                return config_err(format!("v_sat must be positive, got {v_sat}"));
            }
            Ok(PaModel::SoftLimiter { v_sat })
        } else {
            Ok(PaModel::Rapp(RappPa::new(p, v_sat, 1.0)?))
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            PaModel::Rapp(pa) => pa.p(),
            PaModel::SoftLimiter { .. } => f64::INFINITY,
        }
    }

    pub fn v_sat(&self) -> f64 {
        match self {
            PaModel::Rapp(pa) => pa.v_sat(),
            PaModel::SoftLimiter { v_sat } => *v_sat,
        }
    }

    pub fn amplify_sample(&self, y: Complex64) -> Complex64 {
        match self {
            PaModel::Rapp(pa) => pa.amplify_sample(y),
            PaModel::SoftLimiter { v_sat } => y * rapp_factor(y.norm() / v_sat, f64::INFINITY),
        }
    }

    pub fn amplify(&self, y: &TimeFrame) -> TimeFrame {
        y.map(|s| self.amplify_sample(s))
    }
}

/// `y~_n = G y_n / (1 + |y_n|^{2p}/V^{2p})^{1/(2p)}` on every sample.
pub fn rapp_amplify(pa: &RappPa, y: &TimeFrame) -> TimeFrame {
    y.map(|s| pa.amplify_sample(s))
}

/// Clips the amplitude at `v_sat`, keeping the phase.
pub fn soft_limit(v_sat: f64, y: &TimeFrame) -> TimeFrame {
    y.map(|s| s * rapp_factor(s.norm() / v_sat, f64::INFINITY))
}

/// Output split into a scaled replica of the input and a distortion term
/// uncorrelated with it: `out = lambda * in + distortion`.
#[derive(Clone, Debug)]
pub struct BussgangSplit {
    pub lambda: Complex64,
    pub correlated: Vec<TimeFrame>,
    pub distortion: Vec<TimeFrame>,
    /// Mean input power per sample over the ensemble.
    pub mean_power: f64,
}

impl BussgangSplit {
    /// Mean distortion power per sample.
    pub fn distortion_power(&self) -> f64 {
        mean_power(&self.distortion)
    }
}

fn mean_power(frames: &[TimeFrame]) -> f64 {
    let count: usize = frames.iter().map(TimeFrame::len).sum();
    frames.iter().map(TimeFrame::energy).sum::<f64>() / count as f64
}

fn check_ensembles(input: &[TimeFrame], output: &[TimeFrame]) -> Result<()> {
    check_len(input.len(), output.len())?;
    for (a, b) in input.iter().zip(output) {
        check_len(a.len(), b.len())?;
    }
    Ok(())
}

fn cross_and_power(input: &TimeFrame, output: &TimeFrame) -> (Complex64, f64) {
    input
        .samples()
        .iter()
        .zip(output.samples())
        .fold((Complex64::default(), 0.0), |(c, p), (y, o)| {
            (c + o * y.conj(), p + y.norm_sqr())
        })
}

/// Ensemble correlation coefficient `sum out y* / sum |y|^2`.
pub fn correlation_coefficient(input: &[TimeFrame], output: &[TimeFrame]) -> Result<Complex64> {
    check_ensembles(input, output)?;
    let (cross, power) = input
        .iter()
        .zip(output)
        .map(|(a, b)| cross_and_power(a, b))
        .fold((Complex64::default(), 0.0), |(c, p), (dc, dp)| {
            (c + dc, p + dp)
        });
    if power == 0.0 {
        return Err(Error::UndefinedLambda);
    }
    Ok(cross / power)
}

/// One coefficient per symbol instead of one per ensemble.
pub fn per_symbol_lambdas(input: &[TimeFrame], output: &[TimeFrame]) -> Result<Vec<Complex64>> {
    check_ensembles(input, output)?;
    input
        .iter()
        .zip(output)
        .map(|(a, b)| {
            let (cross, power) = cross_and_power(a, b);
            if power == 0.0 {
                Err(Error::UndefinedLambda)
            } else {
                Ok(cross / power)
            }
        })
        .collect()
}

/// Bussgang decomposition with a single coefficient for the whole ensemble.
pub fn bussgang_split(input: &[TimeFrame], output: &[TimeFrame]) -> Result<BussgangSplit> {
    let lambda = correlation_coefficient(input, output)?;
    let correlated: Vec<TimeFrame> = input.iter().map(|f| f.map(|s| s * lambda)).collect();
    let distortion = output
        .iter()
        .zip(&correlated)
        .map(|(o, c)| {
            let s = o
                .samples()
                .iter()
                .zip(c.samples())
                .map(|(a, b)| a - b)
                .collect();
            TimeFrame::new(s, o.n_cp())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BussgangSplit {
        lambda,
        correlated,
        distortion,
        mean_power: mean_power(input),
    })
}

/// Upper integration limit: `exp(-xi^2) < 1e-18` beyond it.
const XI_MAX: f64 = 6.44;
const LAMBDA_TOL: f64 = 1e-10;

/// Correlation coefficient of a Rapp amplifier driven by complex Gaussian
/// input at back-off `ibo_db`:
/// `lambda = int_0^inf 2 xi^3 (1 + (xi^2/IBO)^p)^{-1/(2p)} e^{-xi^2} d xi`.
///
/// `p = inf` gives the soft limiter.
pub fn lambda_analytic(p: f64, ibo_db: f64) -> Result<f64> {
    if !(p > 0.0) {
        return config_err(format!("smoothness p must be positive, got {p}"));
    }
    let sqrt_ibo = db_to_lin(ibo_db).sqrt();
    let integrand = |xi: f64| 2.0 * xi.powi(3) * rapp_factor(xi / sqrt_ibo, p) * (-xi * xi).exp();
    let q = quadrature::integrate_split(integrand, 0.0, XI_MAX, &[sqrt_ibo], LAMBDA_TOL)?;
    Ok(q.value)
}

/// Signal-to-distortion ratio in dB,
/// `|lambda|^2 sum_j E|d_j|^2 / (N E|s|^2)`.
///
/// Only data-subcarrier power counts as signal. Zero distortion returns
/// `f64::INFINITY`.
pub fn sdr_db(
    lambda: Complex64,
    data_power_sum: f64,
    distortion_mean_power: f64,
    n_fft: usize,
) -> f64 {
    if distortion_mean_power <= 0.0 {
        return f64::INFINITY;
    }
    lin_to_db(lambda.norm_sqr() * data_power_sum / (n_fft as f64 * distortion_mean_power))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rapp_zero_and_knee() {
        let pa = RappPa::new(1.0, 2.0, 1.0).unwrap();
        assert_eq!(pa.amplify_sample(c(0.0, 0.0)), c(0.0, 0.0));
        let out = pa.amplify_sample(c(0.0, 2.0));
        assert!((out.norm() - 2.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!(out.re.abs() < 1e-15 && out.im > 0.0);
    }

    #[test]
    fn rapp_high_p_approaches_limiter() {
        let pa = RappPa::new(1000.0, 1.0, 1.0).unwrap();
        let out = pa.amplify_sample(c(2.0, 0.0)).norm();
        assert!((out - 1.0).abs() < 1e-3);
        let pa = RappPa::new(1e6, 1.0, 1.0).unwrap();
        assert!((pa.amplitude(50.0) - 1.0).abs() < 1e-9);
        assert!(pa.amplitude(50.0).is_finite());
    }

    #[test]
    fn rapp_rejects_bad_parameters() {
        assert!(RappPa::new(0.0, 1.0, 1.0).is_err());
        assert!(RappPa::new(2.0, -1.0, 1.0).is_err());
        assert!(RappPa::new(2.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn soft_limiter_cases() {
        let frame = TimeFrame::new(vec![c(0.3, 0.4), c(0.0, -3.0), c(0.0, 0.0)], 1).unwrap();
        let out = soft_limit(1.0, &frame);
        assert_eq!(out.samples()[0], c(0.3, 0.4));
        assert!((out.samples()[1] - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(out.samples()[2], c(0.0, 0.0));
    }

    #[test]
    fn ibo_round_trip() {
        let pa = RappPa::from_ibo(4.0, 8.0, 0.25).unwrap();
        assert!((pa.ibo_db(0.25) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn pa_model_from_infinite_p() {
        let m = PaModel::from_p(f64::INFINITY, 1.5).unwrap();
        assert_eq!(m, PaModel::SoftLimiter { v_sat: 1.5 });
        assert_eq!(m.p(), f64::INFINITY);
        assert!(matches!(
            PaModel::from_p(4.0, 1.5).unwrap(),
            PaModel::Rapp(_)
        ));
    }

    #[test]
    fn pure_scaling_gives_half() {
        let input = vec![TimeFrame::new(vec![c(1.0, 2.0), c(-0.5, 0.1), c(3.0, 0.0)], 1).unwrap()];
        let output: Vec<_> = input.iter().map(|f| f.map(|s| s * 0.5)).collect();
        let split = bussgang_split(&input, &output).unwrap();
        assert_eq!(split.lambda, c(0.5, 0.0));
        assert!(split.distortion_power() == 0.0);
    }

    #[test]
    fn zero_input_has_no_lambda() {
        let input = vec![TimeFrame::new(vec![c(0.0, 0.0); 4], 1).unwrap()];
        assert!(matches!(
            bussgang_split(&input, &input),
            Err(Error::UndefinedLambda)
        ));
    }

    #[test]
    fn mismatched_ensembles_are_rejected() {
        let a = vec![TimeFrame::new(vec![c(1.0, 0.0); 4], 1).unwrap()];
        let b = vec![TimeFrame::new(vec![c(1.0, 0.0); 5], 1).unwrap()];
        assert!(bussgang_split(&a, &b).is_err());
        assert!(bussgang_split(&a, &[]).is_err());
    }

    #[test]
    fn lambda_unclipped_limit() {
        assert!(lambda_analytic(10.0, 40.0).unwrap() >= 0.999);
        assert!(lambda_analytic(10.0, 40.0).unwrap() < 1.0);
        assert!(lambda_analytic(0.0, 5.0).is_err());
    }

    #[test]
    fn sdr_arithmetic() {
        assert_eq!(sdr_db(c(1.0, 0.0), 200.0, 0.0, 1024), f64::INFINITY);
        let v = sdr_db(c(1.0, 0.0), 200.0, 200.0 / 1024.0, 1024);
        assert!(v.abs() < 1e-12);
        let v = sdr_db(c(0.5, 0.0), 100.0, 0.25 / 1024.0, 1024);
        assert!((v - 20.0).abs() < 1e-12);
    }
}
