//! OFDM symbol synthesis with a cyclic prefix and the unitary DFT used by the
//! solvers.
//!
//! Subcarriers are addressed on the centered index set `{-N/2, ..., N/2-1}`.
//! A centered index `k` lives in FFT bin `k mod N` (see [`SystemConfig::bin`]).
//! Both transform directions carry a `1/sqrt(N)` factor, so the DFT is
//! energy preserving and `idft(dft(x)) == x`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, config_err, Error, Result};

/// Data-subcarrier constellation. Every variant is normalized to unit mean
/// power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    pub fn order(self) -> usize {
        match self {
            Constellation::Qpsk => 4,
            Constellation::Qam16 => 16,
            Constellation::Qam64 => 64,
        }
    }

    fn side(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
        }
    }

    fn scale(self) -> f64 {
        // Mean power of square M-QAM on odd integer levels is 2(M-1)/3.
        let m = self.order() as f64;
        (1.5 / (m - 1.0)).sqrt()
    }

    fn level(self, i: usize) -> f64 {
        (2 * i) as f64 + 1.0 - self.side() as f64
    }

    /// All constellation points, row-major over (in-phase, quadrature) levels.
    pub fn points(self) -> Vec<Complex64> {
        let s = self.scale();
        let side = self.side();
        (0..side)
            .flat_map(|i| (0..side).map(move |q| (i, q)))
            .map(|(i, q)| Complex64::new(self.level(i) * s, self.level(q) * s))
            .collect()
    }

    /// Draws one point uniformly.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        let side = self.side();
        let i = rng.random_range(0..side);
        let q = rng.random_range(0..side);
        let s = self.scale();
        Complex64::new(self.level(i) * s, self.level(q) * s)
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" => Ok(Constellation::Qam16),
            "qam64" | "64qam" => Ok(Constellation::Qam64),
            other => config_err(format!("unknown constellation `{other}`")),
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "qam16",
            Constellation::Qam64 => "qam64",
        };
        f.write_str(name)
    }
}

/// Static description of the OFDM system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    n_fft: usize,
    n_cp: usize,
    data: Vec<i64>,
    tr: Vec<i64>,
    constellation: Constellation,
    seed: u64,
}

impl SystemConfig {
    /// Validates and builds a configuration.
    ///
    /// `n_fft` must be a power of two, `n_cp < n_fft`, every index must lie
    /// in `{-N/2, ..., N/2-1}`, subcarrier 0 is never used, and the data and
    /// reserved sets are disjoint and free of duplicates.
    pub fn new(
        n_fft: usize,
        n_cp: usize,
        data_indices: Vec<i64>,
        tr_indices: Vec<i64>,
        constellation: Constellation,
        seed: u64,
    ) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_power_of_two() {
            return config_err(format!("FFT size {n_fft} is not a power of two >= 2"));
        }
        if n_cp >= n_fft {
            return config_err(format!(
                "cyclic prefix {n_cp} must be shorter than N = {n_fft}"
            ));
        }
        let half = (n_fft / 2) as i64;
        let mut seen = std::collections::HashSet::new();
        for &k in data_indices.iter().chain(&tr_indices) {
            if k < -half || k >= half {
                return config_err(format!("subcarrier {k} outside [-{half}, {half})"));
            }
            if k == 0 {
                return config_err("subcarrier 0 must stay unmodulated");
            }
            if !seen.insert(k) {
                return config_err(format!("subcarrier {k} listed twice"));
            }
        }
        Ok(Self {
            n_fft,
            n_cp,
            data: data_indices,
            tr: tr_indices,
            constellation,
            seed,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    /// Samples per transmitted symbol, `N + N_CP`.
    pub fn frame_len(&self) -> usize {
        self.n_fft + self.n_cp
    }

    pub fn data_indices(&self) -> &[i64] {
        &self.data
    }

    pub fn tr_indices(&self) -> &[i64] {
        &self.tr
    }

    /// Number of data subcarriers.
    pub fn alpha(&self) -> usize {
        self.data.len()
    }

    /// Number of reserved subcarriers.
    pub fn beta(&self) -> usize {
        self.tr.len()
    }

    pub fn constellation(&self) -> Constellation {
        self.constellation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// FFT bin holding centered subcarrier `k`: `k mod N`.
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n_fft as i64) as usize
    }

    /// Mean power per time sample of the data-only waveform, `alpha / N`,
    /// for unit-power data symbols.
    pub fn data_power(&self) -> f64 {
        self.alpha() as f64 / self.n_fft as f64
    }

    /// Samples `N - N_CP .. N` are transmitted twice (once in the prefix).
    pub fn is_repeated(&self, n: usize) -> bool {
        n >= self.n_fft - self.n_cp
    }

    /// Per-sample multiplicity over one transmitted symbol: 2 for samples
    /// copied into the prefix, 1 otherwise.
    pub fn multiplicity(&self) -> Vec<f64> {
        (0..self.n_fft)
            .map(|n| if self.is_repeated(n) { 2.0 } else { 1.0 })
            .collect()
    }
}

/// Frequency-domain content of one OFDM symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqSymbol {
    pub data: Vec<Complex64>,
    pub tr: Vec<Complex64>,
}

impl FreqSymbol {
    pub fn new(cfg: &SystemConfig, data: Vec<Complex64>, tr: Vec<Complex64>) -> Result<Self> {
        check_len(cfg.alpha(), data.len())?;
        check_len(cfg.beta(), tr.len())?;
        Ok(Self { data, tr })
    }

    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self {
            data: vec![Complex64::default(); cfg.alpha()],
            tr: vec![Complex64::default(); cfg.beta()],
        }
    }

    /// Same data symbols with the reserved tones replaced.
    pub fn with_tr(&self, tr: Vec<Complex64>) -> Self {
        Self {
            data: self.data.clone(),
            tr,
        }
    }

    fn check(&self, cfg: &SystemConfig) -> Result<()> {
        check_len(cfg.alpha(), self.data.len())?;
        check_len(cfg.beta(), self.tr.len())
    }
}

/// Time-domain symbol: `N_CP` prefix samples followed by the `N` core
/// samples. Signed time index `n` maps to `samples[n + N_CP]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrame {
    samples: Vec<Complex64>,
    n_cp: usize,
}

impl TimeFrame {
    /// Wraps raw samples. Only the shape is checked; see
    /// [`TimeFrame::has_cyclic_prefix`] for the repetition property.
    pub fn new(samples: Vec<Complex64>, n_cp: usize) -> Result<Self> {
        if n_cp >= samples.len() {
            return config_err(format!(
                "prefix length {n_cp} must be below frame length {}",
                samples.len()
            ));
        }
        Ok(Self { samples, n_cp })
    }

    /// Prepends the last `n_cp` samples of `core`.
    pub fn from_core(core: &[Complex64], n_cp: usize) -> Self {
        let n = core.len();
        assert!(n_cp < n, "prefix longer than the symbol");
        let mut samples = Vec::with_capacity(n + n_cp);
        samples.extend_from_slice(&core[n - n_cp..]);
        samples.extend_from_slice(core);
        Self { samples, n_cp }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    pub fn n_fft(&self) -> usize {
        self.samples.len() - self.n_cp
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The `N` samples `n = 0 .. N-1`.
    pub fn core(&self) -> &[Complex64] {
        &self.samples[self.n_cp..]
    }

    /// The prefix samples `n = -N_CP .. -1`.
    pub fn prefix(&self) -> &[Complex64] {
        &self.samples[..self.n_cp]
    }

    /// Sample at signed time index `n` in `-N_CP ..= N-1`.
    pub fn at(&self, n: isize) -> Complex64 {
        self.samples[(n + self.n_cp as isize) as usize]
    }

    /// True when the prefix repeats the tail of the core exactly.
    pub fn has_cyclic_prefix(&self) -> bool {
        let n = self.n_fft();
        self.prefix() == &self.core()[n - self.n_cp..]
    }

    /// Applies `f` elementwise, keeping the layout.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| f(s)).collect(),
            n_cp: self.n_cp,
        }
    }

    /// Sum of squared magnitudes over all transmitted samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Planned unitary transforms bound to a [`SystemConfig`].
#[derive(Clone)]
pub struct Modem {
    cfg: SystemConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl fmt::Debug for Modem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modem").field("cfg", &self.cfg).finish()
    }
}

impl Modem {
    pub fn new(cfg: SystemConfig) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(cfg.n_fft);
        let inverse = planner.plan_fft_inverse(cfg.n_fft);
        let norm = 1.0 / (cfg.n_fft as f64).sqrt();
        Self {
            cfg,
            forward,
            inverse,
            norm,
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn n_fft(&self) -> usize {
        self.cfg.n_fft
    }

    /// Unitary forward DFT in place. Bin `m` lands at index `m mod N`.
    ///
    /// Panics if `buf.len() != N`.
    pub fn dft_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.cfg.n_fft, "DFT length mismatch");
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.norm);
    }

    /// Unitary inverse DFT in place.
    pub fn idft_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.cfg.n_fft, "IDFT length mismatch");
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.norm);
    }

    /// `F(x)_m = N^{-1/2} sum_n x_n e^{-i 2 pi n m / N}` for all bins, in
    /// natural FFT order.
    pub fn dft(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cfg.n_fft, x.len())?;
        let mut buf = x.to_vec();
        self.dft_in_place(&mut buf);
        Ok(buf)
    }

    pub fn idft(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cfg.n_fft, x.len())?;
        let mut buf = x.to_vec();
        self.idft_in_place(&mut buf);
        Ok(buf)
    }

    /// A single DFT bin evaluated directly; `m` is taken cyclically.
    pub fn dft_bin(&self, x: &[Complex64], m: i64) -> Result<Complex64> {
        let n = self.cfg.n_fft;
        check_len(n, x.len())?;
        let m = self.cfg.bin(m);
        let sum: Complex64 = x
            .iter()
            .enumerate()
            .map(|(t, &v)| v * unit_phase(-(((t * m) % n) as f64) / n as f64))
            .sum();
        Ok(sum * self.norm)
    }

    /// Reorders a natural-order spectrum onto the centered index set,
    /// returning `(k, X_k)` for `k = -N/2 .. N/2-1`.
    pub fn centered(&self, spectrum: &[Complex64]) -> Vec<(i64, Complex64)> {
        let half = (self.cfg.n_fft / 2) as i64;
        (-half..half)
            .map(|k| (k, spectrum[self.cfg.bin(k)]))
            .collect()
    }

    fn synthesize(&self, tones: &[(i64, Complex64)]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::default(); self.cfg.n_fft];
        for &(k, d) in tones {
            buf[self.cfg.bin(k)] += d;
        }
        self.idft_in_place(&mut buf);
        buf
    }

    /// Full transmitted symbol `y_n`, `n = -N_CP .. N-1`.
    pub fn modulate(&self, sym: &FreqSymbol) -> Result<TimeFrame> {
        sym.check(&self.cfg)?;
        let tones: Vec<_> = self
            .cfg
            .data
            .iter()
            .copied()
            .zip(sym.data.iter().copied())
            .chain(self.cfg.tr.iter().copied().zip(sym.tr.iter().copied()))
            .collect();
        Ok(TimeFrame::from_core(
            &self.synthesize(&tones),
            self.cfg.n_cp,
        ))
    }

    /// Data-only part `x_n` of the symbol.
    pub fn data_waveform(&self, sym: &FreqSymbol) -> Result<TimeFrame> {
        sym.check(&self.cfg)?;
        let core = self.data_core(&sym.data)?;
        Ok(TimeFrame::from_core(&core, self.cfg.n_cp))
    }

    /// Core samples `x_n`, `n = 0 .. N-1`, of the data symbols alone.
    pub fn data_core(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cfg.alpha(), data.len())?;
        let tones: Vec<_> = self
            .cfg
            .data
            .iter()
            .copied()
            .zip(data.iter().copied())
            .collect();
        Ok(self.synthesize(&tones))
    }

    /// Core samples `sum_l d_l F*_{n,l}` contributed by the reserved tones.
    pub fn tr_waveform(&self, d_tr: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.cfg.beta(), d_tr.len())?;
        let tones: Vec<_> = self
            .cfg
            .tr
            .iter()
            .copied()
            .zip(d_tr.iter().copied())
            .collect();
        Ok(self.synthesize(&tones))
    }

    /// Random data symbols with silent reserved tones.
    pub fn random_frame<R: Rng + ?Sized>(&self, rng: &mut R) -> FreqSymbol {
        let c = self.cfg.constellation;
        FreqSymbol {
            data: (0..self.cfg.alpha()).map(|_| c.draw(rng)).collect(),
            tr: vec![Complex64::default(); self.cfg.beta()],
        }
    }

    /// The `index`-th symbol of the stream seeded by the configuration.
    pub fn symbol(&self, index: u64) -> FreqSymbol {
        self.random_frame(&mut symbol_rng(self.cfg.seed, index))
    }
}

/// Independent generator for symbol `index` of the stream `seed`.
pub fn symbol_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `e^{i 2 pi turns}`.
pub(crate) fn unit_phase(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * turns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SystemConfig {
        SystemConfig::new(
            16,
            4,
            vec![-6, -5, -3, -2, -1, 1, 2, 3, 5, 6],
            vec![-4, 4],
            Constellation::Qpsk,
            7,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let q = Constellation::Qpsk;
        assert!(SystemConfig::new(12, 2, vec![1], vec![2], q, 0).is_err());
        assert!(SystemConfig::new(16, 16, vec![1], vec![2], q, 0).is_err());
        assert!(SystemConfig::new(16, 2, vec![0], vec![2], q, 0).is_err());
        assert!(SystemConfig::new(16, 2, vec![1], vec![1], q, 0).is_err());
        assert!(SystemConfig::new(16, 2, vec![8], vec![2], q, 0).is_err());
        assert!(SystemConfig::new(16, 2, vec![-8], vec![2], q, 0).is_ok());
    }

    #[test]
    fn bin_mapping_is_modular() {
        let cfg = small_cfg();
        assert_eq!(cfg.bin(-1), 15);
        assert_eq!(cfg.bin(-8), 8);
        assert_eq!(cfg.bin(3), 3);
        assert_eq!(cfg.bin(19), 3);
    }

    #[test]
    fn dft_of_zeros_and_impulse() {
        let modem = Modem::new(small_cfg());
        let zeros = vec![Complex64::default(); 16];
        assert!(modem.dft(&zeros).unwrap().iter().all(|v| v.norm() == 0.0));
        let mut imp = zeros.clone();
        imp[0] = Complex64::new(1.0, 0.0);
        for v in modem.dft(&imp).unwrap() {
            assert!((v - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_rejects_wrong_length() {
        let modem = Modem::new(small_cfg());
        let x = vec![Complex64::default(); 8];
        assert!(matches!(modem.dft(&x), Err(Error::Length { .. })));
        assert!(modem.dft_bin(&x, 1).is_err());
    }

    #[test]
    fn single_tone_modulation() {
        let cfg = small_cfg();
        let modem = Modem::new(cfg.clone());
        let mut sym = FreqSymbol::zeros(&cfg);
        sym.data[1] = Complex64::new(1.0, 0.0); // subcarrier -5
        let frame = modem.modulate(&sym).unwrap();
        for n in -(cfg.n_cp() as isize)..cfg.n_fft() as isize {
            let expect = unit_phase(n as f64 * -5.0 / 16.0) * 0.25;
            assert!((frame.at(n) - expect).norm() < 1e-14);
        }
        assert!(frame.has_cyclic_prefix());
    }

    #[test]
    fn zero_symbol_gives_zero_frame() {
        let cfg = small_cfg();
        let modem = Modem::new(cfg.clone());
        let frame = modem.modulate(&FreqSymbol::zeros(&cfg)).unwrap();
        assert_eq!(frame.len(), 20);
        assert!(frame.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn modulate_checks_symbol_shape() {
        let cfg = small_cfg();
        let modem = Modem::new(cfg.clone());
        let sym = FreqSymbol {
            data: vec![Complex64::default(); 3],
            tr: vec![],
        };
        assert!(modem.modulate(&sym).is_err());
    }

    #[test]
    fn qpsk_points_and_determinism() {
        let cfg = small_cfg();
        let modem = Modem::new(cfg);
        let a = modem.symbol(0);
        let b = modem.symbol(0);
        assert_eq!(a, b);
        assert_ne!(a, modem.symbol(1));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for d in &a.data {
            assert!((d.re.abs() - r).abs() < 1e-15 && (d.im.abs() - r).abs() < 1e-15);
        }
        assert!(a.tr.iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn constellations_have_unit_power() {
        for c in [
            Constellation::Qpsk,
            Constellation::Qam16,
            Constellation::Qam64,
        ] {
            let pts = c.points();
            assert_eq!(pts.len(), c.order());
            let p: f64 = pts.iter().map(|v| v.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{c}: {p}");
        }
    }

    #[test]
    fn constellation_parsing() {
        assert_eq!(
            "QPSK".parse::<Constellation>().unwrap(),
            Constellation::Qpsk
        );
        assert_eq!(
            "16qam".parse::<Constellation>().unwrap(),
            Constellation::Qam16
        );
        assert!("8psk".parse::<Constellation>().is_err());
    }
}
