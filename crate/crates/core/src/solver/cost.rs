//! Separable per-sample costs and the Γ/Λ weight vectors.
//!
//! An objective of the form `f = sum_n c_n phi(|y_n|^2)` has Jacobian and
//! Hessian fully described by two real vectors,
//! `Γ_n = 2 c_n phi'(q_n)` and `Λ_n = 4 c_n phi''(q_n)`, where `c_n` is 2 for
//! core samples repeated in the cyclic prefix and 1 otherwise.

use num_complex::Complex64;

use crate::error::{check_len, config_err, Result};
use crate::ofdm::{SystemConfig, TimeFrame};
use crate::ops::OpCounter;
use crate::pa::RappPa;

/// Value and first two derivatives of `phi` at one power `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleTerms {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

/// Penalty `phi(q)` on the instantaneous power `q = |y_n|^2`.
pub trait SampleCost: Sync {
    fn terms(&self, q: f64) -> SampleTerms;

    /// Operations charged per sample for one call to [`SampleCost::terms`].
    fn ops_per_sample(&self) -> u64;
}

/// `phi(q) = q (b^{-1/(2p)} - K)^2` with `b = 1 + q^p / V^{2p}`: the squared
/// error `|y~ - K y|^2` of a unit-gain Rapp amplifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RappCost {
    p: f64,
    k: f64,
    inv_v2: f64,
}

impl RappCost {
    /// Requires `p >= 1` (so `|y|^{2p-2}` stays finite at zero) and `K >= 1`
    /// (so the objective is convex).
    pub fn new(pa: &RappPa, k: f64) -> Result<Self> {
        if pa.p() < 1.0 {
            return config_err(format!("AC-TR needs p >= 1, got {}", pa.p()));
        }
        if !(k >= 1.0) || !k.is_finite() {
            return config_err(format!("K must be >= 1 for convexity, got {k}"));
        }
        Ok(Self {
            p: pa.p(),
            k,
            inv_v2: 1.0 / (pa.v_sat() * pa.v_sat()),
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl SampleCost for RappCost {
    fn terms(&self, q: f64) -> SampleTerms {
        let k = self.k;
        let z = q * self.inv_v2;
        let z_pm1 = z.powf(self.p - 1.0);
        let w = z_pm1 * z;
        if !w.is_finite() {
            // Deep saturation: the output amplitude vanishes relative to q.
            return SampleTerms {
                value: q * k * k,
                slope: k * k,
                curvature: 0.0,
            };
        }
        let b = 1.0 + w;
        let h = (-w.ln_1p() / (2.0 * self.p)).exp();
        let u = h / b;
        let kmh = k - h;
        let kmu = k - u;
        SampleTerms {
            value: q * kmh * kmh,
            slope: kmh * kmu,
            curvature: 0.5 * z_pm1 * self.inv_v2 * u * (kmu + (1.0 + 2.0 * self.p) * kmh / b),
        }
    }

    fn ops_per_sample(&self) -> u64 {
        // b: 4, h (one power): 1, u: 1, K-h and K-u: 2, value: 2, slope: 1,
        // curvature with per-cost constants hoisted: 6
        17
    }
}

/// Current point of a separable objective: powers, Γ, Λ and the value.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    pub power: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub objective: f64,
}

/// Evaluates `sum_n c_n phi(|y_n|^2)` and its weight vectors over the core
/// samples `y`, with multiplicities `mult`.
pub fn evaluate<C: SampleCost + ?Sized>(
    cost: &C,
    y: &[Complex64],
    mult: &[f64],
    ops: &mut OpCounter,
) -> Evaluation {
    let n = y.len();
    let mut out = Evaluation {
        power: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        objective: 0.0,
    };
    for (s, &c) in y.iter().zip(mult) {
        let q = s.norm_sqr();
        let t = cost.terms(q);
        out.power.push(q);
        out.gamma.push(2.0 * c * t.slope);
        out.lambda.push(4.0 * c * t.curvature);
        out.objective += c * t.value;
    }
    // |y|^2: 3, weights and accumulation: 4
    ops.add_each(n, cost.ops_per_sample() + 7);
    out
}

/// Objective value only.
pub fn objective_value<C: SampleCost + ?Sized>(cost: &C, y: &[Complex64], mult: &[f64]) -> f64 {
    y.iter()
        .zip(mult)
        .map(|(s, &c)| c * cost.terms(s.norm_sqr()).value)
        .sum()
}

/// AC-TR objective `f = sum_{n=-N_CP}^{N-1} |y~_n - K y_n|^2`, evaluated on
/// the core samples with the prefix folded in as a factor of 2 on the last
/// `N_CP` samples.
pub fn objective(cfg: &SystemConfig, pa: &RappPa, frame: &TimeFrame, k: f64) -> Result<f64> {
    check_len(cfg.frame_len(), frame.len())?;
    let cost = RappCost::new(pa, k)?;
    Ok(objective_value(&cost, frame.core(), &cfg.multiplicity()))
}

/// Γ and Λ of the AC-TR objective at core samples `y`:
///
/// * `Γ_n = c (K - b^{-1/(2p)}) (K - b^{-1/(2p)-1})`
/// * `Λ_n = (c / V^{2p}) |y_n|^{2p-2} b^{-1/(2p)-1}
///   [K - b^{-1/(2p)-1} + (1 + 2p) b^{-1} (K - b^{-1/(2p)})]`
///
/// with `b = 1 + |y_n|^{2p} / V^{2p}`, `c = 2` on `0 .. N-N_CP-1` and `c = 4`
/// on the samples repeated in the prefix.
pub fn gamma_lambda(
    cfg: &SystemConfig,
    pa: &RappPa,
    y: &[Complex64],
    k: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(cfg.n_fft(), y.len())?;
    let cost = RappCost::new(pa, k)?;
    let ev = evaluate(&cost, y, &cfg.multiplicity(), &mut OpCounter::new());
    Ok((ev.gamma, ev.lambda))
}
