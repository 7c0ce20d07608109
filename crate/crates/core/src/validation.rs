//! Self-check suite behind `tr-opt validate`. Each check is fast (well under
//! a second at small scale) and reports a pass flag plus a one-line detail.

use num_complex::Complex64;
use rand::Rng;

use crate::baselines::{solve_ncc_tr, solve_papr_tr, BaselineConfig};
use crate::error::Result;
use crate::experiments::default_paper_config;
use crate::metrics::{ensemble_sdr, v_sat_for_ibo, Algorithm, AlgorithmSettings};
use crate::ofdm::{symbol_rng, Constellation, Modem, SystemConfig};
use crate::ops::{count_ops_ac_tr, OpCounter};
use crate::pa::{bussgang_split, lambda_analytic, PaModel, RappPa};
use crate::solver::{
    evaluate, hessian_direct, hessian_fast, jacobian_direct, jacobian_fast, solve_ac_tr,
    AcTrConfig, Cholesky, RappCost,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

fn small_modem(seed: u64) -> Modem {
    let tr = vec![-13, 2, 9];
    let data = (-16..=16).filter(|k| *k != 0 && !tr.contains(k)).collect();
    Modem::new(SystemConfig::new(64, 8, data, tr, Constellation::Qpsk, seed).expect("valid"))
}

/// Random state: a symbol with random reserved tones, and a Rapp PA whose
/// threshold sits near the signal level.
fn random_state(modem: &Modem, index: u64, p: f64) -> (Vec<Complex64>, RappPa) {
    let cfg = modem.config();
    let mut rng = symbol_rng(cfg.seed() ^ 0x5eed, index);
    let mut sym = modem.random_frame(&mut rng);
    for d in &mut sym.tr {
        *d = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let y = modem.modulate(&sym).expect("valid symbol").core().to_vec();
    let v = rng.random_range(0.7..1.6) * cfg.data_power().sqrt();
    (y, RappPa::new(p, v, 1.0).expect("valid PA"))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn check_fast_derivatives(seed: u64) -> Check {
    let modem = small_modem(seed);
    let cfg = modem.config();
    let mult = cfg.multiplicity();
    let mut worst = 0.0f64;
    for (i, p) in [2.0, 4.0, 10.0].into_iter().cycle().take(30).enumerate() {
        let (y, pa) = random_state(&modem, i as u64, p);
        let cost = RappCost::new(&pa, 1.0).expect("valid cost");
        let mut ops = OpCounter::new();
        let ev = evaluate(&cost, &y, &mult, &mut ops);
        let jf = jacobian_fast(&modem, &y, &ev.gamma, &mut ops);
        let jd = jacobian_direct(cfg, &y, &ev.gamma);
        let hf = hessian_fast(&modem, &y, &ev.power, &ev.gamma, &ev.lambda, &mut ops);
        let hd = hessian_direct(cfg, &y, &ev.gamma, &ev.lambda);
        worst = worst
            .max(rel_err(&jf, &jd))
            .max(rel_err(hf.as_slice(), hd.as_slice()));
    }
    Check::new(
        "fast Jacobian/Hessian match direct sums",
        worst <= 1e-9,
        format!("max relative error {worst:.2e}"),
    )
}

fn check_convexity(seed: u64) -> Check {
    let modem = small_modem(seed);
    let mult = modem.config().multiplicity();
    let mut failures = 0;
    for (i, k) in [1.0, 1.5].into_iter().cycle().take(40).enumerate() {
        let (y, pa) = random_state(&modem, 100 + i as u64, 4.0);
        let cost = RappCost::new(&pa, k).expect("valid cost");
        let mut ops = OpCounter::new();
        let ev = evaluate(&cost, &y, &mult, &mut ops);
        let mut h = hessian_fast(&modem, &y, &ev.power, &ev.gamma, &ev.lambda, &mut ops);
        let shift = 1e-8 * h.max_abs();
        for j in 0..h.dim() {
            h[(j, j)] += shift;
        }
        if Cholesky::factor(&h, &mut ops).is_none() {
            failures += 1;
        }
    }
    Check::new(
        "Hessian positive semidefinite for K >= 1",
        failures == 0,
        format!("{failures} of 40 states not PSD"),
    )
}

fn check_finite_differences(seed: u64) -> Check {
    let modem = small_modem(seed);
    let cfg = modem.config();
    let beta = cfg.beta();
    let mult = cfg.multiplicity();
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let (y, pa) = random_state(&modem, 200 + i, 4.0);
        let cost = RappCost::new(&pa, 1.0).expect("valid cost");
        let mut ops = OpCounter::new();
        let ev = evaluate(&cost, &y, &mult, &mut ops);
        let jac = jacobian_fast(&modem, &y, &ev.gamma, &mut ops);
        let h = 1e-6;
        let mut fd = vec![0.0; 2 * beta];
        for (j, slot) in fd.iter_mut().enumerate() {
            let mut d = vec![Complex64::default(); beta];
            d[j % beta] = if j < beta {
                Complex64::new(h, 0.0)
            } else {
                Complex64::new(0.0, h)
            };
            let dy = modem.tr_waveform(&d).expect("beta symbols");
            let f = |sign: f64| {
                let shifted: Vec<Complex64> =
                    y.iter().zip(&dy).map(|(a, b)| a + b * sign).collect();
                evaluate(&cost, &shifted, &mult, &mut OpCounter::new()).objective
            };
            *slot = (f(1.0) - f(-1.0)) / (2.0 * h);
        }
        worst = worst.max(rel_err(&jac, &fd));
    }
    Check::new(
        "Jacobian matches central differences",
        worst <= 1e-5,
        format!("max relative error {worst:.2e}"),
    )
}

fn check_lambda(seed: u64) -> Check {
    let cfg = default_paper_config().with_seed(seed);
    let modem = Modem::new(cfg.clone());
    let (p, ibo) = (4.0, 6.0);
    let pa = PaModel::from_p(p, v_sat_for_ibo(&cfg, ibo)).expect("valid PA");
    let run = ensemble_sdr(
        &modem,
        &pa,
        &AlgorithmSettings::new(Algorithm::Reference),
        200,
        seed,
    );
    let analytic = lambda_analytic(p, ibo);
    match (run, analytic) {
        (Ok(r), Ok(a)) => Check::new(
            "reference lambda matches quadrature",
            (r.lambda_emp - a).abs() <= 0.005,
            format!("Monte-Carlo {:.5} vs analytic {a:.5}", r.lambda_emp),
        ),
        (Err(e), _) | (_, Err(e)) => {
            Check::new("reference lambda matches quadrature", false, e.to_string())
        }
    }
}

fn check_bussgang(seed: u64) -> Check {
    let modem = small_modem(seed);
    let pa = PaModel::from_p(3.0, modem.config().data_power().sqrt()).expect("valid PA");
    let input: Vec<_> = (0..50)
        .map(|i| modem.modulate(&modem.symbol(i)).expect("valid"))
        .collect();
    let output: Vec<_> = input.iter().map(|f| pa.amplify(f)).collect();
    match bussgang_split(&input, &output) {
        Ok(split) => {
            let cross: Complex64 = input
                .iter()
                .zip(&split.distortion)
                .flat_map(|(a, s)| {
                    a.samples()
                        .iter()
                        .zip(s.samples())
                        .map(|(x, d)| d * x.conj())
                })
                .sum();
            let power: f64 = input.iter().map(|f| f.energy()).sum();
            let r = cross.norm() / power;
            Check::new(
                "distortion uncorrelated with input",
                r < 1e-12,
                format!("normalized cross-correlation {r:.2e}"),
            )
        }
        Err(e) => Check::new("distortion uncorrelated with input", false, e.to_string()),
    }
}

fn check_solvers(seed: u64) -> Result<Vec<Check>> {
    let cfg = default_paper_config().with_seed(seed);
    let modem = Modem::new(cfg.clone());
    let v = v_sat_for_ibo(&cfg, 7.0);
    let pa = RappPa::new(10.0, v, 1.0)?;
    let opts = AcTrConfig::default();
    let (mut monotone, mut data_kept, mut converged, mut peak_ok) = (true, true, 0, true);
    let (mut counted, mut formula) = (0u64, 0u64);
    let n = 20;
    for i in 0..n {
        let sym = modem.symbol(i);
        let (out, diag) = solve_ac_tr(&modem, &pa, &sym, &opts)?;
        monotone &= diag.objective_trace.windows(2).all(|w| w[1] <= w[0]);
        data_kept &= out.data == sym.data;
        converged += usize::from(diag.converged);
        counted += diag.ops_counted;
        formula += diag.ops_formula;

        let peak = |s| -> Result<f64> {
            Ok(modem
                .modulate(s)?
                .core()
                .iter()
                .fold(0.0f64, |m, x| m.max(x.norm())))
        };
        let (papr, _) = solve_papr_tr(&modem, &sym, &BaselineConfig::papr_tr())?;
        peak_ok &= peak(&papr)? <= peak(&sym)?;
        let (ncc, _) = solve_ncc_tr(&modem, &sym, &BaselineConfig::ncc_tr(v))?;
        data_kept &= papr.data == sym.data && ncc.data == sym.data;
    }
    let ratio = counted as f64 / formula as f64;
    Ok(vec![
        Check::new(
            "AC-TR objective never increases",
            monotone,
            format!("{n} symbols"),
        ),
        Check::new(
            "AC-TR stopping rule reached",
            converged == n as usize,
            format!("{converged} of {n} converged"),
        ),
        Check::new(
            "operation counter within 10% of the closed form",
            (0.9..=1.1).contains(&ratio),
            format!(
                "counted/formula = {ratio:.3} (formula {} per iteration)",
                count_ops_ac_tr(cfg.n_fft(), cfg.beta())
            ),
        ),
        Check::new(
            "PAPR-TR never raises the peak",
            peak_ok,
            format!("{n} symbols"),
        ),
        Check::new(
            "data subcarriers untouched by every algorithm",
            data_kept,
            format!("{n} symbols"),
        ),
    ])
}

fn check_round_trip(seed: u64) -> Check {
    let modem = small_modem(seed);
    let mut rng = symbol_rng(seed, 999);
    let x: Vec<Complex64> = (0..64)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut buf = x.clone();
    modem.dft_in_place(&mut buf);
    let energy_in: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let energy_freq: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    modem.idft_in_place(&mut buf);
    let err = x
        .iter()
        .zip(&buf)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let parseval = (energy_in - energy_freq).abs() / energy_in;
    Check::new(
        "unitary DFT round trip",
        err < 1e-12 && parseval < 1e-12,
        format!("max error {err:.2e}, energy mismatch {parseval:.2e}"),
    )
}

/// Runs every check with the given seed.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut checks = vec![
        check_round_trip(seed),
        check_fast_derivatives(seed),
        check_finite_differences(seed),
        check_convexity(seed),
        check_bussgang(seed),
        check_lambda(seed),
    ];
    match check_solvers(seed) {
        Ok(more) => checks.extend(more),
        Err(e) => checks.push(Check::new("solver invariants", false, e.to_string())),
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
