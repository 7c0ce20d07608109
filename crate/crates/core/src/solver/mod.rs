//! Amplifier-coupled tone reservation: Newton minimization of
//! `f(d_TR) = sum_n |y~_n - K y_n|^2` over the reserved-tone symbols.
//!
//! For `K >= 1` the objective is convex in `d_TR`, so every Newton direction
//! is a descent direction and the stationary point is the global optimum.
//! Each iteration costs four N-point transforms (Jacobian, two for the
//! Hessian, one to map the update back to time domain) plus a Cholesky solve
//! of size `2 beta`.

mod cost;
mod derivatives;
mod linalg;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use cost::{
    evaluate, gamma_lambda, objective, objective_value, Evaluation, RappCost, SampleCost,
    SampleTerms,
};
pub use derivatives::{hessian_direct, hessian_fast, jacobian_direct, jacobian_fast};
pub use linalg::{newton_direction, Cholesky, DenseMatrix, NewtonDirection};

use crate::error::{config_err, Result};
use crate::ofdm::{FreqSymbol, Modem};
use crate::ops::{count_ops_ac_tr, OpCounter};
use crate::pa::RappPa;

/// How the Hessian is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianMode {
    #[default]
    FastFft,
    Direct,
}

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcTrConfig {
    /// Target gain `K` in `|y~ - K y|^2`; must be at least 1.
    pub k_param: f64,
    /// Stop once the largest reserved-symbol update (complex modulus) drops
    /// below this.
    pub stop_delta: f64,
    pub max_iters: usize,
    pub hessian_mode: HessianMode,
    /// Backtrack (halving) until the objective does not increase.
    pub line_search: bool,
}

impl Default for AcTrConfig {
    fn default() -> Self {
        Self {
            k_param: 1.0,
            stop_delta: 0.01,
            max_iters: 50,
            hessian_mode: HessianMode::FastFft,
            line_search: true,
        }
    }
}

impl AcTrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_param >= 1.0) {
            return config_err(format!("K must be >= 1, got {}", self.k_param));
        }
        if !(self.stop_delta > 0.0) {
            return config_err(format!(
                "stop_delta must be positive, got {}",
                self.stop_delta
            ));
        }
        if self.max_iters == 0 {
            return config_err("max_iters must be positive");
        }
        Ok(())
    }
}

const MAX_HALVINGS: usize = 20;

/// Per-solve summary shared by every TR algorithm.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub ops_counted: u64,
    pub ops_formula: u64,
    pub final_objective: f64,
    pub final_grad_inf: f64,
    pub converged: bool,
    /// Backtracking halvings performed by the line search.
    pub rejected_steps: usize,
    /// Newton steps that needed a diagonal shift to factor the Hessian.
    pub regularized_steps: usize,
    /// Objective at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Clipped-sample count per iteration (NCC-TR only).
    pub theta_trace: Vec<usize>,
}

/// Flat per-symbol record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub iterations: usize,
    pub ops_counted: u64,
    pub ops_formula: u64,
    pub final_objective: f64,
    pub converged: bool,
}

impl SolveDiagnostics {
    pub fn record(&self) -> DiagnosticsRecord {
        DiagnosticsRecord {
            iterations: self.iterations,
            ops_counted: self.ops_counted,
            ops_formula: self.ops_formula,
            final_objective: self.final_objective,
            converged: self.converged,
        }
    }
}

/// Mutable state of one solve.
#[derive(Clone, Debug)]
pub struct NewtonWorkspace {
    /// Current reserved-tone symbols.
    pub d_tr: Vec<Complex64>,
    /// Core time samples `y_n`, `n = 0 .. N-1`, at `d_tr`.
    pub y: Vec<Complex64>,
    /// Powers, Γ, Λ and objective at `y`.
    pub eval: Evaluation,
    pub jacobian: Vec<f64>,
    pub hessian: DenseMatrix,
    pub iter: usize,
    pub ops: OpCounter,
    pub rejected_steps: usize,
    pub regularized_steps: usize,
    pub trace: Vec<f64>,
}

/// Result of one Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    /// The gradient vanished; the iterate is unchanged.
    ZeroGradient,
    /// A step was taken; `max_change` is `max_l |Δd_l|` actually applied.
    Accepted { max_change: f64 },
    /// No step length reduced the objective; the iterate is unchanged.
    /// `full_change` is `max_l |Δd_l|` of the full Newton step.
    NoDecrease { full_change: f64 },
}

/// Newton solver for a separable objective over the reserved tones.
#[derive(Clone, Debug)]
pub struct AcTrSolver<'m, C: SampleCost = RappCost> {
    modem: &'m Modem,
    cost: C,
    opts: AcTrConfig,
    mult: Vec<f64>,
}

impl<'m> AcTrSolver<'m, RappCost> {
    /// AC-TR solver for the Rapp model `pa` (unit gain assumed).
    pub fn new(modem: &'m Modem, pa: &RappPa, opts: AcTrConfig) -> Result<Self> {
        opts.validate()?;
        let cost = RappCost::new(pa, opts.k_param)?;
        Self::with_cost(modem, cost, opts)
    }
}

impl<'m, C: SampleCost> AcTrSolver<'m, C> {
    pub fn with_cost(modem: &'m Modem, cost: C, opts: AcTrConfig) -> Result<Self> {
        opts.validate()?;
        Ok(Self {
            modem,
            cost,
            opts,
            mult: modem.config().multiplicity(),
        })
    }

    pub fn options(&self) -> &AcTrConfig {
        &self.opts
    }

    pub fn cost(&self) -> &C {
        &self.cost
    }

    /// State at `sym.tr`, the starting point.
    pub fn workspace(&self, sym: &FreqSymbol) -> Result<NewtonWorkspace> {
        let frame = self.modem.modulate(sym)?;
        let y = frame.core().to_vec();
        let mut ops = OpCounter::new();
        let eval = evaluate(&self.cost, &y, &self.mult, &mut ops);
        let beta = self.modem.config().beta();
        Ok(NewtonWorkspace {
            d_tr: sym.tr.clone(),
            trace: vec![eval.objective],
            y,
            eval,
            jacobian: vec![0.0; 2 * beta],
            hessian: DenseMatrix::zeros(2 * beta),
            iter: 0,
            ops,
            rejected_steps: 0,
            regularized_steps: 0,
        })
    }

    pub fn jacobian(&self, ws: &NewtonWorkspace, ops: &mut OpCounter) -> Vec<f64> {
        match self.opts.hessian_mode {
            HessianMode::FastFft => jacobian_fast(self.modem, &ws.y, &ws.eval.gamma, ops),
            HessianMode::Direct => jacobian_direct(self.modem.config(), &ws.y, &ws.eval.gamma),
        }
    }

    pub fn hessian(&self, ws: &NewtonWorkspace, ops: &mut OpCounter) -> DenseMatrix {
        match self.opts.hessian_mode {
            HessianMode::FastFft => hessian_fast(
                self.modem,
                &ws.y,
                &ws.eval.power,
                &ws.eval.gamma,
                &ws.eval.lambda,
                ops,
            ),
            HessianMode::Direct => {
                hessian_direct(self.modem.config(), &ws.y, &ws.eval.gamma, &ws.eval.lambda)
            }
        }
    }

    /// One Newton iteration: solve `H Δ = ∇f`, then move to `d - t Δ` with
    /// `t = 1, 1/2, 1/4, ...` until the objective does not increase.
    pub fn step(&self, ws: &mut NewtonWorkspace) -> StepOutcome {
        let cfg = self.modem.config();
        let beta = cfg.beta();
        let n = cfg.n_fft();
        let mut ops = ws.ops;

        ws.jacobian = self.jacobian(ws, &mut ops);
        if ws.jacobian.iter().all(|&g| g == 0.0) {
            ws.ops = ops;
            return StepOutcome::ZeroGradient;
        }
        ws.hessian = self.hessian(ws, &mut ops);
        let Some(dir) = newton_direction(&ws.hessian, &ws.jacobian, &mut ops) else {
            ws.ops = ops;
            return StepOutcome::NoDecrease {
                full_change: f64::INFINITY,
            };
        };
        if dir.shift > 0.0 {
            ws.regularized_steps += 1;
        }
        let delta: Vec<Complex64> = (0..beta)
            .map(|l| Complex64::new(dir.delta[l], dir.delta[beta + l]))
            .collect();
        let full_change = delta.iter().fold(0.0f64, |m, d| m.max(d.norm()));
        ops.add_each(beta, 4);
        let dy = self
            .modem
            .tr_waveform(&delta)
            .expect("update length matches the configuration");
        ops.complex_fft(n);

        let mut t = 1.0;
        let mut accepted = None;
        for attempt in 0..=MAX_HALVINGS {
            let trial: Vec<Complex64> = ws.y.iter().zip(&dy).map(|(y, d)| y - d * t).collect();
            ops.add_each(n, if attempt == 0 { 2 } else { 4 });
            let eval = evaluate(&self.cost, &trial, &self.mult, &mut ops);
            if !self.opts.line_search || eval.objective <= ws.eval.objective {
                accepted = Some((trial, eval));
                break;
            }
            ws.rejected_steps += 1;
            t *= 0.5;
        }
        ws.ops = ops;
        let Some((y, eval)) = accepted else {
            return StepOutcome::NoDecrease { full_change };
        };
        for (d, s) in ws.d_tr.iter_mut().zip(&delta) {
            *d -= s * t;
        }
        ws.y = y;
        ws.eval = eval;
        ws.iter += 1;
        ws.trace.push(ws.eval.objective);
        StepOutcome::Accepted {
            max_change: t * full_change,
        }
    }

    /// Runs Newton iterations from `sym.tr` until the largest symbol update
    /// falls below `stop_delta` or `max_iters` is reached. Data symbols are
    /// returned untouched.
    pub fn solve(&self, sym: &FreqSymbol) -> Result<(FreqSymbol, SolveDiagnostics)> {
        let mut ws = self.workspace(sym)?;
        let mut converged = false;
        while ws.iter < self.opts.max_iters {
            match self.step(&mut ws) {
                StepOutcome::ZeroGradient => {
                    converged = true;
                    break;
                }
                StepOutcome::Accepted { max_change } => {
                    if max_change < self.opts.stop_delta {
                        converged = true;
                        break;
                    }
                }
                StepOutcome::NoDecrease { full_change } => {
                    converged = full_change < self.opts.stop_delta;
                    break;
                }
            }
        }
        let cfg = self.modem.config();
        let grad = self.jacobian(&ws, &mut OpCounter::new());
        let diag = SolveDiagnostics {
            iterations: ws.iter,
            ops_counted: ws.ops.total(),
            ops_formula: ws.iter as u64 * count_ops_ac_tr(cfg.n_fft(), cfg.beta()),
            final_objective: ws.eval.objective,
            final_grad_inf: grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
            converged,
            rejected_steps: ws.rejected_steps,
            regularized_steps: ws.regularized_steps,
            objective_trace: ws.trace,
            theta_trace: Vec::new(),
        };
        Ok((sym.with_tr(ws.d_tr), diag))
    }
}

/// Optimizes the reserved tones of `sym` for amplifier `pa`.
pub fn solve_ac_tr(
    modem: &Modem,
    pa: &RappPa,
    sym: &FreqSymbol,
    opts: &AcTrConfig,
) -> Result<(FreqSymbol, SolveDiagnostics)> {
    AcTrSolver::new(modem, pa, *opts)?.solve(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{Constellation, SystemConfig};

    fn modem() -> Modem {
        let cfg = SystemConfig::new(
            64,
            8,
            (-12..=12).filter(|&k| k != 0 && k % 5 != 0).collect(),
            vec![-10, 5, 10],
            Constellation::Qpsk,
            3,
        )
        .unwrap();
        Modem::new(cfg)
    }

    #[test]
    fn config_validation() {
        let mut c = AcTrConfig::default();
        assert!(c.validate().is_ok());
        c.k_param = 0.5;
        assert!(c.validate().is_err());
        c = AcTrConfig {
            stop_delta: 0.0,
            ..AcTrConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn linear_amplifier_needs_no_tones() {
        let m = modem();
        let sigma = m.config().data_power().sqrt();
        let pa = RappPa::new(4.0, 1e6 * sigma, 1.0).unwrap();
        let sym = m.symbol(0);
        let (out, diag) = solve_ac_tr(&m, &pa, &sym, &AcTrConfig::default()).unwrap();
        assert!(diag.iterations <= 1);
        assert!(diag.converged);
        assert!(diag.final_objective < 1e-12);
        assert!(out.tr.iter().all(|t| t.norm() < 1e-9));
        assert_eq!(out.data, sym.data);
    }

    #[test]
    fn descent_and_data_preservation() {
        let m = modem();
        let sigma = m.config().data_power().sqrt();
        let pa = RappPa::from_ibo(4.0, 2.0, sigma * sigma).unwrap();
        for i in 0..5 {
            let sym = m.symbol(i);
            let (out, diag) = solve_ac_tr(&m, &pa, &sym, &AcTrConfig::default()).unwrap();
            assert_eq!(out.data, sym.data);
            assert!(diag.converged);
            for w in diag.objective_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(diag.final_objective <= diag.objective_trace[0]);
        }
    }

    #[test]
    fn modes_agree() {
        let m = modem();
        let sigma = m.config().data_power().sqrt();
        let pa = RappPa::from_ibo(3.0, 3.0, sigma * sigma).unwrap();
        let sym = m.symbol(4);
        let fast = solve_ac_tr(&m, &pa, &sym, &AcTrConfig::default()).unwrap();
        let direct = solve_ac_tr(
            &m,
            &pa,
            &sym,
            &AcTrConfig {
                hessian_mode: HessianMode::Direct,
                ..AcTrConfig::default()
            },
        )
        .unwrap();
        assert_eq!(fast.1.iterations, direct.1.iterations);
        for (a, b) in fast.0.tr.iter().zip(&direct.0.tr) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
