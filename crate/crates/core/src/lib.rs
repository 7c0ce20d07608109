//! Amplifier-coupled tone reservation (AC-TR) for OFDM.
//!
//! The reserved-tone symbols of each OFDM symbol are chosen to minimize the
//! squared error between the input and the output of a Rapp-modeled power
//! amplifier. The objective is convex for `K >= 1`, so a Newton solver with
//! FFT-accelerated Jacobian and Hessian reaches the global optimum in a few
//! iterations.
//!
//! Modules:
//!
//! * [`ofdm`]: system configuration, unitary DFT and symbol synthesis.
//! * [`pa`]: Rapp amplifier, soft limiter, Bussgang split and the analytic
//!   correlation coefficient.
//! * [`solver`]: the AC-TR objective, its derivatives and the Newton solver.
//! * [`baselines`]: PAPR-minimizing and clipping-noise TR for comparison.
//! * [`metrics`]: PAPR, CCDF, Welch PSD and ensemble SDR.
//! * [`experiments`]: simulation sweeps that write CSV tables.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
mod error;
pub mod experiments;
pub mod metrics;
pub mod ofdm;
pub mod ops;
pub mod pa;
pub mod quadrature;
pub mod solver;
pub mod validation;

pub use baselines::{
    count_ops_baseline, solve_ncc_tr, solve_papr_tr, BaselineAlgorithm, BaselineConfig,
};
pub use error::{Error, Result};
pub use metrics::{ccdf, ensemble_sdr, papr_db, psd, Algorithm, AlgorithmSettings, RunMetrics};
pub use ofdm::{symbol_rng, Constellation, FreqSymbol, Modem, SystemConfig, TimeFrame};
pub use ops::{count_ops_ac_tr, OpCounter};
pub use pa::{
    bussgang_split, lambda_analytic, rapp_amplify, sdr_db, soft_limit, BussgangSplit, PaModel,
    RappPa,
};
pub use solver::{
    gamma_lambda, objective, solve_ac_tr, AcTrConfig, AcTrSolver, HessianMode, NewtonWorkspace,
    SolveDiagnostics,
};

pub use num_complex::Complex64;
