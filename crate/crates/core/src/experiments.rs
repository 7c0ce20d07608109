//! Simulation sweeps over amplifier settings. Each experiment evaluates a
//! grid of (algorithm, p, reference IBO) points and writes one CSV table
//! plus a matplotlib script that plots it.
//!
//! Every CSV row starts with `algorithm, p_true, p_model, ref_ibo_db,
//! n_symbols, seed` and ends with `mean_iters, mean_ops_counted,
//! mean_ops_formula`; the experiment-specific metric columns sit between.
//! `p_model` is the smoothness the algorithm assumes (AC-TR: `p` capped,
//! NCC-TR: `inf`) and is empty for the PA-agnostic ones.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{config_err, Error, Result};
use crate::metrics::{
    evaluate_ensemble, in_band_mean_db, occupied_band_edge, optimize_ensemble, v_sat_for_ibo,
    Algorithm, AlgorithmSettings, OptimizedEnsemble, RunMetrics,
};
use crate::ofdm::{Constellation, Modem, SystemConfig};
use crate::pa::{lambda_analytic, PaModel};

/// Reserved tones of the default system.
pub const DEFAULT_TR_INDICES: [i64; 11] = [-100, -80, -60, -40, -20, -1, 20, 40, 60, 80, 100];

/// `N = 1024`, `N_CP = 128`, QPSK on `{-100..100} \ {0} \ T` with the
/// eleven reserved tones of [`DEFAULT_TR_INDICES`].
pub fn default_paper_config() -> SystemConfig {
    let tr = DEFAULT_TR_INDICES.to_vec();
    let data = (-100..=100)
        .filter(|k| *k != 0 && !tr.contains(k))
        .collect();
    SystemConfig::new(1024, 128, data, tr, Constellation::Qpsk, 1)
        .expect("the default configuration is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    LambdaVsIbo,
    Psd,
    SdrVsIbo,
    PaprCcdf,
    ItersOps,
    SdrVsP,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::LambdaVsIbo,
        ExperimentKind::Psd,
        ExperimentKind::SdrVsIbo,
        ExperimentKind::PaprCcdf,
        ExperimentKind::ItersOps,
        ExperimentKind::SdrVsP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LambdaVsIbo => "lambda_vs_ibo",
            ExperimentKind::Psd => "psd",
            ExperimentKind::SdrVsIbo => "sdr_vs_ibo",
            ExperimentKind::PaprCcdf => "papr_ccdf",
            ExperimentKind::ItersOps => "iters_ops",
            ExperimentKind::SdrVsP => "sdr_vs_p",
        }
    }

    pub fn default_ibo_grid(self) -> Vec<f64> {
        match self {
            ExperimentKind::Psd | ExperimentKind::SdrVsP => vec![8.0],
            ExperimentKind::PaprCcdf => vec![4.0, 8.0],
            _ => (4..=12).map(f64::from).collect(),
        }
    }

    pub fn default_p_values(self) -> Vec<f64> {
        match self {
            ExperimentKind::SdrVsP => vec![
                2.0,
                3.0,
                4.0,
                6.0,
                8.0,
                10.0,
                15.0,
                20.0,
                50.0,
                f64::INFINITY,
            ],
            _ => vec![4.0, 10.0],
        }
    }

    fn metric_columns(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::LambdaVsIbo => &["lambda_emp", "lambda_analytic", "sdr_db"],
            ExperimentKind::Psd => &["freq", "psd_total_db", "psd_distortion_db"],
            ExperimentKind::SdrVsIbo | ExperimentKind::SdrVsP => &["sdr_db", "lambda_emp"],
            ExperimentKind::PaprCcdf => &["papr_db", "ccdf"],
            ExperimentKind::ItersOps => &["converged_fraction", "ops_ratio"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// One sweep: which experiment, over which grid, written where.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub ibo_grid_db: Vec<f64>,
    /// Amplifier smoothness values; `inf` selects the soft limiter.
    pub p_values: Vec<f64>,
    pub n_symbols: usize,
    pub algorithms: Vec<Algorithm>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub system: SystemConfig,
    /// Solver options shared by every algorithm run.
    pub settings: AlgorithmSettings,
}

impl ExperimentSpec {
    /// Default grid for `kind` on the default system with 1000 symbols.
    pub fn new(kind: ExperimentKind, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            ibo_grid_db: kind.default_ibo_grid(),
            p_values: kind.default_p_values(),
            n_symbols: 1000,
            algorithms: Algorithm::ALL.to_vec(),
            output_dir: output_dir.into(),
            seed: 1,
            system: default_paper_config(),
            settings: AlgorithmSettings::new(Algorithm::Reference),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 {
            return config_err("n_symbols must be at least 1");
        }
        if self.ibo_grid_db.is_empty() || self.p_values.is_empty() || self.algorithms.is_empty() {
            return config_err("IBO grid, p values and algorithms must be nonempty");
        }
        if let Some(ibo) = self.ibo_grid_db.iter().find(|v| !v.is_finite()) {
            return config_err(format!("IBO must be finite, got {ibo}"));
        }
        if let Some(p) = self.p_values.iter().find(|&&p| !(p >= 1.0)) {
            return config_err(format!("p must be at least 1, got {p}"));
        }
        self.settings.actr.validate()
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.kind.name()))
    }

    pub fn script_path(&self) -> PathBuf {
        self.output_dir
            .join(format!("plot_{}.py", self.kind.name()))
    }
}

/// Metrics at one grid point.
#[derive(Clone, Debug)]
pub struct GridResult {
    pub p_true: f64,
    pub ibo_db: f64,
    pub metrics: RunMetrics,
}

type CacheKey = (Algorithm, u64, u64);

fn cache_key(settings: &AlgorithmSettings, pa: &PaModel) -> CacheKey {
    let v = pa.v_sat().to_bits();
    match settings.algorithm {
        Algorithm::Reference | Algorithm::PaprTr => (settings.algorithm, 0, 0),
        Algorithm::NccTr => (settings.algorithm, 0, v),
        Algorithm::AcTr => (settings.algorithm, settings.p_model(pa.p()).to_bits(), v),
    }
}

/// Evaluates every (p, IBO, algorithm) point of `spec`. Optimized
/// ensembles that do not depend on the amplifier are computed once.
pub fn evaluate_grid(spec: &ExperimentSpec, algorithms: &[Algorithm]) -> Result<Vec<GridResult>> {
    spec.validate()?;
    let modem = Modem::new(spec.system.clone());
    let mut cache: HashMap<CacheKey, Arc<OptimizedEnsemble>> = HashMap::new();
    let mut out = Vec::new();
    for &p in &spec.p_values {
        for &ibo in &spec.ibo_grid_db {
            let pa = PaModel::from_p(p, v_sat_for_ibo(&spec.system, ibo))?;
            for &alg in algorithms {
                let settings = spec.settings.with_algorithm(alg);
                let key = cache_key(&settings, &pa);
                let ens = match cache.get(&key) {
                    Some(e) => Arc::clone(e),
                    None => {
                        let e = Arc::new(optimize_ensemble(
                            &modem,
                            &pa,
                            &settings,
                            spec.n_symbols,
                            spec.seed,
                        )?);
                        cache.insert(key, Arc::clone(&e));
                        e
                    }
                };
                out.push(GridResult {
                    p_true: p,
                    ibo_db: ibo,
                    metrics: evaluate_ensemble(&modem, &pa, &ens, &settings)?,
                });
            }
        }
    }
    Ok(out)
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub csv: PathBuf,
    pub script: PathBuf,
    pub rows: usize,
    pub results: Vec<GridResult>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn p_model_cell(spec: &ExperimentSpec, r: &GridResult) -> String {
    match r.metrics.algorithm {
        Algorithm::AcTr => num(spec.settings.p_model(r.p_true)),
        Algorithm::NccTr => num(f64::INFINITY),
        Algorithm::Reference | Algorithm::PaprTr => String::new(),
    }
}

fn metric_rows(spec: &ExperimentSpec, r: &GridResult, anchor_db: f64) -> Result<Vec<Vec<String>>> {
    let m = &r.metrics;
    Ok(match spec.kind {
        ExperimentKind::LambdaVsIbo => vec![vec![
            num(m.lambda_emp),
            num(lambda_analytic(r.p_true, r.ibo_db)?),
            num(m.sdr_db),
        ]],
        ExperimentKind::SdrVsIbo | ExperimentKind::SdrVsP => {
            vec![vec![num(m.sdr_db), num(m.lambda_emp)]]
        }
        ExperimentKind::Psd => m
            .psd_total
            .iter()
            .zip(&m.psd_distortion)
            .map(|((f, t), (_, d))| vec![num(*f), num(t - anchor_db), num(d - anchor_db)])
            .collect(),
        ExperimentKind::PaprCcdf => m.ccdf.iter().map(|(g, p)| vec![num(*g), num(*p)]).collect(),
        ExperimentKind::ItersOps => {
            let ratio = if m.mean_ops_formula > 0.0 {
                m.mean_ops / m.mean_ops_formula
            } else {
                f64::NAN
            };
            vec![vec![num(m.converged_fraction), num(ratio)]]
        }
    })
}

/// Runs the experiment and writes `<name>.csv` and `plot_<name>.py` into
/// the output directory. Identical specs give byte-identical files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    // The PSD anchor needs the reference run even when it is not requested.
    let mut algorithms = spec.algorithms.clone();
    let needs_anchor =
        spec.kind == ExperimentKind::Psd && !algorithms.contains(&Algorithm::Reference);
    if needs_anchor {
        algorithms.insert(0, Algorithm::Reference);
    }
    let results = evaluate_grid(spec, &algorithms)?;
    let band_edge = occupied_band_edge(&spec.system);
    let anchors: HashMap<(u64, u64), f64> = results
        .iter()
        .filter(|r| r.metrics.algorithm == Algorithm::Reference)
        .map(|r| {
            (
                (r.p_true.to_bits(), r.ibo_db.to_bits()),
                in_band_mean_db(&r.metrics.psd_total, band_edge),
            )
        })
        .collect();
    let results: Vec<GridResult> = results
        .into_iter()
        .filter(|r| spec.algorithms.contains(&r.metrics.algorithm))
        .collect();

    fs::create_dir_all(&spec.output_dir)?;
    let csv_path = spec.csv_path();
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec![
        "algorithm",
        "p_true",
        "p_model",
        "ref_ibo_db",
        "n_symbols",
        "seed",
    ];
    header.extend_from_slice(spec.kind.metric_columns());
    header.extend_from_slice(&["mean_iters", "mean_ops_counted", "mean_ops_formula"]);
    w.write_record(&header)?;
    let mut rows = 0;
    for r in &results {
        let anchor = anchors
            .get(&(r.p_true.to_bits(), r.ibo_db.to_bits()))
            .copied()
            .unwrap_or(0.0);
        let m = &r.metrics;
        for metrics in metric_rows(spec, r, anchor)? {
            let mut row = vec![
                m.algorithm.name().to_string(),
                num(r.p_true),
                p_model_cell(spec, r),
                num(r.ibo_db),
                spec.n_symbols.to_string(),
                spec.seed.to_string(),
            ];
            row.extend(metrics);
            row.extend([num(m.mean_iters), num(m.mean_ops), num(m.mean_ops_formula)]);
            w.write_record(&row)?;
            rows += 1;
        }
    }
    w.flush()?;

    let script = spec.script_path();
    fs::write(&script, plot_script(spec.kind, &csv_path))?;
    Ok(ExperimentOutput {
        csv: csv_path,
        script,
        rows,
        results,
    })
}

struct PlotLayout {
    x: &'static str,
    panels: &'static [&'static str],
    /// Extra grouping column besides algorithm and p.
    split_ibo: bool,
    logy: bool,
}

fn layout(kind: ExperimentKind) -> PlotLayout {
    match kind {
        ExperimentKind::LambdaVsIbo => PlotLayout {
            x: "ref_ibo_db",
            panels: &["lambda_emp"],
            split_ibo: false,
            logy: false,
        },
        ExperimentKind::Psd => PlotLayout {
            x: "freq",
            panels: &["psd_total_db", "psd_distortion_db"],
            split_ibo: true,
            logy: false,
        },
        ExperimentKind::SdrVsIbo => PlotLayout {
            x: "ref_ibo_db",
            panels: &["sdr_db"],
            split_ibo: false,
            logy: false,
        },
        ExperimentKind::PaprCcdf => PlotLayout {
            x: "papr_db",
            panels: &["ccdf"],
            split_ibo: true,
            logy: true,
        },
        ExperimentKind::ItersOps => PlotLayout {
            x: "ref_ibo_db",
            panels: &["mean_iters", "mean_ops_counted"],
            split_ibo: false,
            logy: false,
        },
        ExperimentKind::SdrVsP => PlotLayout {
            x: "p_true",
            panels: &["sdr_db", "mean_ops_counted"],
            split_ibo: true,
            logy: false,
        },
    }
}

fn plot_script(kind: ExperimentKind, csv: &Path) -> String {
    let l = layout(kind);
    let csv_name = csv
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let panels = l
        .panels
        .iter()
        .map(|p| format!("\"{p}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let py_bool = |b: bool| if b { "True" } else { "False" };
    format!(
        r#"# Plots {csv_name}. Usage: python3 plot_{name}.py [output.png]
import csv
import math
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
X = "{x}"
PANELS = [{panels}]
SPLIT_IBO = {split}
LOGY = {logy}


def value(s):
    return float(s) if s else math.nan


curves = defaultdict(list)
with open(os.path.join(HERE, "{csv_name}"), newline="") as f:
    for row in csv.DictReader(f):
        label = "{{}} p={{}}".format(row["algorithm"], row["p_true"])
        if SPLIT_IBO:
            label += " IBO={{}}dB".format(row["ref_ibo_db"])
        curves[label].append(row)

fig, axes = plt.subplots(1, len(PANELS), figsize=(6 * len(PANELS), 4.5), squeeze=False)
for ax, col in zip(axes[0], PANELS):
    for label, rows in sorted(curves.items()):
        xs = [value(r[X]) for r in rows]
        ys = [value(r[col]) for r in rows]
        if X == "p_true":
            xs = [40.0 if math.isinf(v) else v for v in xs]
        ax.plot(xs, ys, marker="." if len(xs) < 50 else None, label=label)
    ax.set_xlabel(X)
    ax.set_ylabel(col)
    if LOGY:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
axes[0][0].legend(fontsize="small")
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "{name}.png")
fig.savefig(out, dpi=150)
print(out)
"#,
        name = kind.name(),
        x = l.x,
        split = py_bool(l.split_ibo),
        logy = py_bool(l.logy),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_shape() {
        let cfg = default_paper_config();
        assert_eq!(cfg.alpha() + cfg.beta(), 200);
        assert_eq!(cfg.beta(), 11);
        assert_eq!(cfg.alpha(), 189);
        assert_eq!(cfg.tr_indices(), &DEFAULT_TR_INDICES);
        assert_eq!(cfg.n_cp(), cfg.n_fft() / 8);
        assert!(cfg.n_fft() as f64 / 200.0 >= 4.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert_eq!(
            "sdr-vs-ibo".parse::<ExperimentKind>().unwrap(),
            ExperimentKind::SdrVsIbo
        );
        assert!("fig9".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(ExperimentKind::SdrVsIbo, "/tmp/x");
        assert!(spec.validate().is_ok());
        spec.n_symbols = 0;
        assert!(spec.validate().is_err());
        spec.n_symbols = 5;
        spec.p_values.clear();
        assert!(spec.validate().is_err());
        spec.p_values = vec![0.5];
        assert!(spec.validate().is_err());
        spec.p_values = vec![f64::INFINITY];
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn pa_independent_runs_share_a_cache_key() {
        let cfg = default_paper_config();
        let a = PaModel::from_p(4.0, v_sat_for_ibo(&cfg, 4.0)).unwrap();
        let b = PaModel::from_p(10.0, v_sat_for_ibo(&cfg, 8.0)).unwrap();
        let s = AlgorithmSettings::new(Algorithm::PaprTr);
        assert_eq!(cache_key(&s, &a), cache_key(&s, &b));
        let s = AlgorithmSettings::new(Algorithm::AcTr);
        assert_ne!(cache_key(&s, &a), cache_key(&s, &b));
        // p beyond the cap maps to the same AC-TR model.
        let c = PaModel::from_p(f64::INFINITY, v_sat_for_ibo(&cfg, 8.0)).unwrap();
        let d = PaModel::from_p(20.0, v_sat_for_ibo(&cfg, 8.0)).unwrap();
        assert_eq!(cache_key(&s, &c), cache_key(&s, &d));
    }

    #[test]
    fn plot_script_names_its_table() {
        let s = plot_script(ExperimentKind::PaprCcdf, Path::new("out/papr_ccdf.csv"));
        assert!(s.contains("\"papr_ccdf.csv\""));
        assert!(s.contains("LOGY = True"));
    }
}
