//! `tr-opt`: runs the tone-reservation experiments and the self-check suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use tropt_core::baselines::NccStep;
use tropt_core::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use tropt_core::validation;
use tropt_core::Algorithm;

#[derive(Parser, Debug)]
#[command(
    name = "tr-opt",
    version,
    about = "Amplifier-coupled tone reservation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write `<name>.csv` plus `plot_<name>.py`.
    Run(RunArgs),
    /// Run the invariant self-checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// lambda_vs_ibo, psd, sdr_vs_ibo, papr_ccdf, iters_ops or sdr_vs_p.
    experiment: String,
    /// Reference back-off grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    ibo: Option<Vec<f64>>,
    /// Amplifier smoothness values; `inf` is the soft limiter.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    symbols: Option<usize>,
    /// Any of reference, ac-tr, papr-tr, ncc-tr.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with flat `key = value` overrides; flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Keys accepted in the config file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    ibo: Option<Vec<f64>>,
    p: Option<Vec<FileP>>,
    symbols: Option<usize>,
    algorithms: Option<Vec<String>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    k_param: Option<f64>,
    stop_delta: Option<f64>,
    max_iters: Option<usize>,
    line_search: Option<bool>,
    p_model_cap: Option<f64>,
    ncc_damping: Option<f64>,
    ncc_step: Option<NccStep>,
    psd_segment_len: Option<usize>,
    psd_overlap: Option<usize>,
}

/// TOML has no infinity literal that reads naturally, so `"inf"` is accepted
/// as a string too.
#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum FileP {
    Num(f64),
    Text(String),
}

impl FileP {
    fn value(&self) -> Result<f64> {
        match self {
            FileP::Num(v) => Ok(*v),
            FileP::Text(s) => s
                .trim()
                .parse()
                .with_context(|| format!("bad p value `{s}`")),
        }
    }
}

fn load_config(path: &Path) -> Result<FileConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_algorithms(names: &[String]) -> Result<Vec<Algorithm>> {
    let mut out = Vec::new();
    for name in names {
        let a: Algorithm = name.parse()?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    if out.is_empty() {
        bail!("no algorithms selected");
    }
    Ok(out)
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let kind: ExperimentKind = args.experiment.parse()?;
    let file = match &args.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let mut spec = ExperimentSpec::new(kind, "results");

    if let Some(v) = &file.ibo {
        spec.ibo_grid_db = v.clone();
    }
    if let Some(v) = &file.p {
        spec.p_values = v.iter().map(FileP::value).collect::<Result<_>>()?;
    }
    if let Some(v) = file.symbols {
        spec.n_symbols = v;
    }
    if let Some(v) = &file.algorithms {
        spec.algorithms = parse_algorithms(v)?;
    }
    if let Some(v) = file.seed {
        spec.seed = v;
    }
    if let Some(v) = &file.out {
        spec.output_dir = v.clone();
    }
    let s = &mut spec.settings;
    if let Some(v) = file.k_param {
        s.actr.k_param = v;
    }
    if let Some(v) = file.stop_delta {
        s.actr.stop_delta = v;
    }
    if let Some(v) = file.max_iters {
        s.actr.max_iters = v;
    }
    if let Some(v) = file.line_search {
        s.actr.line_search = v;
    }
    if let Some(v) = file.p_model_cap {
        s.p_model_cap = v;
    }
    if let Some(v) = file.ncc_damping {
        s.ncc_damping = v;
    }
    if let Some(v) = file.ncc_step {
        s.ncc_step = v;
    }
    if let Some(v) = file.psd_segment_len {
        s.psd_segment_len = v;
    }
    if let Some(v) = file.psd_overlap {
        s.psd_overlap = v;
    }

    if let Some(v) = &args.ibo {
        spec.ibo_grid_db = v.clone();
    }
    if let Some(v) = &args.p {
        spec.p_values = v.clone();
    }
    if let Some(v) = args.symbols {
        spec.n_symbols = v;
    }
    if let Some(v) = &args.algorithms {
        spec.algorithms = parse_algorithms(v)?;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = &args.out {
        spec.output_dir = v.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = build_spec(args)?;
    let start = Instant::now();
    let out = run_experiment(&spec)
        .with_context(|| format!("running {} into {}", spec.kind, spec.output_dir.display()))?;
    println!(
        "{}: {} rows in {:.1} s",
        spec.kind,
        out.rows,
        start.elapsed().as_secs_f64()
    );
    for r in &out.results {
        let m = &r.metrics;
        println!(
            "  {:<9} p={:<5} ibo={:<5} sdr={:>8.2} dB  lambda={:.5}  iters={:.2}",
            m.algorithm.name(),
            r.p_true,
            r.ibo_db,
            m.sdr_db,
            m.lambda_emp,
            m.mean_iters
        );
    }
    println!("wrote {}", out.csv.display());
    println!("wrote {}", out.script.display());
    Ok(())
}

fn validate(seed: u64) -> bool {
    let checks = validation::run_all(seed);
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {:<32} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Validate { seed } => {
            if validate(seed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
