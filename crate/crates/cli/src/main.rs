mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use stable_wavelet::depmeas::{
    check_summability, eps_scan, ma_kernel_pair, DependenceReport, KernelFn, KernelPair, MovingAverageSpec,
};
use stable_wavelet::dwt::wavelet_coeffs_pyramidal;
use stable_wavelet::estimators::{estimate_h_log, estimate_h_power, ols_weights, with_plugin_variance, Method};
use stable_wavelet::harness::{
    presets, run_clt_mc, run_estimator_mc, run_multiscale_clt, selfcheck, verify_cov_bound_b, verify_lemma52,
    verify_lemma53, CltRunConfig, CovBoundConfig, EstimatorMcConfig, FunctionalSpec, Lemma52Config, Lemma53Config,
    McReport, MultiscaleConfig,
};
use stable_wavelet::io::{read_grid, read_json, read_path_csv};
use stable_wavelet::lfsm::{DirectCoefs, LfsmSpec, PathSynth, SynthesisConfig};
use stable_wavelet::stable::DiscreteKernel;
use stable_wavelet::wavelet::{build_wavelet, WaveletFamily};
use stable_wavelet::{Error, Result, RngStream};

use config::{file_section, resolve, Flags};
use output::{Format, Output};

#[derive(Parser)]
#[command(name = "stable-wavelet", version, about = "Stable dependence measures, LFSM wavelets and limit-theorem checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "STABLE_WAVELET_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON config file; a section named after the command is used if present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an LFSM path X(0..=n).
    Synth(SynthArgs),
    /// Wavelet coefficients, from the stable integral or from a path file.
    Dwt(DwtArgs),
    /// Estimate H from a coefficient grid.
    Estimate(EstimateArgs),
    /// Dependence measures of a finite pair or of a moving-average kernel.
    Depmeas(DepmeasArgs),
    /// CLT Monte Carlo for functionals of a moving average.
    Clt(CltArgs),
    /// Covariance scaling and auxiliary inequalities.
    Bounds(BoundsArgs),
    /// Estimator and multiscale CLT Monte Carlo for LFSM coefficients.
    Multiscale(MultiscaleArgs),
    /// Deterministic property suites.
    Selfcheck,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Cell width of the control-measure grid near the window (1/m).
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SynthRun {
    alpha: f64,
    hurst: f64,
    n: usize,
    step: f64,
    far_ratio: f64,
    tail_tol: f64,
    seed: u64,
}

impl Default for SynthRun {
    fn default() -> Self {
        Self {
            alpha: 1.6,
            hurst: 0.7,
            n: 1 << 14,
            step: 0.125,
            far_ratio: 1.0 / 32.0,
            tail_tol: 1e-6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum DwtMode {
    Direct,
    Pyramidal,
}

#[derive(Args)]
struct DwtArgs {
    #[arg(long, value_enum)]
    mode: Option<DwtMode>,
    /// Path CSV (pyramidal mode).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// haar | daubechies
    #[arg(long)]
    family: Option<String>,
    /// Vanishing moments Q.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    j_min: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DwtRun {
    mode: DwtMode,
    input: Option<PathBuf>,
    alpha: f64,
    hurst: f64,
    n: usize,
    family: WaveletFamily,
    q: usize,
    j_min: u32,
    j_max: u32,
    resolution: u32,
    cells_log2: u32,
    tail_tol: f64,
    seed: u64,
}

impl Default for DwtRun {
    fn default() -> Self {
        Self {
            mode: DwtMode::Direct,
            input: None,
            alpha: 1.6,
            hurst: 0.7,
            n: 1 << 14,
            family: WaveletFamily::Daubechies,
            q: 2,
            j_min: 1,
            j_max: 5,
            resolution: 10,
            cells_log2: 4,
            tail_tol: 1e-6,
            seed: 1,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Grid CSV with its JSON sidecar.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    beta: Option<f64>,
    /// α for the range check of β (defaults to the grid metadata).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    j_min: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
    /// Attach the within-path plug-in variance.
    #[arg(long)]
    plugin: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Log,
    Power,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct EstimateRun {
    input: Option<PathBuf>,
    method: Option<Method>,
    beta: Option<f64>,
    alpha: Option<f64>,
    j_min: Option<u32>,
    j_max: Option<u32>,
    plugin: bool,
}

#[derive(Args)]
struct DepmeasArgs {
    /// Kernel values f, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    f: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    g: Option<Vec<f64>>,
    /// Atom masses (default: all 1).
    #[arg(long, value_delimiter = ',')]
    mass: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Moving-average kernel `power:<p>` or `indicator:<lo>:<hi>` instead of a pair.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DepmeasRun {
    f: Vec<f64>,
    g: Vec<f64>,
    mass: Option<Vec<f64>>,
    alpha: f64,
    kernel: Option<KernelFn>,
    lags: Vec<u64>,
}

impl Default for DepmeasRun {
    fn default() -> Self {
        Self {
            f: vec![1.0, 0.4],
            g: vec![0.4, 1.0],
            mass: None,
            alpha: 1.5,
            kernel: None,
            lags: vec![1, 2, 4, 8, 16, 32, 64],
        }
    }
}

fn parse_kernel(s: &str) -> Result<KernelFn> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64> {
        parts
            .get(i)
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Error::Config(format!("kernel '{s}' is missing a numeric parameter")))
    };
    match parts[0] {
        "power" => Ok(KernelFn::PowerLaw { p: num(1)? }),
        "indicator" => Ok(KernelFn::Indicator { lo: num(1)?, hi: num(2)? }),
        other => Err(Error::Config(format!("unknown kernel '{other}' (power:<p>, indicator:<lo>:<hi>)"))),
    }
}

#[derive(Args)]
struct CltArgs {
    /// iid-bounded | thm61
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    lag_cap: Option<usize>,
    /// log2abs | abspow:<β> | clip:<c> | indicator:<lo>:<hi>
    #[arg(long)]
    functional: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    /// thm22-default | lemma52-default | lemma53-default
    #[arg(long, default_value = "thm22-default")]
    preset: String,
    /// Monte Carlo draws (covariance scaling).
    #[arg(long)]
    mc: Option<usize>,
    /// Truncation levels b, comma separated.
    #[arg(long, value_delimiter = ',')]
    bs: Option<Vec<f64>>,
    /// Draws per α (inequalities).
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct MultiscaleArgs {
    /// multiscale-default | estimator-default
    #[arg(long, default_value = "multiscale-default")]
    preset: String,
    #[arg(long)]
    replicates: Option<usize>,
    /// Path length (multiscale).
    #[arg(long)]
    n: Option<usize>,
    /// Sample sizes (estimator).
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    primary_n: Option<usize>,
}

/// Exit classes.
const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Data(_) | Error::Diagnostics(_) => EXIT_DATA,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    let out = Output::new(&g.out, g.format)?;
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Dwt(_) => "dwt",
        Command::Estimate(_) => "estimate",
        Command::Depmeas(_) => "depmeas",
        Command::Clt(_) => "clt",
        Command::Bounds(_) => "bounds",
        Command::Multiscale(_) => "multiscale",
        Command::Selfcheck => "selfcheck",
    };
    let file = g.config.as_deref().map(|p| file_section(p, name)).transpose()?;
    let file = file.as_ref();
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, g, file, &out),
        Command::Dwt(a) => cmd_dwt(a, g, file, &out),
        Command::Estimate(a) => cmd_estimate(a, file, &out),
        Command::Depmeas(a) => cmd_depmeas(a, file, &out),
        Command::Clt(a) => cmd_clt(a, g, file, &out),
        Command::Bounds(a) => cmd_bounds(a, g, file, &out),
        Command::Multiscale(a) => cmd_multiscale(a, g, file, &out),
        Command::Selfcheck => {
            let seed = g.seed.unwrap_or(1);
            let report = selfcheck::run_selfcheck(seed)?;
            finish_report(&report, "selfcheck", &out, g.verbose)
        }
    }
}

fn cmd_synth(a: &SynthArgs, g: &Global, file: Option<&Value>, out: &Output) -> Result<u8> {
    let mut flags = Flags::default();
    flags
        .set("alpha", a.alpha)
        .set("hurst", a.hurst)
        .set("n", a.n)
        .set("step", a.step)
        .set("seed", g.seed);
    let run: SynthRun = resolve(&SynthRun::default(), file, flags)?;
    let lfsm = LfsmSpec::new(run.alpha, run.hurst)?;
    let mut cfg = SynthesisConfig::new(run.n, 1, 1, RngStream::new(run.seed, 0));
    cfg.step = run.step;
    cfg.far_ratio = run.far_ratio;
    cfg.tail_tol = run.tail_tol;
    let synth = PathSynth::new(&lfsm, &cfg)?;
    let path = synth.generate(cfg.stream)?;
    let extra = json!({
        "far_cells": synth.far_cell_count(),
        "left_horizon": synth.left_horizon(),
        "kappa": lfsm.kappa(),
    });
    out.path("path", &path, "synth", run.seed, &run, extra)?;
    Ok(0)
}

fn cmd_dwt(a: &DwtArgs, g: &Global, file: Option<&Value>, out: &Output) -> Result<u8> {
    let family = a.family.as_deref().map(str::parse::<WaveletFamily>).transpose()?;
    let mut flags = Flags::default();
    flags
        .set("mode", a.mode)
        .set("input", a.input.clone())
        .set("alpha", a.alpha)
        .set("hurst", a.hurst)
        .set("n", a.n)
        .set("family", family)
        .set("q", a.q)
        .set("j_min", a.j_min)
        .set("j_max", a.j_max)
        .set("seed", g.seed);
    let run: DwtRun = resolve(&DwtRun::default(), file, flags)?;
    let w = build_wavelet(run.family, run.q, run.resolution)?;
    let grid = match run.mode {
        DwtMode::Direct => {
            let lfsm = LfsmSpec::new(run.alpha, run.hurst)?;
            let mut cfg = SynthesisConfig::new(run.n, run.j_min, run.j_max, RngStream::new(run.seed, 0));
            cfg.cells_log2 = run.cells_log2;
            cfg.tail_tol = run.tail_tol;
            DirectCoefs::new(&lfsm, &w, &cfg)?.generate(cfg.stream)?
        }
        DwtMode::Pyramidal => {
            let input = run
                .input
                .as_ref()
                .ok_or_else(|| Error::Config("pyramidal mode needs --input <path.csv>".into()))?;
            if !input.exists() {
                return Err(Error::Config(format!("input file {} not found", input.display())));
            }
            let path = read_path_csv(input)?;
            let mut grid = wavelet_coeffs_pyramidal(&path, &w, run.j_min, run.j_max)?;
            let side = input.with_extension("json");
            if side.exists() {
                let v: Value = read_json(&side)?;
                grid.meta.alpha = grid.meta.alpha.or(v["config"]["alpha"].as_f64());
                grid.meta.hurst = grid.meta.hurst.or(v["config"]["hurst"].as_f64());
            }
            grid
        }
    };
    out.grid("grid", &grid, "dwt", run.seed, &run)?;
    Ok(0)
}

fn cmd_estimate(a: &EstimateArgs, file: Option<&Value>, out: &Output) -> Result<u8> {
    let mut flags = Flags::default();
    flags
        .set("input", a.input.clone())
        .set(
            "method",
            a.method.map(|m| match m {
                MethodArg::Log => Method::Log,
                MethodArg::Power => Method::Power,
            }),
        )
        .set("beta", a.beta)
        .set("alpha", a.alpha)
        .set("j_min", a.j_min)
        .set("j_max", a.j_max)
        .set("plugin", a.plugin.then_some(true));
    let run: EstimateRun = resolve(&EstimateRun::default(), file, flags)?;
    let method = run.method.unwrap_or(Method::Log);
    if method == Method::Power {
        let beta = run.beta.ok_or_else(|| Error::Config("the power method needs --beta".into()))?;
        if let Some(alpha) = run.alpha {
            stable_wavelet::estimators::check_beta(beta, alpha)?;
        }
    }
    let input = run
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("estimate needs --input <grid.csv>".into()))?;
    if !input.exists() {
        return Err(Error::Config(format!("input file {} not found", input.display())));
    }
    let grid = read_grid(input)?;
    let js = grid.js();
    let j_min = run.j_min.unwrap_or(js[0]);
    let j_max = run.j_max.unwrap_or(*js.last().expect("non-empty grid"));
    let w = ols_weights(j_min, j_max, None)?;
    let mut est = match method {
        Method::Log => estimate_h_log(&grid, &w)?,
        Method::Power => estimate_h_power(&grid, &w, run.beta.expect("checked"), run.alpha)?,
    };
    if run.plugin {
        est = with_plugin_variance(est, std::slice::from_ref(&grid), &w, None)?;
    }
    for wn in &est.warnings {
        eprintln!("warning: {wn}");
    }
    println!("H_hat = {:.6}", est.h_hat);
    out.estimate("estimate", &est, &run)?;
    Ok(0)
}

fn cmd_depmeas(a: &DepmeasArgs, file: Option<&Value>, out: &Output) -> Result<u8> {
    let kernel = a.kernel.as_deref().map(parse_kernel).transpose()?;
    let mut flags = Flags::default();
    flags
        .set("f", a.f.clone())
        .set("g", a.g.clone())
        .set("mass", a.mass.clone())
        .set("alpha", a.alpha)
        .set("kernel", kernel)
        .set("lags", a.lags.clone());
    let run: DepmeasRun = resolve(&DepmeasRun::default(), file, flags)?;
    let result = match run.kernel {
        Some(k) => {
            let spec = MovingAverageSpec::new(k, run.alpha)?;
            let summability = check_summability(&spec, 256)?;
            let scan = eps_scan(&spec, &run.lags, &[], 0.05)?;
            let reports: Vec<DependenceReport> = run
                .lags
                .iter()
                .map(|&n| DependenceReport::compute(&ma_kernel_pair(&spec, n)?))
                .collect::<Result<_>>()?;
            println!("summability holds: {}", summability.all_hold);
            json!({ "spec": spec, "summability": summability, "eps_scan": scan, "lags": run.lags, "reports": reports })
        }
        None => {
            let mass = run.mass.clone().unwrap_or_else(|| vec![1.0; run.f.len()]);
            let pair = KernelPair::new(
                DiscreteKernel::new(mass.clone(), run.f.clone())?,
                DiscreteKernel::new(mass, run.g.clone())?,
                run.alpha,
            )?;
            let r = DependenceReport::compute(&pair)?;
            println!(
                "m1 = {:.6e}  m2 = {:.6e}  codifference = {:.6e}  eps1 = {:.4}  eps2 = {:.4}",
                r.m1, r.m2, r.codifference, r.eps1, r.eps2
            );
            serde_json::to_value(r).expect("serializable report")
        }
    };
    out.json("depmeas", "depmeas", None, &run, result)?;
    Ok(0)
}

fn seed_or(g: &Global) -> u64 {
    g.seed.unwrap_or(1)
}

fn cmd_clt(a: &CltArgs, g: &Global, file: Option<&Value>, out: &Output) -> Result<u8> {
    let preset = a
        .preset
        .clone()
        .or_else(|| file.and_then(|f| f.get("preset")).and_then(|v| v.as_str().map(String::from)))
        .unwrap_or_else(|| "iid-bounded".into());
    let defaults = presets::clt_preset(&preset, seed_or(g))?;
    let functional = a.functional.as_deref().map(str::parse::<FunctionalSpec>).transpose()?;
    let mut flags = Flags::default();
    flags
        .set("replicates", a.replicates)
        .set("n_values", a.n_values.clone())
        .set("lag_cap", a.lag_cap)
        .set("functional", functional)
        .set("seed", g.seed);
    let file = file.map(|f| without(f, "preset"));
    let cfg: CltRunConfig = resolve(&defaults, file.as_ref(), flags)?;
    let report = run_clt_mc(&cfg)?;
    finish_report(&report, "clt", out, g.verbose)
}

fn without(v: &Value, key: &str) -> Value {
    let mut v = v.clone();
    if let Value::Object(m) = &mut v {
        m.remove(key);
    }
    v
}

fn cmd_bounds(a: &BoundsArgs, g: &Global, file: Option<&Value>, out: &Output) -> Result<u8> {
    let seed = seed_or(g);
    let report = match a.preset.as_str() {
        "thm22-default" => {
            let mut flags = Flags::default();
            flags.set("mc", a.mc).set("bs", a.bs.clone()).set("seed", g.seed);
            let cfg: CovBoundConfig = resolve(&presets::thm22_default(seed), file, flags)?;
            verify_cov_bound_b(&cfg)?
        }
        "lemma52-default" => {
            let mut flags = Flags::default();
            flags.set("bs", a.bs.clone());
            let cfg: Lemma52Config = resolve(&presets::lemma52_default(), file, flags)?;
            verify_lemma52(&cfg)?
        }
        "lemma53-default" => {
            let mut flags = Flags::default();
            flags.set("samples", a.samples).set("seed", g.seed);
            let cfg: Lemma53Config = resolve(&presets::lemma53_default(seed), file, flags)?;
            verify_lemma53(&cfg)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown bounds preset '{other}' (known: {})",
                presets::BOUNDS_PRESETS.join(", ")
            )))
        }
    };
    finish_report(&report, "bounds", out, g.verbose)
}

fn cmd_multiscale(a: &MultiscaleArgs, g: &Global, file: Option<&Value>, out: &Output) -> Result<u8> {
    let seed = seed_or(g);
    let report = match a.preset.as_str() {
        "multiscale-default" => {
            let mut flags = Flags::default();
            flags.set("replicates", a.replicates).set("n", a.n).set("seed", g.seed);
            let cfg: MultiscaleConfig = resolve(&presets::multiscale_default(seed), file, flags)?;
            run_multiscale_clt(&cfg)?
        }
        "estimator-default" => {
            let mut flags = Flags::default();
            flags
                .set("replicates", a.replicates)
                .set("n_values", a.n_values.clone())
                .set("primary_n", a.primary_n)
                .set("seed", g.seed);
            let cfg: EstimatorMcConfig = resolve(&presets::estimator_default(seed), file, flags)?;
            run_estimator_mc(&cfg)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown multiscale preset '{other}' (known: multiscale-default, estimator-default)"
            )))
        }
    };
    finish_report(&report, "multiscale", out, g.verbose)
}

/// Writes the report and maps it to an exit status: 0 all verdicts pass,
/// 1 a verdict fails, 2 the configuration does not meet the hypotheses.
fn finish_report(report: &McReport, name: &str, out: &Output, verbose: bool) -> Result<u8> {
    for b in &report.banners {
        eprintln!("{b}");
    }
    for line in report.summary_lines() {
        println!("{line}");
    }
    if verbose {
        println!("runtime {:.2}s", report.runtime_secs);
    }
    out.report(name, report)?;
    Ok(if !report.hypothesis_met {
        EXIT_CONFIG
    } else if report.passed() {
        0
    } else {
        EXIT_VERDICT
    })
}
