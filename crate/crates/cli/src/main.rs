// SPDX-License-Identifier: MIT OR Apache-2.0

//! `inspect` command-line tool: changepoint detection for high-dimensional
//! series via sparse projection of the CUSUM transformation, plus threshold
//! calibration, data simulation and evaluation metrics.
//!
//! Exit codes: 0 success (including zero detections), 2 usage error,
//! 3 I/O or parse error, 4 solver failure.

#![forbid(unsafe_code)]

mod io;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use inspect_core as core;
use inspect_core::{
    InspectConfig, NoiseModel, Overlap, SolveMethod,
    SolverConfig,
};

use io::{Report, ReportChangepoint, ReportConfig, ReportNoise, ReportTimings, TruthSidecar};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<core::Error> for CliError {
    fn from(e: core::Error) -> Self {
        match e {
            core::Error::InvalidInput(m) => CliError::Data(m),
            core::Error::ThresholdTooLarge => CliError::Data(e.to_string()),
            core::Error::Solver(m) => CliError::Solver(m),
            core::Error::CombinatorialGuard(m) => CliError::Usage(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "inspect", version, about = "High-dimensional changepoint detection by sparse projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonDetectArgs {
    /// Regularisation level; defaults to sqrt(log(p log n) / 2) on
    /// normalised data.
    #[arg(long)]
    lambda: Option<f64>,
    /// Solver for the projection direction.
    #[arg(long, default_value = "soft", value_parser = parse_method)]
    method: SolveMethod,
    /// Seed for interval draws and threshold calibration.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Thread budget for the parallel interval map (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn parse_method(s: &str) -> Result<SolveMethod, String> {
    match s {
        "soft" => Ok(SolveMethod::Soft),
        "admm" => Ok(SolveMethod::Admm),
        _ => Err(format!("unknown method {s:?}; expected 'soft' or 'admm'")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect changepoints in a CSV matrix (rows = coordinates, columns =
    /// time unless --transpose).
    Detect {
        input: PathBuf,
        /// Input stores one time point per row rather than per column.
        #[arg(long)]
        transpose: bool,
        /// Skip the first line.
        #[arg(long)]
        header: bool,
        #[arg(long, default_value = ",", value_parser = parse_delims)]
        delimiter: char,
        /// Detection threshold; defaults to Monte Carlo calibration under
        /// the standard Gaussian null.
        #[arg(long)]
        xi: Option<f64>,
        /// Null replicates for threshold calibration.
        #[arg(long, default_value_t = 1000)]
        nulls: usize,
        /// Burn-off fraction for interval filtering.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Number of random intervals.
        #[arg(long = "Q", default_value_t = 1000)]
        q: usize,
        /// Single-changepoint mode (full-data estimator), no segmentation.
        #[arg(long, conflicts_with = "split")]
        single: bool,
        /// Single-changepoint mode with sample splitting.
        #[arg(long)]
        split: bool,
        /// Directory for plot-ready CSVs: per-changepoint projected CUSUM
        /// curves and the candidate-score table.
        #[arg(long)]
        emit_curves: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: CommonDetectArgs,
    },
    /// Calibrate the detection threshold for given dimensions.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1000)]
        nulls: usize,
        /// Write a JSON config fragment here as well as printing xi.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: CommonDetectArgs,
    },
    /// Simulate data from the piecewise-mean model and write CSV plus a
    /// ground-truth sidecar.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        /// Coordinates touched by each change.
        #[arg(long)]
        k: usize,
        /// Changepoint locations, comma separated.
        #[arg(long, value_delimiter = ',')]
        z: Vec<usize>,
        /// Change magnitudes, comma separated (one per changepoint).
        #[arg(long, value_delimiter = ',')]
        vartheta: Vec<f64>,
        /// Support layout for multiple changepoints.
        #[arg(long, default_value = "half", value_parser = parse_overlap)]
        overlap: Overlap,
        /// Noise model.
        #[arg(long, default_value = "gaussian")]
        noise: String,
        /// Dependence parameter for cs-local/cs-global/temporal noise.
        #[arg(long)]
        rho: Option<f64>,
        /// Shift radius for async noise.
        #[arg(long)]
        shift_radius: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ",", value_parser = parse_delims)]
        delimiter: char,
        /// Output CSV path; the sidecar is written to <out>.truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a truth changepoint list against an estimate.
    Metrics { truth: PathBuf, estimate: PathBuf },
}

fn parse_delims(s: &str) -> Result<char, String> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err("delimiter must be a single character".into()),
    }
}

fn parse_overlap(s: &str) -> Result<Overlap, String> {
    match s {
        "complete" => Ok(Overlap::Complete),
        "half" => Ok(Overlap::Half),
        "none" => Ok(Overlap::Disjoint),
        _ => Err(format!("unknown overlap {s:?}; expected complete, half or none")),
    }
}

fn method_name(m: SolveMethod) -> &'static str {
    match m {
        SolveMethod::Soft => "soft",
        SolveMethod::Admm => "admm",
    }
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

#[allow(clippy::too_many_arguments)]
fn cmd_detect(
    input: PathBuf,
    transpose: bool,
    header: bool,
    delimiter: char,
    xi: Option<f64>,
    nulls: usize,
    beta: f64,
    q: usize,
    single: bool,
    split: bool,
    emit_curves: Option<PathBuf>,
    output: Option<PathBuf>,
    common: CommonDetectArgs,
) -> Result<(), CliError> {
    init_threads(common.threads)?;
    let total = Instant::now();
    let mut timings = ReportTimings::default();
    let mut warnings = Vec::new();

    let t0 = Instant::now();
    let x = io::read_matrix(&input, delimiter, header, transpose)?;
    timings.read_ms = ms(t0);

    let t0 = Instant::now();
    let prof = core::estimate_noise_mad(&x)?;
    let (xn, constant_rows) = core::normalize(&x, &prof)?;
    if !constant_rows.is_empty() {
        warnings.push(format!(
            "{} coordinate(s) have zero estimated noise scale and were left unscaled: {:?}",
            constant_rows.len(),
            constant_rows
        ));
    }
    timings.normalize_ms = ms(t0);

    let (p, n) = (xn.p(), xn.n());
    let lambda = common.lambda.unwrap_or_else(|| core::default_lambda(p, n));
    let solver = SolverConfig { lambda: Some(lambda), ..SolverConfig::default() };
    let mode = if single {
        "single"
    } else if split {
        "split"
    } else {
        "wbs"
    };

    let mut report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.to_string(),
        n,
        p,
        changepoints: Vec::new(),
        config: ReportConfig {
            lambda,
            xi: None,
            beta,
            q,
            seed: common.seed,
            method: method_name(common.method).to_string(),
            nulls,
            threads: common.threads,
        },
        noise: ReportNoise { sigma_hat: prof.sigma_hat.clone(), constant_rows },
        warnings: Vec::new(),
        timings: ReportTimings::default(),
    };
    let mut curves: Vec<(usize, usize, Vec<f64>)> = Vec::new(); // (location, interval start, series)
    let mut score_rows: Vec<(usize, f64, bool, (usize, usize), (usize, usize))> = Vec::new();

    if single || split {
        let t0 = Instant::now();
        let det = if single {
            core::inspect_single(&xn, &solver, common.method)
        } else {
            core::inspect_single_split(&xn, &solver, common.method)
        };
        timings.detect_ms = ms(t0);
        match det {
            Ok(d) => {
                report.changepoints.push(ReportChangepoint {
                    location: d.z_hat,
                    score: d.t_max,
                    interval: [0, n],
                });
                score_rows.push((d.z_hat, d.t_max, true, (0, n), (0, n)));
                curves.push((d.z_hat, 0, d.projected_cusum));
            }
            Err(core::Error::ThresholdTooLarge) => {
                warnings.push(format!(
                    "soft threshold lambda={lambda} removed every entry; treating as no detectable change"
                ));
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        let cfg = InspectConfig {
            lambda: Some(lambda),
            xi,
            beta,
            q,
            seed: common.seed,
            method: common.method,
            solver: solver.clone(),
            calibration_nulls: nulls,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let t0 = Instant::now();
        let resolved_xi = match xi {
            Some(v) => v,
            None => core::calibrate_threshold(n, p, &cfg, nulls, common.seed)?,
        };
        timings.calibrate_ms = ms(t0);
        let mut cfg = cfg;
        cfg.xi = Some(resolved_xi);
        let t0 = Instant::now();
        let det = core::inspect_wbs(&xn, &cfg)?;
        timings.detect_ms = ms(t0);
        report.config.xi = Some(resolved_xi);
        for i in 0..det.changepoints.len() {
            report.changepoints.push(ReportChangepoint {
                location: det.changepoints[i],
                score: det.scores[i],
                interval: [det.intervals[i].0, det.intervals[i].1],
            });
            curves.push((det.changepoints[i], det.intervals[i].0, det.curves[i].clone()));
        }
        for rec in &det.trace {
            score_rows.push((rec.location, rec.score, rec.accepted, rec.segment, rec.interval));
        }
    }

    report.warnings = warnings;
    timings.total_ms = ms(total);
    report.timings = timings;

    if let Some(dir) = emit_curves {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        for (location, start, series) in &curves {
            let mut text = String::from("t,projected_cusum\n");
            for (i, v) in series.iter().enumerate() {
                let t_abs = match mode {
                    "split" => 2 * (i + 1), // even-column half-series
                    _ => start + i + 1,
                };
                text.push_str(&format!("{t_abs},{v}\n"));
            }
            io::write_text(&dir.join(format!("curve_cp{location}.csv")), &text)?;
        }
        let mut text =
            String::from("location,score,xi,accepted,segment_start,segment_end,interval_start,interval_end\n");
        let xi_str = report
            .config
            .xi
            .map(|v| format!("{v}"))
            .unwrap_or_else(|| "".to_string());
        for (location, score, accepted, segment, interval) in &score_rows {
            text.push_str(&format!(
                "{location},{score},{xi_str},{accepted},{},{},{},{}\n",
                segment.0, segment.1, interval.0, interval.1
            ));
        }
        io::write_text(&dir.join("candidate_scores.csv"), &text)?;
    }

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Data(format!("serialisation: {e}")))?;
    match output {
        Some(path) => io::write_text(&path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_calibrate(
    n: usize,
    p: usize,
    nulls: usize,
    output: Option<PathBuf>,
    common: CommonDetectArgs,
) -> Result<(), CliError> {
    init_threads(common.threads)?;
    if n < 2 || p < 1 {
        return Err(CliError::Usage(format!("need n >= 2 and p >= 1, got n={n}, p={p}")));
    }
    let cfg = InspectConfig {
        lambda: common.lambda,
        method: common.method,
        ..InspectConfig::default()
    };
    let xi = core::calibrate_threshold(n, p, &cfg, nulls, common.seed)?;
    println!("{xi}");
    if let Some(path) = output {
        let lambda = common.lambda.unwrap_or_else(|| core::default_lambda(p, n));
        let doc = serde_json::json!({
            "n": n,
            "p": p,
            "nulls": nulls,
            "seed": common.seed,
            "method": method_name(common.method),
            "lambda": lambda,
            "xi": xi,
        });
        io::write_text(&path, &serde_json::to_string_pretty(&doc).unwrap())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    n: usize,
    p: usize,
    k: usize,
    z: Vec<usize>,
    vartheta: Vec<f64>,
    overlap: Overlap,
    noise: String,
    rho: Option<f64>,
    shift_radius: Option<usize>,
    sigma2: f64,
    seed: u64,
    delimiter: char,
    out: PathBuf,
) -> Result<(), CliError> {
    if z.is_empty() {
        return Err(CliError::Usage("need at least one changepoint (--z)".into()));
    }
    if vartheta.len() != z.len() {
        return Err(CliError::Usage(format!(
            "{} magnitudes for {} changepoints; pass one --vartheta per --z",
            vartheta.len(),
            z.len()
        )));
    }
    let need_rho = matches!(noise.as_str(), "cs-local" | "cs-global" | "temporal");
    if need_rho && rho.is_none() {
        return Err(CliError::Usage(format!("noise model {noise:?} requires --rho")));
    }
    let model = match noise.as_str() {
        "gaussian" => NoiseModel::Gaussian { sigma2 },
        "unif" => NoiseModel::Uniform { sigma2 },
        "exp" => NoiseModel::CenteredExponential { sigma2 },
        "cs-local" => NoiseModel::CrossSectionalLocal { rho: rho.unwrap(), sigma2 },
        "cs-global" => NoiseModel::CrossSectionalGlobal { rho: rho.unwrap(), sigma2 },
        "temporal" => NoiseModel::TemporalAr { rho: rho.unwrap(), sigma2 },
        "async" => NoiseModel::AsyncShift {
            radius: shift_radius
                .ok_or_else(|| CliError::Usage("async noise requires --shift-radius".into()))?,
            sigma2,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown noise model {other:?}; expected gaussian, unif, exp, cs-local, cs-global, temporal or async"
            )))
        }
    };
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = if z.len() == 1 {
        core::standard_signal(n, p, k, z[0], vartheta[0])
    } else {
        core::overlap_signal(n, p, k, &z, &vartheta, overlap)
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let sim = core::generate(&spec, &model, seed)?;
    if sim.clamped_shifts > 0 {
        eprintln!(
            "warning: {} asynchronous shift draw(s) clamped into [1, n-1]",
            sim.clamped_shifts
        );
    }
    io::write_matrix(&out, sim.x.values(), delimiter)?;
    let sidecar = TruthSidecar {
        n,
        p,
        changepoints: z.clone(),
        k,
        varthetas: vartheta,
        overlap: if z.len() > 1 {
            Some(
                match overlap {
                    Overlap::Complete => "complete",
                    Overlap::Half => "half",
                    Overlap::Disjoint => "none",
                }
                .to_string(),
            )
        } else {
            None
        },
        noise,
        sigma2,
        rho,
        shift_radius,
        seed,
    };
    let mut sidecar_path = out.into_os_string();
    sidecar_path.push(".truth.json");
    io::write_text(
        &PathBuf::from(sidecar_path),
        &serde_json::to_string_pretty(&sidecar).unwrap(),
    )?;
    Ok(())
}

fn cmd_metrics(truth: PathBuf, estimate: PathBuf) -> Result<(), CliError> {
    let t = io::read_changepoint_list(&truth)?;
    let e = io::read_changepoint_list(&estimate)?;
    if t.n != e.n {
        return Err(CliError::Data(format!(
            "changepoint lists disagree on n: {} vs {}",
            t.n, e.n
        )));
    }
    let mut warnings: Vec<String> = Vec::new();
    let (hausdorff, wasserstein) = if t.changepoints.is_empty() || e.changepoints.is_empty() {
        warnings.push("empty changepoint set: hausdorff and wasserstein1 are undefined".into());
        (None, None)
    } else {
        let ta: Vec<f64> = t.changepoints.iter().map(|z| *z as f64).collect();
        let ea: Vec<f64> = e.changepoints.iter().map(|z| *z as f64).collect();
        let h = core::hausdorff(&ta, &ea)?;
        let wp: Vec<(f64, f64)> = ta.iter().map(|z| (*z, 1.0 / ta.len() as f64)).collect();
        let wq: Vec<(f64, f64)> = ea.iter().map(|z| (*z, 1.0 / ea.len() as f64)).collect();
        (Some(h), Some(core::wasserstein1(&wp, &wq)?))
    };
    let s1 = core::Segmentation::new(t.n, t.changepoints)?;
    let s2 = core::Segmentation::new(e.n, e.changepoints)?;
    let ari = core::adjusted_rand_index(&s1, &s2)?;
    let doc = serde_json::json!({
        "n": t.n,
        "hausdorff": hausdorff,
        "wasserstein1": wasserstein,
        "ari": ari,
        "warnings": warnings,
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Detect {
            input,
            transpose,
            header,
            delimiter,
            xi,
            nulls,
            beta,
            q,
            single,
            split,
            emit_curves,
            output,
            common,
        } => cmd_detect(
            input,
            transpose,
            header,
            delimiter,
            xi,
            nulls,
            beta,
            q,
            single,
            split,
            emit_curves,
            output,
            common,
        ),
        Command::Calibrate { n, p, nulls, output, common } => {
            cmd_calibrate(n, p, nulls, output, common)
        }
        Command::Simulate {
            n,
            p,
            k,
            z,
            vartheta,
            overlap,
            noise,
            rho,
            shift_radius,
            sigma2,
            seed,
            delimiter,
            out,
        } => cmd_simulate(
            n,
            p,
            k,
            z,
            vartheta,
            overlap,
            noise,
            rho,
            shift_radius,
            sigma2,
            seed,
            delimiter,
            out,
        ),
        Command::Metrics { truth, estimate } => cmd_metrics(truth, estimate),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
