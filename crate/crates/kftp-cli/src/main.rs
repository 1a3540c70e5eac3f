//! Command-line frontend: preprocess traces, fit models, score
//! predictors, and run the streaming simulators.
//!
//! Exit codes: 0 success, 1 usage errors, 2 data/environment problems,
//! 3 numerical failures.

use std::fs;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kftp::eval::{evaluate, EvalOptions};
use kftp::kalman::KftpFilter;
use kftp::live::{simulate_live, LiveConfig, LiveSessionState};
use kftp::metrics::{median_runtime, write_eval_csv, EvalReport};
use kftp::mlr::{fit_trace, FeatureVector, RegressionModel};
use kftp::predictor::{build, PredictorKind, PredictorParams};
use kftp::preprocess::{
    correlation_report, estimate_noise, moving_average_filter, write_correlation_csv,
};
use kftp::synth::{rng, LinearWorld};
use kftp::trace::{load_trace, normalize, ColumnMapping, Range, ThroughputTrace};
use kftp::vod::{fmpc_select, simulate_vod, VodConfig, VodSessionState};
use kftp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kftp",
    version,
    about = "Throughput prediction and adaptive-streaming simulation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a trace and estimate measurement-noise statistics.
    Preprocess(PreprocessArgs),
    /// Lagged correlation between features and future throughput.
    Corr(CorrArgs),
    /// Fit the state-equation model on a whole trace.
    Fit(FitArgs),
    /// Score predictors on a chronological held-out split.
    Eval(EvalArgs),
    /// Stream a video session against a trace.
    Simulate(SimulateArgs),
    /// Time the core operations.
    Bench(BenchArgs),
}

/// Where input samples come from: a CSV file with a sibling
/// `<name>.schema.json` column map, or a seeded synthetic trace.
#[derive(Args)]
struct InputArgs {
    /// Trace CSV (looked up under $KFTP_DATA_DIR as a fallback).
    trace: Option<PathBuf>,
    /// Generate a synthetic trace with this many samples instead of
    /// reading a file.
    #[arg(long, value_name = "N", conflicts_with = "trace")]
    synthetic: Option<usize>,
    /// RNG seed for synthetic generation.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Synthetic throughput scale: samples span 0..SCALE Mbps.
    #[arg(long, value_name = "SCALE", default_value_t = 100.0)]
    scale_mbps: f64,
}

impl InputArgs {
    fn load(&self) -> Result<ThroughputTrace> {
        if let Some(n) = self.synthetic {
            let mut rng = rng(self.seed);
            let series = LinearWorld::default().generate(&mut rng, n);
            return Ok(series.to_trace(
                "synthetic",
                Some(Range {
                    min: 0.0,
                    max: self.scale_mbps * 1e6,
                }),
            ));
        }
        let Some(path) = &self.trace else {
            return Err(Error::InvalidConfig {
                reason: "provide a trace file or --synthetic N".into(),
            });
        };
        let path = resolve_data_path(path);
        if !path.exists() {
            // Name the trace the user asked for, not the schema we would
            // have looked up next.
            return Err(Error::FileAccess {
                path: path.display().to_string(),
                source: std::io::Error::from(std::io::ErrorKind::NotFound),
            });
        }
        let mapping = ColumnMapping::from_path(&path.with_extension("schema.json"))?;
        load_trace(&path, &mapping)
    }

    /// Stem used to name per-trace output files.
    fn stem(&self) -> String {
        self.trace
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "synthetic".into())
    }
}

/// Use the path as given; fall back to `$KFTP_DATA_DIR/<path>` when it
/// does not exist locally.
fn resolve_data_path(path: &Path) -> PathBuf {
    if !path.exists() {
        if let Ok(dir) = std::env::var("KFTP_DATA_DIR") {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

#[derive(Args)]
struct OutDir {
    /// Directory output files are written into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl OutDir {
    fn prepare(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Moving-average window, odd.
    #[arg(long, short = 'F', default_value_t = 7)]
    window: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Moving-average window, odd.
    #[arg(long, short = 'F', default_value_t = 7)]
    window: usize,
    /// Largest lead to correlate against.
    #[arg(long, default_value_t = 10)]
    max_lead: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Moving-average window, odd.
    #[arg(long, short = 'F', default_value_t = 7)]
    window: usize,
    /// Prediction horizon, samples.
    #[arg(long, short = 'L', default_value_t = 1)]
    lead: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Predictor to score, or `all` for the whole roster.
    #[arg(long, default_value = "kftp")]
    predictor: String,
    /// Moving-average window, odd.
    #[arg(long, short = 'F', default_value_t = 7)]
    window: usize,
    /// Prediction horizon, samples.
    #[arg(long, short = 'L', default_value_t = 1)]
    lead: usize,
    /// Chronological share of the trace used for fitting.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Score warm-up passthrough rows as well.
    #[arg(long)]
    include_warmup: bool,
    /// History depth of the harmonic-mean baseline.
    #[arg(long, default_value_t = 5)]
    harmonic_window: usize,
    /// Smoothing factor of the EWMA baseline, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    ewma_alpha: f64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Vod,
    Live,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Session type.
    #[arg(long, value_enum, default_value_t = Mode::Vod)]
    mode: Mode,
    /// Predictor driving the bitrate controller.
    #[arg(long, default_value = "harmonic")]
    predictor: String,
    /// Fitted model JSON, required by model-backed predictors.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Planning horizon override.
    #[arg(long)]
    lookahead: Option<usize>,
    /// VoD session length override, chunks.
    #[arg(long)]
    chunks: Option<usize>,
    /// Live session length override, segments.
    #[arg(long)]
    segments: Option<usize>,
    /// History depth of the harmonic-mean baseline.
    #[arg(long, default_value_t = 5)]
    harmonic_window: usize,
    /// Smoothing factor of the EWMA baseline, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    ewma_alpha: f64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct BenchArgs {
    /// Repetitions per operation (median is reported), at least 3.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Sample count for data-sized operations.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// RNG seed for the benchmark inputs.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Corr(args) => cmd_corr(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let trace = args.input.load()?;
    let measured = trace.throughput();
    let filtered = moving_average_filter(&measured, args.window)?;
    let noise = estimate_noise(&filtered);
    let dir = args.out.prepare()?;

    let mut w = csv::Writer::from_path(dir.join("filtered.csv"))?;
    w.write_record(["n", "measured", "true", "noise"])?;
    for i in 0..filtered.measured.len() {
        w.write_record([
            (i + 1).to_string(),
            format!("{}", filtered.measured[i]),
            format!("{}", filtered.true_throughput[i]),
            format!("{}", filtered.noise[i]),
        ])?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct NoiseOut {
        sigma2_m: f64,
        mean: f64,
        window: usize,
        n_samples: usize,
    }
    let out = NoiseOut {
        sigma2_m: noise.sigma2_m,
        mean: noise.mean,
        window: args.window,
        n_samples: filtered.measured.len(),
    };
    fs::write(dir.join("noise.json"), serde_json::to_string_pretty(&out)?)?;
    println!(
        "filtered {} samples (window {}): noise variance {:.6e}, mean {:.3e}",
        out.n_samples, args.window, noise.sigma2_m, noise.mean
    );
    Ok(())
}

fn cmd_corr(args: CorrArgs) -> Result<()> {
    if args.max_lead == 0 {
        return Err(Error::InvalidLead { lead: 0 });
    }
    let trace = args.input.load()?;
    let filtered = moving_average_filter(&trace.throughput(), args.window)?;
    let leads: Vec<usize> = (1..=args.max_lead).collect();
    let rows = correlation_report(&trace, &filtered, &leads)?;
    let dir = args.out.prepare()?;
    write_correlation_csv(&rows, File::create(dir.join("corr.csv"))?)?;

    // Surface the strongest signal per lead on stdout.
    for &lead in &leads {
        if let Some(best) = rows
            .iter()
            .filter(|r| r.lead == lead)
            .max_by(|a, b| a.rho.abs().total_cmp(&b.rho.abs()))
        {
            println!("L={:2}  strongest {}  rho {:+.4}", lead, best.feature, best.rho);
        }
    }
    println!("{} correlations written", rows.len());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let trace = args.input.load()?;
    let (normalized, params) = normalize(&trace, None)?;
    let measured = normalized.throughput();
    let filtered = moving_average_filter(&measured, args.window)?;
    let noise = estimate_noise(&filtered);
    let model = fit_trace(&normalized, &filtered, &noise, args.lead, Some(params))?;
    let dir = args.out.prepare()?;
    fs::write(dir.join("model.json"), model.to_json()?)?;
    println!(
        "model with {} coefficients at lead {}: process variance {:.4e}, measurement variance {:.4e}",
        model.coefficients.len(),
        model.lead,
        model.sigma2_p,
        model.sigma2_m
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let trace = args.input.load()?;
    let sweep = args.predictor == "all";
    let kinds: Vec<PredictorKind> = if sweep {
        PredictorKind::ALL.to_vec()
    } else {
        vec![args.predictor.parse()?]
    };
    let params = PredictorParams {
        harmonic_window: args.harmonic_window,
        ewma_alpha: args.ewma_alpha,
    };
    let dir = args.out.prepare()?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for kind in kinds {
        let opts = EvalOptions {
            predictor: kind,
            window: args.window,
            lead: args.lead,
            train_fraction: args.train_fraction,
            params,
            include_warmup: args.include_warmup,
        };
        let outcome = evaluate(&trace, &opts)?;
        let name = if sweep {
            format!("predictions-{kind}.csv")
        } else {
            "predictions.csv".into()
        };
        outcome.series.write_csv(File::create(dir.join(name))?)?;
        println!(
            "{:<12} r2 {:+.4}  mae {:.4}  ({} samples)",
            kind.to_string(),
            outcome.report.r2,
            outcome.report.mae,
            outcome.report.n_samples
        );
        reports.push(outcome.report);
    }
    write_eval_csv(&reports, File::create(dir.join("eval.csv"))?)?;
    fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&reports)?)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let trace = args.input.load()?;
    let kind: PredictorKind = args.predictor.parse()?;
    let model = match &args.model {
        Some(path) => Some(RegressionModel::from_json(&fs::read_to_string(path)?)?),
        None => None,
    };
    if kind.needs_model() && model.is_none() {
        return Err(Error::InvalidConfig {
            reason: format!("predictor '{kind}' needs --model <model.json>"),
        });
    }
    let params = PredictorParams {
        harmonic_window: args.harmonic_window,
        ewma_alpha: args.ewma_alpha,
    };
    let mut predictor = build(kind, model, &params)?;
    let dir = args.out.prepare()?;
    let stem = args.input.stem();
    let events_path = dir.join(format!("events-{stem}.csv"));

    match args.mode {
        Mode::Vod => {
            let mut cfg = VodConfig::default();
            if let Some(l) = args.lookahead {
                cfg.lookahead = l;
            }
            if let Some(c) = args.chunks {
                cfg.n_chunks = c;
            }
            if trace.len() < cfg.n_chunks {
                eprintln!(
                    "warning: trace covers {} samples; clamping the session to {} chunks",
                    trace.len(),
                    trace.len()
                );
                cfg.n_chunks = trace.len();
            }
            let outcome = simulate_vod(&trace, predictor.as_mut(), &cfg)?;
            fs::write(
                dir.join("qoe.json"),
                serde_json::to_string_pretty(&outcome.report)?,
            )?;
            let mut w = csv::Writer::from_path(&events_path)?;
            for rec in &outcome.chunks {
                w.serialize(rec)?;
            }
            w.flush()?;
            let r = &outcome.report;
            println!(
                "vod ({kind}): qoe {:.4e}  mean bitrate {:.2} Mbps  fluctuation {:.2} Mbps  stalls {:.2} s over {} chunks",
                r.qoe,
                r.bitrate_sum / r.n_chunks as f64 / 1e6,
                r.fluctuation_sum / 1e6,
                r.stall_sum,
                r.n_chunks
            );
        }
        Mode::Live => {
            let mut cfg = LiveConfig::default();
            if let Some(l) = args.lookahead {
                cfg.lookahead = l;
            }
            if let Some(s) = args.segments {
                cfg.n_segments = s;
            }
            if trace.len() < cfg.n_segments {
                eprintln!(
                    "warning: trace covers {} samples; clamping the session to {} segments",
                    trace.len(),
                    trace.len()
                );
                cfg.n_segments = trace.len();
            }
            let outcome = simulate_live(&trace, predictor.as_mut(), &cfg)?;
            fs::write(
                dir.join("qoe.json"),
                serde_json::to_string_pretty(&outcome.report)?,
            )?;
            let mut w = csv::Writer::from_path(&events_path)?;
            for rec in &outcome.segments {
                w.serialize(rec)?;
            }
            w.flush()?;
            let r = &outcome.report;
            println!(
                "live ({kind}): qoe {:.4}  quality {:.2}  stalls {:.2} s  drops {}  over {} segments",
                r.qoe, r.quality_sum, r.stall_sum, r.drop_count, r.n_segments
            );
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut rng = rng(args.seed);
    let world = LinearWorld::default();
    let series = world.generate(&mut rng, args.n);
    let trace = series.to_trace("bench", None);
    let measured = trace.throughput();

    struct Row {
        operation: &'static str,
        reps: usize,
        n: usize,
        median_seconds: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut record = |operation: &'static str, n: usize, total: std::time::Duration| {
        rows.push(Row {
            operation,
            reps: args.reps,
            n,
            median_seconds: total.as_secs_f64() / n as f64,
        });
    };

    let window = 7;
    let filtered = moving_average_filter(&measured, window)?;
    let noise = estimate_noise(&filtered);

    let d = median_runtime(args.reps, || {
        fit_trace(&trace, &filtered, &noise, 1, None).expect("fit succeeds");
    })?;
    record("fit", 1, d);

    let model = fit_trace(&trace, &filtered, &noise, 1, None)?;
    let rsrp = &series.rsrp;
    let sinr = &series.sinr;
    let d = median_runtime(args.reps, || {
        let mut filter = KftpFilter::new(model.clone()).expect("valid model");
        for i in 0..measured.len() {
            let input = FeatureVector {
                rsrp: Some(rsrp[i]),
                sinr: Some(sinr[i]),
                throughput: measured[i],
            };
            filter.step(measured[i], &input).expect("step succeeds");
        }
    })?;
    record("kalman_step", measured.len(), d);

    let d = median_runtime(args.reps, || {
        moving_average_filter(&measured, window).expect("filter succeeds");
    })?;
    record("ma_filter", measured.len(), d);

    let vod_cfg = VodConfig::default();
    let vod_state = VodSessionState {
        buffer: vod_cfg.startup_buffer,
        last_bitrate: Some(vod_cfg.bitrate_ladder[0]),
        chunk_index: 1,
    };
    let predictions = vec![60e6; vod_cfg.lookahead];
    let d = median_runtime(args.reps, || {
        fmpc_select(&vod_cfg, &vod_state, &predictions).expect("selection succeeds");
    })?;
    record("fmpc_select", 1, d);

    let live_cfg = LiveConfig::default();
    let live_state = LiveSessionState {
        buffer: 2.0,
        latency: 2.0,
        last_quality: Some(0.0),
        segment_index: 10,
        clock: 12.0,
    };
    let predictions = vec![2.5e6; live_cfg.lookahead];
    let d = median_runtime(args.reps, || {
        kftp::live::mpc_chunk_select(&live_cfg, &live_state, &predictions)
            .expect("selection succeeds");
    })?;
    record("mpc_chunk_select", 1, d);

    let dir = args.out.prepare()?;
    let mut w = csv::Writer::from_path(dir.join("bench.csv"))?;
    w.write_record(["operation", "reps", "n", "median_seconds"])?;
    for row in &rows {
        w.write_record([
            row.operation.to_string(),
            row.reps.to_string(),
            row.n.to_string(),
            format!("{}", row.median_seconds),
        ])?;
        println!(
            "{:<16} {:>12.3e} s/op  (median of {}, n = {})",
            row.operation, row.median_seconds, row.reps, row.n
        );
    }
    w.flush()?;
    Ok(())
}
