//! Command-line front end.
//!
//! Four subcommands cover the calibration workflow end to end:
//!
//! * `simulate` — run a configured scenario and write the ground-truth
//!   trajectory, the raw odometry log, and the displacement dataset.
//! * `train` — fit the configured model to a dataset and write the model
//!   snapshot plus a flat-text fit report.
//! * `evaluate` — predict a trajectory from a test dataset with a stored
//!   model and score it against a reference trajectory (ATE in meters,
//!   RPE in millimeters).
//! * `metrics` — score two existing trajectory files against each other.
//!
//! Exit codes: 0 on success, 2 for validation/configuration/parse errors,
//! 3 for numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::data::{DisplacementSample, TickVector};
use crate::error::{Error, Result};
use crate::gp::MeanSpec;
use crate::io::config::Config;
use crate::io::{self, load_config, load_model, read_dataset, read_trajectory, save_model};
use crate::metrics::{summarize, AlignmentReport, ErrorSummary, TrajectoryPair};
use crate::pipeline::{integrate_trajectory, train, TrainOptions, TrainedModel};
use crate::pose::Pose2D;
use crate::sim::simulate;

#[derive(Parser)]
#[command(
    name = "odocal",
    version,
    about = "Calibrate wheeled-robot odometry from external pose measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write truth, odometry, and dataset CSVs.
    Simulate(SimulateArgs),
    /// Fit a calibration model to a displacement dataset.
    Train(TrainArgs),
    /// Reconstruct a trajectory from a dataset and score it against truth.
    Evaluate(EvaluateArgs),
    /// Score one trajectory file against a reference trajectory file.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed (overrides the configured one).
    #[arg(long)]
    seed: Option<u64>,
    /// Print scenario details.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Displacement dataset CSV to fit.
    #[arg(long)]
    dataset: PathBuf,
    /// Where to write the model snapshot (the fit report lands next to it).
    #[arg(long)]
    model: PathBuf,
    /// Hyperparameter-search seed (overrides the configured one).
    #[arg(long)]
    seed: Option<u64>,
    /// Print the fit report to stdout as well.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model snapshot written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Test displacement dataset CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Reference trajectory CSV (overrides the configured one).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print alignment details.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Estimated trajectory CSV.
    estimated: PathBuf,
    /// Reference trajectory CSV.
    reference: PathBuf,
    /// Expected sampling interval in seconds; inferred from the reference
    /// spacing when omitted. Timestamps match within half an interval.
    #[arg(long)]
    interval: Option<f64>,
    /// Directory to also write metrics.txt and metrics.csv into.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print alignment details.
    #[arg(long)]
    verbose: bool,
}

/// Parse the process arguments, dispatch, and map errors to exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Metrics(args) => cmd_metrics(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_or_default(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(path) => load_config(path),
        None => Ok(Config::default()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating output directory {}", dir.display()), e))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = load_or_default(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.simulation.seed = seed;
    }
    let out_dir = args.out.clone().unwrap_or_else(|| config.evaluation.out_dir.clone());
    ensure_dir(&out_dir)?;

    if args.verbose {
        println!(
            "simulating {:.1} s at {:.3} s intervals ({} wheels, profile {}, seed {})",
            config.simulation.duration,
            config.simulation.interval,
            config.simulation.drive.wheel_count(),
            config.simulation.profile.as_str(),
            config.simulation.seed,
        );
    }

    let output = simulate(&config.simulation)?;
    let truth_path = out_dir.join("truth.csv");
    let odometry_path = out_dir.join("odometry.csv");
    let dataset_path = out_dir.join("dataset.csv");
    io::write_trajectory(&truth_path, &output.sensor_truth)?;
    io::write_odometry(&odometry_path, &output.odometry)?;
    io::write_dataset(&dataset_path, &output.dataset)?;

    println!("{}: {} rows", truth_path.display(), output.sensor_truth.len());
    println!("{}: {} rows", odometry_path.display(), output.odometry.len());
    println!("{}: {} rows", dataset_path.display(), output.dataset.len());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = load_or_default(args.config.as_deref())?;
    let dataset = read_dataset(&args.dataset)?;
    let mut options = TrainOptions {
        huber_threshold: config.calibration.huber_threshold,
        fit: config.calibration.fit.clone(),
    };
    if let Some(seed) = args.seed {
        options.fit.seed = seed;
    }

    let run = train(&dataset, config.calibration.model_kind, &options)?;
    save_model(&args.model, run.model_kind, &run.model)?;
    let report = train_report(&run);
    let report_path = args.model.with_extension("report.txt");
    std::fs::write(&report_path, &report)
        .map_err(|e| Error::io(format!("writing report {}", report_path.display()), e))?;

    println!(
        "trained {} on {} samples in {:.3} s",
        run.model_kind,
        run.train_samples,
        run.wall_time.as_secs_f64()
    );
    if let Some(warning) = &run.fit_warning {
        eprintln!("warning: {warning}");
    }
    println!("{}: model snapshot", args.model.display());
    println!("{}: fit report", report_path.display());
    if args.verbose {
        print!("{report}");
    }
    Ok(())
}

fn train_report(run: &crate::pipeline::CalibrationRun) -> String {
    use std::fmt::Write;
    let mut text = String::new();
    let _ = writeln!(text, "model = {}", run.model_kind);
    let _ = writeln!(text, "samples = {}", run.train_samples);
    let _ = writeln!(text, "wall_time_s = {:.3}", run.wall_time.as_secs_f64());
    let outputs = ["x", "y", "theta"];
    match &run.model {
        TrainedModel::Linear(model) => {
            let report = run.linear_report.as_ref();
            let _ = writeln!(text, "huber_threshold = {}", model.huber_threshold());
            for (i, name) in outputs.iter().enumerate() {
                if let Some(report) = report {
                    let _ = writeln!(text, "iterations_{name} = {}", report.iterations[i]);
                    let _ = writeln!(text, "objective_{name} = {}", report.objective[i]);
                    let _ = writeln!(text, "outliers_{name} = {}", report.outliers[i]);
                }
                let row: Vec<String> =
                    model.weights().row(i).iter().map(|v| v.to_string()).collect();
                let _ = writeln!(text, "weights_{name} = {}", row.join(" "));
            }
        }
        TrainedModel::Gp(model) => {
            if let Some(lml) = run.log_marginal_likelihood {
                let _ = writeln!(text, "log_marginal_likelihood = {lml}");
            }
            let _ = writeln!(text, "fit_iterations = {}", run.fit_iterations);
            if let Some(warning) = &run.fit_warning {
                let _ = writeln!(text, "fit_warning = {warning}");
            }
            if let Some(params) = model.kernel().rbf_params() {
                for (i, name) in outputs.iter().enumerate() {
                    let _ = writeln!(text, "signal_std_{name} = {}", params.signal_std[i]);
                }
                for (i, name) in outputs.iter().enumerate() {
                    let row: Vec<String> =
                        params.length_scale_sq[i].iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(text, "length_scale_sq_{name} = {}", row.join(" "));
                }
            }
            if let MeanSpec::Linear { coeffs } = model.mean() {
                for (i, name) in outputs.iter().enumerate() {
                    let row: Vec<String> =
                        coeffs.row(i).iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(text, "mean_coeffs_{name} = {}", row.join(" "));
                }
            }
        }
    }
    text
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = load_or_default(args.config.as_deref())?;
    let out_dir = args.out.clone().unwrap_or_else(|| config.evaluation.out_dir.clone());
    ensure_dir(&out_dir)?;

    let (_, model) = load_model(&args.model)?;
    let dataset = read_dataset(&args.dataset)?;
    let tick_dim = dataset[0].ticks.len();
    if model.input_dim() != tick_dim {
        return Err(Error::Dimension {
            context: "model inputs vs dataset tick columns",
            expected: model.input_dim(),
            got: tick_dim,
        });
    }

    let ticks: Vec<TickVector> = dataset.iter().map(|s| s.ticks.clone()).collect();
    let steps: Vec<Pose2D> = crate::pipeline::predict_displacements(&model, &ticks)?
        .into_iter()
        .map(|(pose, _)| pose)
        .collect();
    let times = estimate_times(&dataset);
    let tolerance = median_duration(&dataset) / 2.0;
    let predicted_path = out_dir.join("predicted.csv");

    let truth_path = args.truth.clone().or_else(|| config.evaluation.truth.clone());
    let reference = match &truth_path {
        None => Err(Error::InvalidArgument(
            "no reference trajectory configured (pass --truth or set [evaluation] truth)".into(),
        )),
        Some(path) => read_trajectory(path),
    };
    let reference = match reference {
        Ok(reference) => reference,
        Err(err) => {
            // Degrade gracefully: the reconstruction is still useful without
            // truth, so write it from the origin before reporting the error.
            let poses = integrate_trajectory(Pose2D::IDENTITY, steps);
            write_timed(&predicted_path, &times, &poses)?;
            println!("{}: {} rows", predicted_path.display(), poses.len());
            eprintln!("metrics skipped: no usable reference trajectory");
            return Err(err);
        }
    };

    // Anchor the reconstruction at the reference pose closest to the first
    // dataset timestamp so absolute errors measure drift, not the unknown
    // initial pose.
    let start = nearest_pose(&reference, times[0]);
    let poses = integrate_trajectory(start, steps);
    write_timed(&predicted_path, &times, &poses)?;
    let reference_path = out_dir.join("reference.csv");
    io::write_trajectory(&reference_path, &reference)?;

    let estimated: Vec<(f64, Pose2D)> =
        times.iter().copied().zip(poses.iter().copied()).collect();
    let (pair, alignment) = TrajectoryPair::align(&estimated, &reference, tolerance)?;
    let summary = summarize(&pair)?;
    write_metric_files(&out_dir, &summary, &alignment)?;

    println!("{}: {} rows", predicted_path.display(), poses.len());
    println!("{}: {} rows", reference_path.display(), reference.len());
    print_summary(&summary, &alignment, args.verbose);
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let estimated = read_trajectory(&args.estimated)?;
    let reference = read_trajectory(&args.reference)?;
    let interval = match args.interval {
        Some(interval) if interval > 0.0 && interval.is_finite() => interval,
        Some(interval) => {
            return Err(Error::InvalidArgument(format!(
                "interval must be positive, got {interval}"
            )))
        }
        None => {
            let spacings: Vec<f64> =
                reference.windows(2).map(|w| w[1].0 - w[0].0).collect();
            if spacings.is_empty() {
                return Err(Error::InsufficientData(
                    "reference trajectory needs at least two poses to infer an interval".into(),
                ));
            }
            median(spacings)
        }
    };
    let (pair, alignment) = TrajectoryPair::align(&estimated, &reference, interval / 2.0)?;
    let summary = summarize(&pair)?;
    if let Some(out_dir) = &args.out {
        ensure_dir(out_dir)?;
        write_metric_files(out_dir, &summary, &alignment)?;
    }
    print_summary(&summary, &alignment, args.verbose);
    Ok(())
}

/// Timestamps for an integrated trajectory: the first edge's start, then
/// every edge's end.
fn estimate_times(dataset: &[DisplacementSample]) -> Vec<f64> {
    let mut times = Vec::with_capacity(dataset.len() + 1);
    times.push(dataset[0].t_start);
    times.extend(dataset.iter().map(|s| s.t_end));
    times
}

fn median_duration(dataset: &[DisplacementSample]) -> f64 {
    median(dataset.iter().map(|s| s.t_end - s.t_start).collect())
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn nearest_pose(reference: &[(f64, Pose2D)], t: f64) -> Pose2D {
    let idx = reference.partition_point(|(rt, _)| *rt < t);
    let mut best = idx.min(reference.len() - 1);
    if idx > 0 && (t - reference[idx - 1].0).abs() <= (reference[best].0 - t).abs() {
        best = idx - 1;
    }
    reference[best].1
}

fn write_timed(path: &Path, times: &[f64], poses: &[Pose2D]) -> Result<()> {
    let rows: Vec<(f64, Pose2D)> = times.iter().copied().zip(poses.iter().copied()).collect();
    io::write_trajectory(path, &rows)
}

fn metrics_text(summary: &ErrorSummary, alignment: &AlignmentReport) -> String {
    use std::fmt::Write;
    let mut text = String::new();
    let _ = writeln!(text, "poses = {}", summary.poses);
    let _ = writeln!(text, "ate_m = {}", summary.ate);
    let _ = writeln!(text, "rpe_mm = {}", summary.rpe * 1e3);
    let _ = writeln!(text, "ate_rotation_rad = {}", summary.ate_rotation);
    let _ = writeln!(text, "rpe_rotation_rad = {}", summary.rpe_rotation);
    let _ = writeln!(text, "matched = {}", alignment.matched);
    let _ = writeln!(text, "dropped_estimated = {}", alignment.dropped_estimated);
    let _ = writeln!(text, "dropped_reference = {}", alignment.dropped_reference);
    text
}

fn metrics_csv(summary: &ErrorSummary) -> String {
    format!(
        "poses,ate_m,rpe_mm,ate_rotation_rad,rpe_rotation_rad\n{},{},{},{},{}\n",
        summary.poses,
        summary.ate,
        summary.rpe * 1e3,
        summary.ate_rotation,
        summary.rpe_rotation
    )
}

fn write_metric_files(
    out_dir: &Path,
    summary: &ErrorSummary,
    alignment: &AlignmentReport,
) -> Result<()> {
    let text_path = out_dir.join("metrics.txt");
    std::fs::write(&text_path, metrics_text(summary, alignment))
        .map_err(|e| Error::io(format!("writing metrics {}", text_path.display()), e))?;
    let csv_path = out_dir.join("metrics.csv");
    std::fs::write(&csv_path, metrics_csv(summary))
        .map_err(|e| Error::io(format!("writing metrics {}", csv_path.display()), e))
}

fn print_summary(summary: &ErrorSummary, alignment: &AlignmentReport, verbose: bool) {
    println!(
        "ATE {:.6} m | RPE {:.4} mm over {} poses",
        summary.ate,
        summary.rpe * 1e3,
        summary.poses
    );
    if verbose {
        println!(
            "rotation: ATE {:.6} rad | RPE {:.6} rad",
            summary.ate_rotation, summary.rpe_rotation
        );
        println!(
            "alignment: {} matched, {} estimated dropped, {} reference dropped",
            alignment.matched, alignment.dropped_estimated, alignment.dropped_reference
        );
    }
}
