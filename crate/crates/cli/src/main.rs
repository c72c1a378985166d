//! Command-line front end: track MOT detection files, simulate scenes and run
//! the Monte-Carlo model checks.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use cvtrack::mot::write_mot_detections;
use cvtrack::sim::{
    check_measurement_noise, check_process_noise, run_consistency_experiment, simulate_trajectory,
    ConsistencyConfig, CovarianceCheck, SimConfig,
};
use cvtrack::{
    read_mot_detections, write_mot_results, AxisSigmas, DMatrix, ModelMatrices, NoiseParams,
    Parameterization, Tracker, TrackerConfig,
};

#[derive(Parser)]
#[command(
    name = "cvtrack",
    version,
    about = "Constant-velocity bounding-box tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a MOTChallenge detection file and write MOT results.
    Track(TrackArgs),
    /// Simulate targets and write their noisy detections.
    Simulate(SimulateArgs),
    /// Check the closed-form Q and R against Monte-Carlo covariances.
    VerifyQ(VerifyArgs),
    /// Run the NEES/NIS filter-consistency experiment.
    Consistency(ConsistencyArgs),
    /// Print F, Q, H and R for one state layout.
    PrintModel(ModelArgs),
}

/// A sigma flag value, remembering whether it was given per axis.
#[derive(Debug, Clone, Copy)]
struct SigmaArg {
    sigmas: AxisSigmas,
    per_axis: bool,
}

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self {
            sigmas: s.parse()?,
            per_axis: s.contains(','),
        })
    }
}

/// Last per-axis list if any was given, else the last single value, else 1.
fn resolve_sigmas(values: &[SigmaArg]) -> AxisSigmas {
    values
        .iter()
        .rev()
        .find(|v| v.per_axis)
        .or(values.last())
        .map_or(AxisSigmas::uniform(1.0), |v| v.sigmas)
}

#[derive(Args, Clone)]
struct NoiseArgs {
    /// State layout: cxcywh, cxcywh-v, cxcysr, cxcyha or rw.
    #[arg(long, default_value = "cxcywh")]
    param: Parameterization,
    /// Sampling period between frames.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Process-noise sigma: one value or four comma-separated x,y,w,h values (repeatable).
    #[arg(long, value_name = "SIGMA")]
    sigma_process: Vec<SigmaArg>,
    /// Measurement-noise sigma: one value or four comma-separated x,y,w,h values (repeatable).
    #[arg(long, value_name = "SIGMA")]
    sigma_meas: Vec<SigmaArg>,
}

impl NoiseArgs {
    fn noise(&self) -> cvtrack::Result<NoiseParams> {
        NoiseParams::new(
            self.dt,
            resolve_sigmas(&self.sigma_process),
            resolve_sigmas(&self.sigma_meas),
        )
    }
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0.3)]
    iou_threshold: f64,
    #[arg(long, default_value_t = 5)]
    max_age: u32,
    #[arg(long, default_value_t = 3)]
    min_hits: u32,
    /// Additionally gate candidate pairs by Mahalanobis distance.
    #[arg(long)]
    mahalanobis_gate: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    targets: usize,
    #[arg(long)]
    seed: u64,
    /// Detection file to write.
    #[arg(long)]
    output: PathBuf,
    /// Optional ground-truth file in the results format.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    drop_prob: f64,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1_000_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[arg(long, default_value_t = 500)]
    runs: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale applied to the filter's Q relative to the simulated world.
    #[arg(long, default_value_t = 1.0)]
    q_scale: f64,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    noise: NoiseArgs,
}

const RELATIVE_TOLERANCE: f64 = 0.02;
const CROSS_TERM_TOLERANCE: f64 = 0.01;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Returns `Ok(false)` when a check ran but fell outside its tolerance.
fn run(command: Command) -> cvtrack::Result<bool> {
    match command {
        Command::Track(args) => track(args).map(|()| true),
        Command::Simulate(args) => simulate(args).map(|()| true),
        Command::VerifyQ(args) => verify_q(args),
        Command::Consistency(args) => consistency(args),
        Command::PrintModel(args) => {
            let m = ModelMatrices::build(args.noise.param, &args.noise.noise()?)?;
            print!("{}", format_model(&m));
            Ok(true)
        }
    }
}

fn track(args: TrackArgs) -> cvtrack::Result<()> {
    let input = read_mot_detections(&args.detections)?;
    let mut tracker = Tracker::new(TrackerConfig {
        param: args.noise.param,
        noise: args.noise.noise()?,
        iou_threshold: args.iou_threshold,
        max_age: args.max_age,
        min_hits: args.min_hits,
        use_mahalanobis_gate: args.mahalanobis_gate,
        ..Default::default()
    })?;
    if let (Some(first), Some(last)) = (input.first_frame(), input.last_frame()) {
        // frames without detections still age the tracks
        for frame in first..=last {
            let dets = input.frames.get(&frame).map_or(&[][..], Vec::as_slice);
            tracker.step(frame, dets)?;
        }
    }
    let histories = tracker.flush();
    log::info!(
        "{} tracks written to {}",
        histories.len(),
        args.output.display()
    );
    write_mot_results(&args.output, &histories)
}

fn simulate(args: SimulateArgs) -> cvtrack::Result<()> {
    let sim = simulate_trajectory(&SimConfig {
        param: args.noise.param,
        noise: args.noise.noise()?,
        n_steps: args.steps,
        n_targets: args.targets,
        seed: args.seed,
        initial_states: None,
        drop_probability: args.drop_prob,
    })?;
    write_mot_detections(&args.output, sim.detections())?;
    if let Some(truth) = &args.truth {
        write_mot_results(truth, &sim.truth_histories())?;
    }
    Ok(())
}

fn report_check(name: &str, check: &CovarianceCheck) -> bool {
    let scale = check.expected.amax();
    let cross = check.max_structural_zero / scale;
    let ok = check.relative_frobenius_error < RELATIVE_TOLERANCE && cross < CROSS_TERM_TOLERANCE;
    println!(
        "{name}: samples {} relative Frobenius error {:.6} max zero-entry {:.6} ({})",
        check.samples,
        check.relative_frobenius_error,
        cross,
        if ok { "ok" } else { "out of tolerance" }
    );
    ok
}

fn verify_q(args: VerifyArgs) -> cvtrack::Result<bool> {
    let noise = args.noise.noise()?;
    let q = check_process_noise(args.noise.param, &noise, args.trials, args.seed)?;
    let r = check_measurement_noise(&noise, args.trials, args.seed)?;
    let q_ok = report_check("Q", &q);
    let r_ok = report_check("R", &r);
    println!(
        "max relative error {:.6}",
        q.relative_frobenius_error.max(r.relative_frobenius_error)
    );
    Ok(q_ok && r_ok)
}

fn consistency(args: ConsistencyArgs) -> cvtrack::Result<bool> {
    let report = run_consistency_experiment(&ConsistencyConfig {
        param: args.noise.param,
        noise: args.noise.noise()?,
        runs: args.runs,
        steps: args.steps,
        seed: args.seed,
        filter_q_scale: args.q_scale,
        ..Default::default()
    })?;
    let verdict = |ok: bool| if ok { "in band" } else { "OUT OF BAND" };
    println!(
        "NEES mean {:.4} (dim {}), 99% band [{:.4}, {:.4}]: {}",
        report.mean_nees,
        report.state_dim,
        report.nees_band.0,
        report.nees_band.1,
        verdict(report.nees_in_band())
    );
    println!(
        "NIS mean {:.4} (dim {}), 99% band [{:.4}, {:.4}]: {}",
        report.mean_nis,
        report.meas_dim,
        report.nis_band.0,
        report.nis_band.1,
        verdict(report.nis_in_band())
    );
    Ok(report.nees_in_band() && report.nis_in_band())
}

fn format_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {}x{}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

fn format_model(m: &ModelMatrices) -> String {
    let mut out = String::new();
    for (name, mat) in [("F", &m.f), ("Q", &m.q), ("H", &m.h), ("R", &m.r)] {
        format_matrix(&mut out, name, mat);
    }
    out
}
