//! Command-line front end: scenario simulation, pipeline runs, evaluation,
//! latency benchmarks and parameter sweeps.
//!
//! Progress and logs go to standard error; machine-readable artifacts go to
//! files or standard output. Every subcommand is deterministic given its
//! flags and seed (bench excepted for wall-clock values).

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Child, Stdio};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use iop_core::detector::{
    scenario_preset, ReplayDetector, SyntheticDetector, TwoStageDetector, WorldSpec,
};
use iop_core::io::{
    load_config, load_world, parse_mot, save_world, write_gt, write_results, DetectorKind,
    RunConfig,
};
use iop_core::metrics::{
    bench_latency, bench_world, evaluate_tracking_with, voc_map, EvalReport, Interpolation,
    LatencyReport, TrackingEvalOptions,
};
use iop_core::pipeline::{emitted_frames, run_pipeline, FrameResult, PipelineConfig, PipelineKind};

mod sweep;
mod trace;

#[derive(Parser)]
#[command(
    name = "iop",
    about = "Object permanence for two-stage detectors: simulate, run, evaluate, benchmark, sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario preset world (and optionally its ground truth).
    Simulate(SimulateArgs),
    /// Run a configured pipeline over a sequence and write MOT results.
    Run(RunArgs),
    /// Evaluate results against ground truth.
    Eval(EvalArgs),
    /// Measure per-frame latency across pipelines on identical inputs.
    Bench(BenchArgs),
    /// Run a parameter grid and aggregate metrics per cell.
    Sweep(sweep::SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name: pole_occlusion, crossing or crowd.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// World JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional MOT ground-truth output path.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// MOT results output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-frame trace JSON (proposals, refined, emitted).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Tracker results in MOT format.
    #[arg(long)]
    results: PathBuf,
    /// Ground truth in MOT format.
    #[arg(long)]
    gt: PathBuf,
    /// Metrics to compute.
    #[arg(long, value_delimiter = ',', default_value = "map,mot,idf1,deta")]
    metrics: Vec<String>,
    /// Report JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Matching gate.
    #[arg(long, default_value_t = 0.5)]
    iou_thr: f64,
    /// Use the historical 11-point AP interpolation.
    #[arg(long)]
    eleven_point: bool,
    /// Report MOTP as mean matched center distance instead of mean IoU.
    #[arg(long)]
    motp_distance: bool,
    /// Average DetA over the 0.05..0.95 alpha grid.
    #[arg(long)]
    deta_averaged: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Pipelines to measure.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "plain,kf,pf,iop-lite,iop-particles"
    )]
    pipelines: Vec<String>,
    #[arg(long, default_value_t = 500)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Latency report JSON output path.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Bench(args) => bench(args),
        Command::Sweep(args) => sweep::sweep(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let world = scenario_preset(&args.preset, args.seed)?;
    save_world(&args.out, &world)?;
    eprintln!(
        "wrote world '{}' (seed {}) to {}",
        args.preset,
        args.seed,
        args.out.display()
    );
    if let Some(gt_path) = &args.gt {
        let rows = gt_rows(&world)?;
        write_gt(gt_path, &rows)?;
        eprintln!("wrote ground truth to {}", gt_path.display());
    }
    Ok(())
}

fn gt_rows(world: &WorldSpec) -> Result<Vec<Vec<(i64, iop_core::BBox, f64)>>> {
    (0..world.frames)
        .map(|frame| {
            world
                .ground_truth(frame)
                .into_iter()
                .map(|(id, bbox)| {
                    let v = world.visibility_of(&bbox)?;
                    Ok((id, bbox, v))
                })
                .collect()
        })
        .collect()
}

/// Builds the detector described by a run config and reports how many frames
/// the sequence has. The child process handle (external detector only) must
/// outlive the run.
fn build_detector(config: &RunConfig) -> Result<(Box<dyn TwoStageDetector>, usize, Option<Child>)> {
    match config.detector {
        DetectorKind::Synthetic => {
            let world_path = config.world.as_ref().expect("validated");
            let world = load_world(world_path)?;
            let frames = config.frames.unwrap_or(world.frames).min(world.frames) as usize;
            let det = SyntheticDetector::new(world, config.synthetic.clone(), config.seed);
            Ok((Box::new(det), frames, None))
        }
        DetectorKind::Replay => {
            let path = config.detections.as_ref().expect("validated");
            let det = ReplayDetector::from_file(path)?;
            let frames = config
                .frames
                .map(|f| f as usize)
                .unwrap_or(det.frame_count());
            Ok((Box::new(det), frames, None))
        }
        DetectorKind::External => {
            let command = config.external_command.as_ref().expect("validated");
            let mut child = std::process::Command::new(&command[0])
                .args(&command[1..])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .with_context(|| format!("spawning external detector {:?}", command))?;
            let stdin = child.stdin.take().context("external detector stdin")?;
            let stdout = child.stdout.take().context("external detector stdout")?;
            let det = iop_core::detector::ExternalDetector::new(
                stdin,
                stdout,
                Duration::from_millis(config.external_timeout_ms),
            );
            let frames = config.frames.expect("validated") as usize;
            Ok((Box::new(det), frames, Some(child)))
        }
    }
}

fn pipeline_config(config: &RunConfig) -> PipelineConfig {
    let mut pf = config.pf.clone();
    if config.detector == DetectorKind::Synthetic {
        if let Some(world_path) = &config.world {
            if let Ok(world) = load_world(world_path) {
                pf.frame_size = world.frame_size;
            }
        }
    }
    PipelineConfig {
        iop: config.iop.clone(),
        pf,
        kf: config.kf.clone(),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let (detector, frames, mut child) = build_detector(&config)?;
    eprintln!(
        "running pipeline '{}' over {frames} frames (seed {})",
        config.pipeline.name(),
        config.seed
    );
    let results = run_pipeline(
        config.pipeline,
        pipeline_config(&config),
        detector.as_ref(),
        frames,
        config.seed,
    )?;
    write_results(&args.out, &emitted_frames(&results))?;
    eprintln!("wrote results to {}", args.out.display());
    if let Some(trace_path) = &args.trace {
        trace::write_trace(trace_path, &results)?;
        eprintln!("wrote trace to {}", trace_path.display());
    }
    if let Some(child) = child.as_mut() {
        let _ = child.kill();
        let _ = child.wait();
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let results = iop_core::io::detections_by_frame(&parse_mot(&args.results)?);
    let gt = iop_core::io::detections_by_frame(&parse_mot(&args.gt)?);
    // Align frame counts: a tracker that emitted nothing in trailing frames
    // still spans the ground-truth timeline.
    let frames = results.len().max(gt.len());
    let mut results = results;
    let mut gt = gt;
    results.resize(frames, Vec::new());
    gt.resize(frames, Vec::new());

    let mut report = EvalReport::new();
    for metric in &args.metrics {
        match metric.as_str() {
            "map" => {
                let interp = if args.eleven_point {
                    Interpolation::ElevenPoint
                } else {
                    Interpolation::AllPoint
                };
                report.map = Some(voc_map(&results, &gt, args.iou_thr, interp)?);
            }
            "mot" | "idf1" | "deta" => {
                if report.mot.is_none() {
                    report.mot = Some(evaluate_tracking_with(
                        &results,
                        &gt,
                        TrackingEvalOptions {
                            iou_thr: args.iou_thr,
                            motp_as_distance: args.motp_distance,
                            deta_averaged: args.deta_averaged,
                        },
                    )?);
                }
            }
            other => bail!("unknown metric '{other}' (expected map, mot, idf1 or deta)"),
        }
    }

    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&args.out, &json)
        .with_context(|| format!("writing report to {}", args.out.display()))?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(report.text_table().as_bytes())?;
    eprintln!("wrote report to {}", args.out.display());
    Ok(())
}

fn parse_pipelines(names: &[String]) -> Result<Vec<PipelineKind>> {
    names
        .iter()
        .map(|name| PipelineKind::parse(name).with_context(|| format!("unknown pipeline '{name}'")))
        .collect()
}

fn bench(args: BenchArgs) -> Result<()> {
    let kinds = parse_pipelines(&args.pipelines)?;
    let world = bench_world(args.frames as u32, args.seed);
    let detector = SyntheticDetector::new(world, Default::default(), args.seed);
    eprintln!(
        "benchmarking {} pipelines over {} frames x {} reps",
        kinds.len(),
        args.frames,
        args.reps
    );
    let report: LatencyReport = bench_latency(
        &kinds,
        &detector,
        &PipelineConfig::default(),
        args.frames,
        args.reps,
        args.seed,
    )?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing latency report to {}", args.out.display()))?;
    let mut eval_report = EvalReport::new();
    eval_report.latency = Some(report);
    print!("{}", eval_report.text_table());
    eprintln!("wrote latency report to {}", args.out.display());
    Ok(())
}

/// Shared by run/eval paths and the sweep: execute one synthetic run and
/// return the emitted frames plus the world's ground truth.
pub(crate) fn run_synthetic(
    preset: &str,
    pipeline: PipelineKind,
    cfg: PipelineConfig,
    seed: u64,
) -> Result<(Vec<FrameResult>, Vec<Vec<iop_core::ScoredDetection>>)> {
    let world = scenario_preset(preset, seed)?;
    let gt = (0..world.frames)
        .map(|frame| {
            world
                .ground_truth(frame)
                .into_iter()
                .map(|(id, bbox)| iop_core::ScoredDetection::with_id(bbox, 1.0, id))
                .collect()
        })
        .collect();
    let frames = world.frames as usize;
    let mut cfg = cfg;
    cfg.pf.frame_size = world.frame_size;
    let detector = SyntheticDetector::new(world, Default::default(), seed);
    let results = run_pipeline(pipeline, cfg, &detector, frames, seed)?;
    Ok((results, gt))
}
