//! Parameter sweep: runs the cross product of a particle-budget grid and a
//! history-length grid on a scenario preset, aggregating mAP and MOTA per
//! cell as mean and standard deviation over seeds.
//!
//! Cells run in parallel; each cell/seed pair is an independent seeded
//! pipeline, so the aggregate is deterministic regardless of scheduling.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use iop_core::iop::IopConfig;
use iop_core::metrics::{evaluate_tracking, voc_map, Interpolation};
use iop_core::pipeline::{emitted_frames, PipelineConfig, PipelineKind};

#[derive(Args)]
pub struct SweepArgs {
    /// Grid axes, e.g. `--grid particles=50,75,100,200 history=1..19`.
    #[arg(long, num_args = 0.., value_name = "AXIS=SPEC")]
    grid: Vec<String>,
    /// Scenario preset to sweep on.
    #[arg(long, default_value = "crowd")]
    preset: String,
    /// Number of seeds (0..n) aggregated per cell.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Pipeline the grid configures.
    #[arg(long, default_value = "iop-particles")]
    pipeline: String,
    /// Sweep report JSON output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct SweepCell {
    particles: usize,
    history: usize,
    map_mean: f64,
    map_sd: f64,
    mota_mean: f64,
    mota_sd: f64,
    seeds: u64,
}

#[derive(Serialize)]
struct SweepReport {
    format: u32,
    pipeline: String,
    preset: String,
    seeds: u64,
    particles_grid: Vec<usize>,
    history_grid: Vec<usize>,
    /// Row-major over (particles, history).
    cells: Vec<SweepCell>,
}

/// Parses `50,75,100` or `1..19` (inclusive) axis specs.
fn parse_axis(spec: &str) -> Result<Vec<usize>> {
    if let Some((from, to)) = spec.split_once("..") {
        let from: usize = from.trim().parse().context("range start")?;
        let to: usize = to.trim().parse().context("range end")?;
        if from > to {
            bail!("empty range {from}..{to}");
        }
        Ok((from..=to).collect())
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<usize>().map_err(Into::into))
            .collect::<Result<Vec<_>>>()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let pipeline = PipelineKind::parse(&args.pipeline)
        .with_context(|| format!("unknown pipeline '{}'", args.pipeline))?;
    if args.seeds == 0 {
        bail!("need at least one seed");
    }

    let mut particles_grid = vec![IopConfig::default().particles];
    let mut history_grid = vec![IopConfig::default().history];
    for axis in &args.grid {
        let (name, spec) = axis
            .split_once('=')
            .with_context(|| format!("malformed grid axis '{axis}'"))?;
        match name {
            "particles" => particles_grid = parse_axis(spec)?,
            "history" => {
                history_grid = parse_axis(spec)?;
                if history_grid.contains(&0) {
                    bail!("history length must be at least 1");
                }
            }
            other => bail!("unknown grid axis '{other}' (expected particles or history)"),
        }
    }

    let jobs: Vec<(usize, usize)> = particles_grid
        .iter()
        .flat_map(|&p| history_grid.iter().map(move |&h| (p, h)))
        .collect();
    eprintln!(
        "sweeping {} cells x {} seeds of '{}' on '{}'",
        jobs.len(),
        args.seeds,
        args.pipeline,
        args.preset
    );

    let cells: Result<Vec<SweepCell>> = jobs
        .par_iter()
        .map(|&(particles, history)| {
            let mut maps = Vec::new();
            let mut motas = Vec::new();
            for seed in 0..args.seeds {
                let cfg = PipelineConfig {
                    iop: IopConfig {
                        particles,
                        history,
                        ..IopConfig::default()
                    },
                    ..PipelineConfig::default()
                };
                let (results, gt) = crate::run_synthetic(&args.preset, pipeline, cfg, seed)?;
                let emitted = emitted_frames(&results);
                maps.push(voc_map(&emitted, &gt, 0.5, Interpolation::AllPoint)?.map);
                motas.push(evaluate_tracking(&emitted, &gt, 0.5)?.mota);
            }
            let (map_mean, map_sd) = mean_sd(&maps);
            let (mota_mean, mota_sd) = mean_sd(&motas);
            Ok(SweepCell {
                particles,
                history,
                map_mean,
                map_sd,
                mota_mean,
                mota_sd,
                seeds: args.seeds,
            })
        })
        .collect();
    let cells = cells?;

    // Table-shaped summary to stderr: one row per particle budget, one
    // column per history length.
    eprintln!("mAP (mean over {} seeds):", args.seeds);
    eprint!("{:>10}", "particles");
    for h in &history_grid {
        eprint!(" {:>8}", format!("h={h}"));
    }
    eprintln!();
    for (pi, p) in particles_grid.iter().enumerate() {
        eprint!("{p:>10}");
        for hi in 0..history_grid.len() {
            eprint!(" {:>8.4}", cells[pi * history_grid.len() + hi].map_mean);
        }
        eprintln!();
    }

    let report = SweepReport {
        format: 1,
        pipeline: args.pipeline.clone(),
        preset: args.preset.clone(),
        seeds: args.seeds,
        particles_grid,
        history_grid,
        cells,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing sweep report to {}", args.out.display()))?;
    eprintln!("wrote sweep report to {}", args.out.display());
    Ok(())
}
