use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sctrack::ablation;
use sctrack::metrics;
use sctrack::motio;
use sctrack::synth;
use sctrack::{Tracker, TrackerConfig};

#[derive(Parser, Debug)]
#[command(name = "sctrack", version, about = "Shape-constrained multi-object tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track a MOTChallenge detection file and write results.
    Track {
        #[arg(long, value_name = "PATH")]
        detections: PathBuf,
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a result file against ground truth.
    Eval {
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        #[arg(long, value_name = "PATH")]
        res: PathBuf,
        /// Also write the report as CSV.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = metrics::DEFAULT_IOU_MATCH_THRESH)]
        iou_thresh: f64,
    },
    /// Write a synthetic scene (gt.txt, det.txt, scenario.json) to a directory.
    Synth {
        /// Builtin scenario name.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        scenario: Option<String>,
        /// Scenario JSON file, e.g. a scenario.json written earlier.
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Compare the shape / confidence arms over synthetic scenes.
    Ablate {
        /// Builtin scenario name; repeat for several.
        #[arg(long, default_value = "crossing_distinct_shape")]
        scenario: Vec<String>,
        /// Seed; repeat for several. Defaults to 1 through 10.
        #[arg(long)]
        seed: Vec<u64>,
        /// Compare the height / area term combinations instead.
        #[arg(long)]
        shape_terms: bool,
        /// Also write the table as CSV.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Tracker settings. Flags override the config file, which overrides defaults.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML tracker config.
    #[arg(long, value_name = "PATH", env = "SCTRACK_CONFIG")]
    config: Option<PathBuf>,
    /// Detections at or above this score go to the first association stage.
    #[arg(long)]
    high_thresh: Option<f64>,
    /// Detections below this score are dropped.
    #[arg(long)]
    low_thresh: Option<f64>,
    /// Minimum score for an unmatched detection to start a track.
    #[arg(long)]
    new_track_thresh: Option<f64>,
    /// Cost gate for confirmed and lost tracks against high detections.
    #[arg(long)]
    gate1: Option<f64>,
    /// Cost gate for leftover tracks against low detections.
    #[arg(long)]
    gate2: Option<f64>,
    /// Cost gate for tentative tracks.
    #[arg(long)]
    gate_unconfirmed: Option<f64>,
    /// Frames a track may go unmatched before it is removed.
    #[arg(long)]
    max_lost: Option<u64>,
    /// Stabiliser added to the shape-term denominators.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Disable both shape terms.
    #[arg(long)]
    no_shape: bool,
    /// Disable the height term only.
    #[arg(long)]
    no_shape_height: bool,
    /// Disable the area term only.
    #[arg(long)]
    no_shape_area: bool,
    /// Disable the confidence-scaled noise and velocity blend.
    #[arg(long)]
    no_conf: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrackerConfig> {
        let mut cfg = match &self.config {
            Some(path) => motio::read_config(path)?,
            None => TrackerConfig::default(),
        };
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.high_thresh, self.high_thresh);
        set(&mut cfg.low_thresh, self.low_thresh);
        set(&mut cfg.new_track_thresh, self.new_track_thresh);
        set(&mut cfg.match_gate_stage1, self.gate1);
        set(&mut cfg.match_gate_stage2, self.gate2);
        set(&mut cfg.match_gate_unconfirmed, self.gate_unconfirmed);
        set(&mut cfg.shape_params.epsilon, self.epsilon);
        if let Some(m) = self.max_lost {
            cfg.max_lost_frames = m;
        }
        if self.no_shape || self.no_shape_height {
            cfg.shape_params.use_height_term = false;
        }
        if self.no_shape || self.no_shape_area {
            cfg.shape_params.use_area_term = false;
        }
        if self.no_conf {
            cfg.noise_config.use_confidence_noise = false;
            cfg.noise_config.use_velocity_blend = false;
        }
        cfg.validate().context("invalid tracker config")?;
        Ok(cfg)
    }
}

fn cmd_track(detections: &Path, output: &Path, config: &ConfigArgs) -> Result<()> {
    let cfg = config.resolve()?;
    let set = motio::read_detections(detections)?;
    if set.clamped_scores > 0 || set.rejected_rows > 0 {
        eprintln!(
            "warning: {}: {} scores clamped to [0, 1], {} rows with empty boxes dropped",
            detections.display(),
            set.clamped_scores,
            set.rejected_rows
        );
    }

    let mut tracker = Tracker::new(cfg)?;
    let mut results = Vec::with_capacity(set.frames.len());
    let mut times_ms = Vec::with_capacity(set.frames.len());
    for (&frame, dets) in &set.frames {
        let start = Instant::now();
        let r = tracker
            .step(frame, dets)
            .with_context(|| format!("tracking frame {frame}"))?;
        times_ms.push(start.elapsed().as_secs_f64() * 1e3);
        results.push(r);
    }
    motio::write_results(output, &results)?;

    let boxes: usize = results.iter().map(|r| r.outputs.len()).sum();
    println!(
        "tracked {} frames, {} boxes -> {}",
        results.len(),
        boxes,
        output.display()
    );
    if !times_ms.is_empty() {
        let mean = times_ms.iter().sum::<f64>() / times_ms.len() as f64;
        let max = times_ms.iter().copied().fold(0.0, f64::max);
        times_ms.sort_by(f64::total_cmp);
        let median = times_ms[times_ms.len() / 2];
        println!("association ms/frame: mean {mean:.3}, median {median:.3}, max {max:.3}");
    }
    Ok(())
}

fn cmd_eval(gt: &Path, res: &Path, output: Option<&Path>, iou_thresh: f64) -> Result<()> {
    let gt = motio::evaluable_ground_truth(&motio::read_ground_truth(gt)?);
    let res = motio::read_results(res)?;
    let report = metrics::evaluate(&gt, &res, iou_thresh)?;
    print!("{}", report.to_text());
    if let Some(path) = output {
        write_file(path, &report.to_csv())?;
    }
    Ok(())
}

fn cmd_synth(scenario: Option<&str>, spec: Option<&Path>, seed: u64, output: &Path) -> Result<()> {
    let spec = match (scenario, spec) {
        (_, Some(path)) => synth::read_spec(path)?,
        (Some(name), None) => synth::builtin(name)?,
        (None, None) => bail!("one of --scenario or --spec is required"),
    };
    let spec = spec.with_seed(seed);
    let scene = synth::generate(&spec)?;
    synth::write_scenario(output, &spec, &scene)?;
    println!(
        "wrote {} ({} frames, seed {seed}) to {}",
        spec.name,
        spec.frames,
        output.display()
    );
    Ok(())
}

fn cmd_ablate(
    names: &[String],
    seeds: &[u64],
    shape_terms: bool,
    output: Option<&Path>,
    config: &ConfigArgs,
) -> Result<()> {
    let base = config.resolve()?;
    let specs = names
        .iter()
        .map(|n| synth::builtin(n))
        .collect::<Result<Vec<_>, _>>()?;
    let seeds: Vec<u64> = if seeds.is_empty() {
        (1..=10).collect()
    } else {
        seeds.to_vec()
    };
    let rows = if shape_terms {
        ablation::run_shape_terms(&base, &specs, &seeds)?
    } else {
        ablation::run_arms(&base, &specs, &seeds)?
    };
    println!(
        "scenarios: {}; seeds: {}",
        names.join(", "),
        seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    print!("{}", ablation::format_table(&rows));
    if let Some(path) = output {
        write_file(path, &ablation::format_csv(&rows))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track {
            detections,
            output,
            config,
        } => cmd_track(&detections, &output, &config),
        Command::Eval {
            gt,
            res,
            output,
            iou_thresh,
        } => cmd_eval(&gt, &res, output.as_deref(), iou_thresh),
        Command::Synth {
            scenario,
            spec,
            seed,
            output,
        } => cmd_synth(scenario.as_deref(), spec.as_deref(), seed, &output),
        Command::Ablate {
            scenario,
            seed,
            shape_terms,
            output,
            config,
        } => cmd_ablate(&scenario, &seed, shape_terms, output.as_deref(), &config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
