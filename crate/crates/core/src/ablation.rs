//! Paired on/off comparisons of the shape terms and the confidence update.
//!
//! Every arm sees the same generated detections for a given scenario and
//! seed, so differences come from association alone. Counts are pooled over
//! all runs before the ratios are computed.

use std::fmt::Write as _;

use crate::metrics::{self, MetricsError, MetricsReport};
use crate::motio;
use crate::synth::{self, ScenarioSpec, SynthError};
use crate::tracker::{self, TrackerConfig, TrackerError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Shape and confidence toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationArm {
    Baseline,
    Shape,
    Conf,
    ShapeConf,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [Self::Baseline, Self::Shape, Self::Conf, Self::ShapeConf];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Shape => "shape",
            Self::Conf => "conf",
            Self::ShapeConf => "shape+conf",
        }
    }

    pub fn uses_shape(&self) -> bool {
        matches!(self, Self::Shape | Self::ShapeConf)
    }

    pub fn uses_conf(&self) -> bool {
        matches!(self, Self::Conf | Self::ShapeConf)
    }

    pub fn apply(&self, base: &TrackerConfig) -> TrackerConfig {
        let mut cfg = *base;
        cfg.shape_params.use_height_term = self.uses_shape();
        cfg.shape_params.use_area_term = self.uses_shape();
        cfg.noise_config.use_confidence_noise = self.uses_conf();
        cfg.noise_config.use_velocity_blend = self.uses_conf();
        cfg
    }
}

/// Height / area term toggles with the confidence update left as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeTermArm {
    pub height: bool,
    pub area: bool,
}

impl ShapeTermArm {
    pub const ALL: [ShapeTermArm; 4] = [
        ShapeTermArm { height: false, area: false },
        ShapeTermArm { height: true, area: false },
        ShapeTermArm { height: false, area: true },
        ShapeTermArm { height: true, area: true },
    ];

    pub fn label(&self) -> &'static str {
        match (self.height, self.area) {
            (false, false) => "none",
            (true, false) => "height",
            (false, true) => "area",
            (true, true) => "height+area",
        }
    }

    pub fn apply(&self, base: &TrackerConfig) -> TrackerConfig {
        let mut cfg = *base;
        cfg.shape_params.use_height_term = self.height;
        cfg.shape_params.use_area_term = self.area;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub report: MetricsReport,
    /// IDSW per (scenario, seed) run, in input order.
    pub idsw_per_run: Vec<usize>,
}

/// Pooled metrics for one config over every scenario and seed.
pub fn evaluate_config(
    config: &TrackerConfig,
    scenarios: &[ScenarioSpec],
    seeds: &[u64],
) -> Result<(MetricsReport, Vec<usize>), AblationError> {
    let mut totals = [0usize; 7];
    let mut hyp_total = 0;
    let mut per_run = Vec::new();
    for spec in scenarios {
        for &seed in seeds {
            let scene = synth::generate(&spec.clone().with_seed(seed))?;
            let results = tracker::run_sequence(&scene.detections, config)?;
            let res_map = motio::results_to_map(&results);
            let gt = motio::evaluable_ground_truth(&scene.ground_truth);
            let r = metrics::evaluate(&gt, &res_map, metrics::DEFAULT_IOU_MATCH_THRESH)?;
            hyp_total += res_map.values().map(Vec::len).sum::<usize>();
            for (t, v) in totals
                .iter_mut()
                .zip([r.gt_count, r.fp, r.fn_, r.idsw, r.matches, r.idtp, r.frames])
            {
                *t += v;
            }
            per_run.push(r.idsw);
        }
    }
    let [gt, fp, fn_, idsw, matches, idtp, frames] = totals;
    if gt == 0 {
        return Err(MetricsError::EmptyGroundTruth.into());
    }
    Ok((
        MetricsReport::from_counts(gt, hyp_total, fp, fn_, idsw, matches, idtp, frames),
        per_run,
    ))
}

/// Runs the four shape/confidence arms.
pub fn run_arms(
    base: &TrackerConfig,
    scenarios: &[ScenarioSpec],
    seeds: &[u64],
) -> Result<Vec<AblationRow>, AblationError> {
    AblationArm::ALL
        .iter()
        .map(|arm| {
            let (report, idsw_per_run) = evaluate_config(&arm.apply(base), scenarios, seeds)?;
            Ok(AblationRow {
                label: arm.label().to_string(),
                report,
                idsw_per_run,
            })
        })
        .collect()
}

/// Runs the four height/area combinations.
pub fn run_shape_terms(
    base: &TrackerConfig,
    scenarios: &[ScenarioSpec],
    seeds: &[u64],
) -> Result<Vec<AblationRow>, AblationError> {
    ShapeTermArm::ALL
        .iter()
        .map(|arm| {
            let (report, idsw_per_run) = evaluate_config(&arm.apply(base), scenarios, seeds)?;
            Ok(AblationRow {
                label: arm.label().to_string(),
                report,
                idsw_per_run,
            })
        })
        .collect()
}

pub fn format_table(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14}{:>8}{:>8}{:>7}", "Method", "IDF1%", "MOTA%", "IDSW");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14}{:>8.1}{:>8.1}{:>7}",
            r.label,
            r.report.idf1 * 100.0,
            r.report.mota * 100.0,
            r.report.idsw
        );
    }
    s
}

pub fn format_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("arm,idf1,mota,idsw\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.label, r.report.idf1, r.report.mota, r.report.idsw);
    }
    s
}
