//! Deterministic synthetic scenes: straight-line ground truth plus a
//! degraded detector (corner noise, dropout, clutter, occlusion-dependent
//! confidence and box truncation).
//!
//! All coordinates are quantised to 0.01 px and scores to 1e-4 so that a
//! scenario written to disk reads back bit-for-bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, Detection};
use crate::motio::{self, GroundTruth, GtObject, MotIoError};

pub const CANVAS_WIDTH: f64 = 1920.0;
pub const CANVAS_HEIGHT: f64 = 1080.0;

const MIN_SIDE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario {name:?}: {message}")]
    InvalidSpec { name: String, message: String },
    #[error("object {index} of scenario {name:?} starts outside the {CANVAS_WIDTH}x{CANVAS_HEIGHT} canvas")]
    OutsideImage { name: String, index: usize },
    #[error("unknown scenario {0:?} (valid: {valid})", valid = BUILTIN_NAMES.join(", "))]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] MotIoError),
    #[error("{path}: {message}")]
    Sidecar { path: PathBuf, message: String },
}

/// One object moving on a straight line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// `[left, top, width, height]` at the first frame.
    pub initial_tlwh: [f64; 4],
    /// Pixels per frame.
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceModel {
    /// Every true detection scores 1.
    Perfect,
    /// `clamp(base - occlusion_slope * occluded_fraction - |N(0, jitter_std)|, 0, 1)`
    Occlusion {
        base: f64,
        occlusion_slope: f64,
        jitter_std: f64,
    },
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel::Occlusion {
            base: 0.99,
            occlusion_slope: 1.2,
            jitter_std: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub frames: u64,
    pub objects: Vec<ObjectSpec>,
    pub noise_std_px: f64,
    pub dropout_prob: f64,
    /// Expected clutter detections per frame.
    pub false_positive_rate: f64,
    pub confidence_model: ConfidenceModel,
    /// How far a detection shrinks towards the visible part of a partially
    /// hidden object: 0 keeps the full box, 1 cuts the hidden strip off.
    #[serde(default)]
    pub occlusion_truncation: f64,
    pub rng_seed: u64,
}

impl ScenarioSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |message: String| SynthError::InvalidSpec {
            name: self.name.clone(),
            message,
        };
        if self.frames < 1 {
            return Err(invalid("frames must be at least 1".into()));
        }
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(self.dropout_prob) {
            return Err(invalid(format!("dropout_prob {} outside [0, 1]", self.dropout_prob)));
        }
        if !prob(self.occlusion_truncation) {
            return Err(invalid(format!(
                "occlusion_truncation {} outside [0, 1]",
                self.occlusion_truncation
            )));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err(invalid(format!(
                "false_positive_rate must be non-negative, got {}",
                self.false_positive_rate
            )));
        }
        if !(self.noise_std_px >= 0.0 && self.noise_std_px.is_finite()) {
            return Err(invalid(format!("noise_std_px must be non-negative, got {}", self.noise_std_px)));
        }
        if let ConfidenceModel::Occlusion { jitter_std, .. } = self.confidence_model {
            if !(jitter_std >= 0.0 && jitter_std.is_finite()) {
                return Err(invalid(format!("jitter_std must be non-negative, got {jitter_std}")));
            }
        }
        for (index, o) in self.objects.iter().enumerate() {
            let [l, t, w, h] = o.initial_tlwh;
            if !(w > 0.0 && h > 0.0) || o.velocity.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("object {index} has a degenerate box or velocity")));
            }
            if l < 0.0 || t < 0.0 || l + w > CANVAS_WIDTH || t + h > CANVAS_HEIGHT {
                return Err(SynthError::OutsideImage {
                    name: self.name.clone(),
                    index,
                });
            }
        }
        Ok(())
    }
}

/// Generated ground truth and detections. Every frame in `1..=frames` has a
/// detection entry, possibly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ground_truth: GroundTruth,
    pub detections: BTreeMap<u64, Vec<Detection>>,
}

fn quantize_px(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn quantize_score(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

/// Clips `[x1, y1, x2, y2]` to the canvas and quantises it.
fn clip_box(r: [f64; 4]) -> Option<BoundingBox> {
    let x1 = quantize_px(r[0].clamp(0.0, CANVAS_WIDTH));
    let y1 = quantize_px(r[1].clamp(0.0, CANVAS_HEIGHT));
    let x2 = quantize_px(r[2].clamp(0.0, CANVAS_WIDTH));
    let y2 = quantize_px(r[3].clamp(0.0, CANVAS_HEIGHT));
    let w = quantize_px(x2 - x1);
    let h = quantize_px(y2 - y1);
    if w < MIN_SIDE || h < MIN_SIDE {
        return None;
    }
    BoundingBox::from_tlwh(x1, y1, w, h).ok()
}

fn overlap_area(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// A box is in front when its bottom edge is lower in the image; ties go
/// to the lower index.
fn in_front(j: usize, rj: &[f64; 4], i: usize, ri: &[f64; 4]) -> bool {
    j != i && (rj[3] > ri[3] || (rj[3] == ri[3] && j < i))
}

/// For each object: the share of its area hidden by objects in front, and
/// the rectangles doing the hiding.
fn occlusions(rects: &[Option<[f64; 4]>]) -> Vec<(f64, Vec<[f64; 4]>)> {
    rects
        .iter()
        .enumerate()
        .map(|(i, ri)| {
            let Some(ri) = ri else {
                return (0.0, Vec::new());
            };
            let area = (ri[2] - ri[0]) * (ri[3] - ri[1]);
            let occluders: Vec<[f64; 4]> = rects
                .iter()
                .enumerate()
                .filter_map(|(j, rj)| rj.map(|rj| (j, rj)))
                .filter(|(j, rj)| in_front(*j, rj, i, ri) && overlap_area(ri, rj) > 0.0)
                .map(|(_, rj)| rj)
                .collect();
            let hidden: f64 = occluders.iter().map(|o| overlap_area(ri, o)).sum();
            ((hidden / area).min(1.0), occluders)
        })
        .collect()
}

/// Shrinks `r` towards the bounding box of its visible part. An occluder
/// only changes that box when it spans the object's full extent along one
/// axis and covers an edge along the other; a band across the middle or a
/// corner leaves the visible extent unchanged.
fn truncate_visible(r: [f64; 4], occluders: &[[f64; 4]], amount: f64) -> [f64; 4] {
    let mut out = r;
    for o in occluders {
        let spans_x = o[0] <= r[0] && o[2] >= r[2];
        let spans_y = o[1] <= r[1] && o[3] >= r[3];
        if spans_x && spans_y {
            continue;
        }
        if spans_y {
            if o[0] <= r[0] && o[2] > r[0] {
                out[0] += amount * (o[2] - r[0]);
            } else if o[2] >= r[2] && o[0] < r[2] {
                out[2] -= amount * (r[2] - o[0]);
            }
        } else if spans_x {
            if o[1] <= r[1] && o[3] > r[1] {
                out[1] += amount * (o[3] - r[1]);
            } else if o[3] >= r[3] && o[1] < r[3] {
                out[3] -= amount * (r[3] - o[1]);
            }
        }
    }
    out
}

/// Ground-truth box of `object` at 1-based `frame`, if still on screen.
fn object_box(object: &ObjectSpec, frame: u64) -> Option<BoundingBox> {
    let [l, t, w, h] = object.initial_tlwh;
    let dt = (frame - 1) as f64;
    let x = l + object.velocity[0] * dt;
    let y = t + object.velocity[1] * dt;
    clip_box([x, y, x + w, y + h])
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let corner_noise = Normal::new(0.0, spec.noise_std_px).expect("validated std");
    let jitter = match spec.confidence_model {
        ConfidenceModel::Occlusion { jitter_std, .. } => {
            Some(Normal::new(0.0, jitter_std).expect("validated std"))
        }
        ConfidenceModel::Perfect => None,
    };
    let clutter = if spec.false_positive_rate > 0.0 {
        Some(Poisson::new(spec.false_positive_rate).expect("validated rate"))
    } else {
        None
    };

    let mut ground_truth = GroundTruth::new();
    let mut detections = BTreeMap::new();

    for frame in 1..=spec.frames {
        let boxes: Vec<Option<BoundingBox>> =
            spec.objects.iter().map(|o| object_box(o, frame)).collect();
        let rects: Vec<Option<[f64; 4]>> = boxes.iter().map(|b| b.map(|b| b.to_tlbr())).collect();
        let occluded = occlusions(&rects);

        let gt_frame: Vec<GtObject> = boxes
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                b.map(|bbox| GtObject {
                    id: i as u64 + 1,
                    bbox,
                    evaluable: true,
                })
            })
            .collect();
        if !gt_frame.is_empty() {
            ground_truth.insert(frame, gt_frame);
        }

        let mut dets = Vec::new();
        for (i, b) in boxes.iter().enumerate() {
            let Some(b) = b else { continue };
            // Draw every variate up front so dropout does not shift the stream.
            let keep = rng.random::<f64>() >= spec.dropout_prob;
            let noise: [f64; 4] = std::array::from_fn(|_| corner_noise.sample(&mut rng));
            let jitter_draw = jitter.map(|j| j.sample(&mut rng).abs()).unwrap_or(0.0);
            if !keep {
                continue;
            }

            let (occ, occluders) = &occluded[i];
            let occ = *occ;
            let score = match spec.confidence_model {
                ConfidenceModel::Perfect => 1.0,
                ConfidenceModel::Occlusion {
                    base,
                    occlusion_slope,
                    ..
                } => (base - occlusion_slope * occ - jitter_draw).clamp(0.0, 1.0),
            };

            let [x1, y1, x2, y2] = truncate_visible(b.to_tlbr(), occluders, spec.occlusion_truncation);
            let noisy = [x1 + noise[0], y1 + noise[1], x2 + noise[2], y2 + noise[3]];
            if let Some(bbox) = clip_box(noisy) {
                dets.push(Detection {
                    bbox,
                    score: quantize_score(score),
                });
            }
        }

        if let Some(clutter) = &clutter {
            let count = clutter.sample(&mut rng) as usize;
            for _ in 0..count {
                let w = rng.random_range(20.0..150.0);
                let h = rng.random_range(40.0..300.0);
                let l = rng.random_range(0.0..CANVAS_WIDTH - w);
                let t = rng.random_range(0.0..CANVAS_HEIGHT - h);
                let score = rng.random_range(0.1..0.7);
                let keep = rng.random::<f64>() >= spec.dropout_prob;
                if !keep {
                    continue;
                }
                if let Some(bbox) = clip_box([l, t, l + w, t + h]) {
                    dets.push(Detection {
                        bbox,
                        score: quantize_score(score),
                    });
                }
            }
        }
        detections.insert(frame, dets);
    }

    Ok(Scenario {
        ground_truth,
        detections,
    })
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "straight_clean",
    "crossing_same_shape",
    "crossing_distinct_shape",
    "occlusion_lowconf",
];

fn object(l: f64, t: f64, w: f64, h: f64, vx: f64, vy: f64) -> ObjectSpec {
    ObjectSpec {
        initial_tlwh: [l, t, w, h],
        velocity: [vx, vy],
    }
}

pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec {
            name: "straight_clean".into(),
            frames: 60,
            objects: vec![
                object(200.0, 300.0, 80.0, 200.0, 5.0, 0.0),
                object(200.0, 700.0, 80.0, 200.0, 5.0, 0.0),
            ],
            noise_std_px: 0.0,
            dropout_prob: 0.0,
            false_positive_rate: 0.0,
            confidence_model: ConfidenceModel::Perfect,
            occlusion_truncation: 0.0,
            rng_seed: 0,
        },
        ScenarioSpec {
            name: "crossing_same_shape".into(),
            frames: 100,
            objects: vec![
                object(400.0, 400.0, 80.0, 200.0, 8.0, 0.0),
                object(1200.0, 410.0, 80.0, 200.0, -8.0, 0.0),
            ],
            noise_std_px: 2.0,
            dropout_prob: 0.05,
            false_positive_rate: 0.2,
            confidence_model: ConfidenceModel::default(),
            occlusion_truncation: 1.0,
            rng_seed: 0,
        },
        ScenarioSpec {
            name: "crossing_distinct_shape".into(),
            frames: 100,
            objects: vec![
                // 1:2 and 2:1 boxes crossing at the same height.
                object(400.0, 400.0, 80.0, 160.0, 8.0, 0.0),
                object(1200.0, 440.0, 160.0, 80.0, -8.0, 0.0),
            ],
            noise_std_px: 2.0,
            dropout_prob: 0.05,
            false_positive_rate: 0.2,
            confidence_model: ConfidenceModel::default(),
            occlusion_truncation: 1.0,
            rng_seed: 0,
        },
        ScenarioSpec {
            name: "occlusion_lowconf".into(),
            frames: 100,
            objects: vec![
                // Standing in front.
                object(900.0, 500.0, 100.0, 250.0, 0.0, 0.0),
                // Walks behind; half of it is hidden at full overlap.
                object(500.0, 400.0, 80.0, 200.0, 8.0, 0.0),
            ],
            noise_std_px: 2.0,
            dropout_prob: 0.05,
            false_positive_rate: 0.2,
            confidence_model: ConfidenceModel::default(),
            occlusion_truncation: 1.0,
            rng_seed: 0,
        },
    ]
}

pub fn builtin(name: &str) -> Result<ScenarioSpec, SynthError> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SynthError::UnknownScenario(name.to_string()))
}

pub const GT_FILE: &str = "gt.txt";
pub const DET_FILE: &str = "det.txt";
pub const SIDECAR_FILE: &str = "scenario.json";

/// Writes `gt.txt`, `det.txt` and `scenario.json` into `dir`.
pub fn write_scenario(
    dir: impl AsRef<Path>,
    spec: &ScenarioSpec,
    scenario: &Scenario,
) -> Result<(), SynthError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SynthError::Sidecar {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    motio::write_ground_truth(dir.join(GT_FILE), &scenario.ground_truth)?;
    motio::write_detections(dir.join(DET_FILE), &scenario.detections)?;
    let sidecar = dir.join(SIDECAR_FILE);
    let json = serde_json::to_string_pretty(spec).expect("spec is serializable");
    fs::write(&sidecar, json + "\n").map_err(|e| SynthError::Sidecar {
        path: sidecar,
        message: e.to_string(),
    })
}

pub fn read_spec(path: impl AsRef<Path>) -> Result<ScenarioSpec, SynthError> {
    let path = path.as_ref();
    let err = |message: String| SynthError::Sidecar {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}
