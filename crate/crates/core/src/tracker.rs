//! Two-stage tracking-by-detection.
//!
//! Each frame, detections are split by confidence. Confirmed and lost tracks
//! are matched against the high-confidence set first, whatever is left over
//! gets a second chance against the low-confidence set, and tentative
//! tracks are then matched against the remaining high-confidence boxes.
//! All stages use the shape-constrained IoU distance; matched tracks receive
//! the confidence-aware Kalman update.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment;
use crate::geometry::{cost_matrix, BoundingBox, Detection, DetectionError, ShapeIoUParams};
use crate::kalman::{KalmanError, KalmanFilter, KalmanState, NoiseConfig};

pub type TrackId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error("frame index {got} does not follow previous frame {prev}")]
    NonIncreasingFrame { prev: u64, got: u64 },
    #[error("detection {index} is malformed")]
    InvalidDetection {
        index: usize,
        #[source]
        source: DetectionError,
    },
    #[error("kalman update failed for track {track}")]
    Filter {
        track: TrackId,
        #[source]
        source: KalmanError,
    },
    #[error("frame {frame}")]
    AtFrame {
        frame: u64,
        #[source]
        source: Box<TrackerError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Removed,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub state: KalmanState,
    pub status: TrackStatus,
    pub frames_since_update: u64,
    pub last_score: f64,
    pub start_frame: u64,
    pub last_update_frame: u64,
    pub hits: u64,
}

impl Track {
    pub fn bbox(&self) -> Option<BoundingBox> {
        self.state.project().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub high_thresh: f64,
    pub low_thresh: f64,
    pub new_track_thresh: f64,
    pub match_gate_stage1: f64,
    pub match_gate_stage2: f64,
    pub match_gate_unconfirmed: f64,
    pub max_lost_frames: u64,
    /// Run the third matching step for tentative tracks.
    pub match_unconfirmed: bool,
    /// Tracks born on the tracker's first frame start out confirmed.
    pub confirm_first_frame: bool,
    pub shape_params: ShapeIoUParams,
    pub noise_config: NoiseConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            high_thresh: 0.6,
            low_thresh: 0.1,
            new_track_thresh: 0.7,
            match_gate_stage1: 0.9,
            match_gate_stage2: 0.5,
            match_gate_unconfirmed: 0.7,
            max_lost_frames: 30,
            match_unconfirmed: true,
            confirm_first_frame: true,
            shape_params: ShapeIoUParams::default(),
            noise_config: NoiseConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: String| Err(TrackerError::InvalidConfig(m));
        if !(0.0 <= self.low_thresh && self.low_thresh < self.high_thresh && self.high_thresh <= 1.0) {
            return bad(format!(
                "need 0 <= low_thresh < high_thresh <= 1, got {} and {}",
                self.low_thresh, self.high_thresh
            ));
        }
        if !(0.0..=1.0).contains(&self.new_track_thresh) {
            return bad(format!("new_track_thresh {} outside [0, 1]", self.new_track_thresh));
        }
        for (name, g) in [
            ("match_gate_stage1", self.match_gate_stage1),
            ("match_gate_stage2", self.match_gate_stage2),
            ("match_gate_unconfirmed", self.match_gate_unconfirmed),
        ] {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("{name} must be a non-negative number, got {g}"));
            }
        }
        if self.max_lost_frames < 1 {
            return bad("max_lost_frames must be at least 1".into());
        }
        self.shape_params.validate().map_err(TrackerError::InvalidConfig)?;
        self.noise_config.validate().map_err(TrackerError::InvalidConfig)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub track_id: TrackId,
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_index: u64,
    /// Confirmed tracks updated this frame, ordered by id.
    pub outputs: Vec<TrackOutput>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    filter: KalmanFilter,
    tracks: Vec<Track>,
    next_id: TrackId,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            filter: KalmanFilter::new(config.noise_config),
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks (anything not yet removed), in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    /// Processes one frame of detections.
    pub fn step(
        &mut self,
        frame_index: u64,
        detections: &[Detection],
    ) -> Result<FrameResult, TrackerError> {
        if let Some(prev) = self.last_frame {
            if frame_index <= prev {
                return Err(TrackerError::NonIncreasingFrame {
                    prev,
                    got: frame_index,
                });
            }
        }
        for (index, d) in detections.iter().enumerate() {
            d.validate()
                .map_err(|source| TrackerError::InvalidDetection { index, source })?;
        }
        let first_frame = self.last_frame.is_none();
        let elapsed = self.last_frame.map_or(1, |prev| frame_index - prev);
        self.last_frame = Some(frame_index);

        let cfg = self.config;
        let mut high = Vec::new();
        let mut low = Vec::new();
        for (i, d) in detections.iter().enumerate() {
            if d.score >= cfg.high_thresh {
                high.push(i);
            } else if d.score >= cfg.low_thresh {
                low.push(i);
            }
        }

        // Tracks that lose a valid box during prediction can never match again.
        let steps = elapsed.min(cfg.max_lost_frames + 1);
        let mut predicted: Vec<Option<BoundingBox>> = Vec::with_capacity(self.tracks.len());
        for track in &mut self.tracks {
            for _ in 0..steps {
                track.state = self.filter.predict(&track.state);
            }
            let bbox = track.state.project().ok();
            if bbox.is_none() {
                track.status = TrackStatus::Removed;
            }
            predicted.push(bbox);
        }

        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| {
                predicted[i].is_some()
                    && matches!(self.tracks[i].status, TrackStatus::Confirmed | TrackStatus::Lost)
            })
            .collect();
        let tentative: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| predicted[i].is_some() && self.tracks[i].status == TrackStatus::Tentative)
            .collect();

        let mut matches: Vec<(usize, usize)> = Vec::new();

        let (stage1, remaining_tracks, remaining_high) =
            self.associate(&predicted, &pool, detections, &high, cfg.match_gate_stage1);
        matches.extend(stage1);

        let (stage2, _, _) =
            self.associate(&predicted, &remaining_tracks, detections, &low, cfg.match_gate_stage2);
        matches.extend(stage2);

        let mut unmatched_high = remaining_high;
        if cfg.match_unconfirmed {
            let (stage3, _, left) = self.associate(
                &predicted,
                &tentative,
                detections,
                &unmatched_high,
                cfg.match_gate_unconfirmed,
            );
            matches.extend(stage3);
            unmatched_high = left;
        }

        let mut updated = vec![false; self.tracks.len()];
        for &(ti, di) in &matches {
            let det = &detections[di];
            let track = &mut self.tracks[ti];
            track.state = self
                .filter
                .update(&track.state, det)
                .map_err(|source| TrackerError::Filter {
                    track: track.id,
                    source,
                })?;
            track.status = TrackStatus::Confirmed;
            track.frames_since_update = 0;
            track.last_update_frame = frame_index;
            track.last_score = det.score;
            track.hits += 1;
            updated[ti] = true;
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if updated[ti] || track.status == TrackStatus::Removed {
                continue;
            }
            track.frames_since_update = frame_index - track.last_update_frame;
            track.status = match track.status {
                TrackStatus::Tentative => TrackStatus::Removed,
                _ if track.frames_since_update > cfg.max_lost_frames => TrackStatus::Removed,
                _ => TrackStatus::Lost,
            };
        }

        let spawn_status = if first_frame && cfg.confirm_first_frame {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        for di in unmatched_high {
            let det = &detections[di];
            if det.score < cfg.new_track_thresh {
                continue;
            }
            let state = self
                .filter
                .initiate(&det.bbox)
                .map_err(|source| TrackerError::Filter {
                    track: self.next_id,
                    source,
                })?;
            self.tracks.push(Track {
                id: self.next_id,
                state,
                status: spawn_status,
                frames_since_update: 0,
                last_score: det.score,
                start_frame: frame_index,
                last_update_frame: frame_index,
                hits: 1,
            });
            updated.push(true);
            self.next_id += 1;
        }

        let mut outputs: Vec<TrackOutput> = self
            .tracks
            .iter()
            .zip(&updated)
            .filter(|(t, &u)| u && t.status == TrackStatus::Confirmed)
            .filter_map(|(t, _)| {
                t.bbox().map(|bbox| TrackOutput {
                    track_id: t.id,
                    bbox,
                    score: t.last_score,
                })
            })
            .collect();
        outputs.sort_by_key(|o| o.track_id);

        self.tracks.retain(|t| t.status != TrackStatus::Removed);

        Ok(FrameResult {
            frame_index,
            outputs,
        })
    }

    /// Matches the given track and detection subsets. Returns matched
    /// `(track, detection)` index pairs plus the leftovers of both sides.
    fn associate(
        &self,
        predicted: &[Option<BoundingBox>],
        track_idx: &[usize],
        detections: &[Detection],
        det_idx: &[usize],
        gate: f64,
    ) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        if track_idx.is_empty() || det_idx.is_empty() {
            return (Vec::new(), track_idx.to_vec(), det_idx.to_vec());
        }
        let track_boxes: Vec<BoundingBox> = track_idx
            .iter()
            .map(|&i| predicted[i].expect("pool only holds projectable tracks"))
            .collect();
        let det_boxes: Vec<BoundingBox> = det_idx.iter().map(|&j| detections[j].bbox).collect();
        let costs = cost_matrix(&track_boxes, &det_boxes, &self.config.shape_params);
        let result = assignment::solve(&costs, gate);
        (
            result
                .matches
                .iter()
                .map(|&(r, c)| (track_idx[r], det_idx[c]))
                .collect(),
            result.unmatched_rows.iter().map(|&r| track_idx[r]).collect(),
            result.unmatched_cols.iter().map(|&c| det_idx[c]).collect(),
        )
    }
}

/// Runs a fresh tracker over every frame in ascending order.
pub fn run_sequence(
    detections_by_frame: &BTreeMap<u64, Vec<Detection>>,
    config: &TrackerConfig,
) -> Result<Vec<FrameResult>, TrackerError> {
    let mut tracker = Tracker::new(*config)?;
    detections_by_frame
        .iter()
        .map(|(&frame, dets)| {
            tracker.step(frame, dets).map_err(|e| TrackerError::AtFrame {
                frame,
                source: Box::new(e),
            })
        })
        .collect()
}
