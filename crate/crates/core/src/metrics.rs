//! CLEAR-MOT accuracy and identity F1.
//!
//! Per frame, ground truth and hypotheses correspond when their IoU is at
//! least the match threshold. Pairs matched in an earlier frame are kept
//! while they stay above threshold; the rest are assigned with the
//! Hungarian solver on `1 - IoU`. Identity metrics use a single global
//! one-to-one matching of ground-truth ids to hypothesis ids that
//! maximises the number of co-detected frames.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment;
use crate::geometry::{iou, BoundingBox};
use crate::tracker::TrackId;

/// Boxes with identities, keyed by frame.
pub type FrameBoxes = BTreeMap<u64, Vec<(TrackId, BoundingBox)>>;

pub const DEFAULT_IOU_MATCH_THRESH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ground truth is empty, MOTA is undefined")]
    EmptyGroundTruth,
    #[error("IoU match threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("malformed report CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub frame: u64,
    pub gt: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Fractions; multiply by 100 for the usual percentages.
    pub mota: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idsw: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gt_count: usize,
    pub matches: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub frames: usize,
    #[serde(skip)]
    pub per_frame: Vec<FrameCounts>,
}

const CSV_COLUMNS: [&str; 13] = [
    "mota", "idf1", "idp", "idr", "idsw", "fp", "fn", "gt_count", "matches", "idtp", "idfp",
    "idfn", "frames",
];

impl MetricsReport {
    /// Builds a report from raw counts; every ratio is derived here.
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        gt_count: usize,
        hyp_count: usize,
        fp: usize,
        fn_: usize,
        idsw: usize,
        matches: usize,
        idtp: usize,
        frames: usize,
    ) -> Self {
        let idfp = hyp_count - idtp;
        let idfn = gt_count - idtp;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            mota: 1.0 - (fn_ + fp + idsw) as f64 / gt_count as f64,
            idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
            idp: ratio(idtp, idtp + idfp),
            idr: ratio(idtp, idtp + idfn),
            idsw,
            fp,
            fn_,
            gt_count,
            matches,
            idtp,
            idfp,
            idfn,
            frames,
            per_frame: Vec::new(),
        }
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    /// Single data row; floats print with round-trip precision.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mota,
            self.idf1,
            self.idp,
            self.idr,
            self.idsw,
            self.fp,
            self.fn_,
            self.gt_count,
            self.matches,
            self.idtp,
            self.idfp,
            self.idfn,
            self.frames
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::csv_header(), self.to_csv_row())
    }

    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MetricsError::Csv("missing header".into()))?;
        if header.trim() != Self::csv_header() {
            return Err(MetricsError::Csv(format!("unexpected header {header:?}")));
        }
        let row = lines.next().ok_or_else(|| MetricsError::Csv("missing data row".into()))?;
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != CSV_COLUMNS.len() {
            return Err(MetricsError::Csv(format!(
                "expected {} fields, found {}",
                CSV_COLUMNS.len(),
                fields.len()
            )));
        }
        let f = |i: usize| -> Result<f64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("{}: bad number {:?}", CSV_COLUMNS[i], fields[i])))
        };
        let u = |i: usize| -> Result<usize, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("{}: bad count {:?}", CSV_COLUMNS[i], fields[i])))
        };
        Ok(Self {
            mota: f(0)?,
            idf1: f(1)?,
            idp: f(2)?,
            idr: f(3)?,
            idsw: u(4)?,
            fp: u(5)?,
            fn_: u(6)?,
            gt_count: u(7)?,
            matches: u(8)?,
            idtp: u(9)?,
            idfp: u(10)?,
            idfn: u(11)?,
            frames: u(12)?,
            per_frame: Vec::new(),
        })
    }

    /// Human-readable `key: value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "MOTA:     {:.1}%", self.mota * 100.0);
        let _ = writeln!(s, "IDF1:     {:.1}%", self.idf1 * 100.0);
        let _ = writeln!(s, "IDP:      {:.1}%", self.idp * 100.0);
        let _ = writeln!(s, "IDR:      {:.1}%", self.idr * 100.0);
        let _ = writeln!(s, "IDSW:     {}", self.idsw);
        let _ = writeln!(s, "FP:       {}", self.fp);
        let _ = writeln!(s, "FN:       {}", self.fn_);
        let _ = writeln!(s, "GT:       {}", self.gt_count);
        let _ = writeln!(s, "Matches:  {}", self.matches);
        let _ = writeln!(s, "Frames:   {}", self.frames);
        s
    }
}

fn iou_matrix(gt: &[(TrackId, BoundingBox)], hyp: &[(TrackId, BoundingBox)]) -> DMatrix<f64> {
    DMatrix::from_fn(gt.len(), hyp.len(), |i, j| iou(&gt[i].1, &hyp[j].1))
}

/// Scores `results` against `gt`.
pub fn evaluate(
    gt: &FrameBoxes,
    results: &FrameBoxes,
    iou_match_thresh: f64,
) -> Result<MetricsReport, MetricsError> {
    if !(iou_match_thresh > 0.0 && iou_match_thresh <= 1.0) {
        return Err(MetricsError::InvalidThreshold(iou_match_thresh));
    }
    let gt_count: usize = gt.values().map(Vec::len).sum();
    if gt_count == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let hyp_count: usize = results.values().map(Vec::len).sum();

    let empty = Vec::new();
    let mut frames: Vec<u64> = gt.keys().chain(results.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let mut last_match: HashMap<TrackId, TrackId> = HashMap::new();
    let mut per_frame = Vec::with_capacity(frames.len());
    let (mut fp, mut fn_, mut idsw, mut matches) = (0, 0, 0, 0);

    // Co-detection counts for identity matching.
    let mut gt_ids: BTreeMap<TrackId, usize> = BTreeMap::new();
    let mut hyp_ids: BTreeMap<TrackId, usize> = BTreeMap::new();
    let mut overlap: HashMap<(TrackId, TrackId), usize> = HashMap::new();

    for &frame in &frames {
        let g = gt.get(&frame).unwrap_or(&empty);
        let h = results.get(&frame).unwrap_or(&empty);
        let ious = iou_matrix(g, h);

        for (i, &(gid, _)) in g.iter().enumerate() {
            let n = gt_ids.len();
            gt_ids.entry(gid).or_insert(n);
            for (j, &(hid, _)) in h.iter().enumerate() {
                if ious[(i, j)] >= iou_match_thresh {
                    *overlap.entry((gid, hid)).or_default() += 1;
                }
            }
        }
        for &(hid, _) in h {
            let n = hyp_ids.len();
            hyp_ids.entry(hid).or_insert(n);
        }

        let mut gt_taken = vec![false; g.len()];
        let mut hyp_taken = vec![false; h.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        // Keep last frame's correspondences that are still valid.
        for (i, &(gid, _)) in g.iter().enumerate() {
            let Some(&prev) = last_match.get(&gid) else {
                continue;
            };
            if let Some(j) = (0..h.len()).find(|&j| !hyp_taken[j] && h[j].0 == prev) {
                if ious[(i, j)] >= iou_match_thresh {
                    gt_taken[i] = true;
                    hyp_taken[j] = true;
                    pairs.push((i, j));
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !gt_taken[i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&j| !hyp_taken[j]).collect();
        let costs = DMatrix::from_fn(free_g.len(), free_h.len(), |a, b| {
            let v = ious[(free_g[a], free_h[b])];
            if v >= iou_match_thresh {
                1.0 - v
            } else {
                f64::INFINITY
            }
        });
        for (a, b) in assignment::solve(&costs, f64::MAX).matches {
            pairs.push((free_g[a], free_h[b]));
        }

        let mut switches = 0;
        for &(i, j) in &pairs {
            let (gid, hid) = (g[i].0, h[j].0);
            if let Some(prev) = last_match.insert(gid, hid) {
                if prev != hid {
                    switches += 1;
                }
            }
        }

        let counts = FrameCounts {
            frame,
            gt: g.len(),
            matches: pairs.len(),
            fp: h.len() - pairs.len(),
            fn_: g.len() - pairs.len(),
            idsw: switches,
        };
        fp += counts.fp;
        fn_ += counts.fn_;
        idsw += counts.idsw;
        matches += counts.matches;
        per_frame.push(counts);
    }

    let idtp = identity_true_positives(&gt_ids, &hyp_ids, &overlap);
    let mut report = MetricsReport::from_counts(
        gt_count,
        hyp_count,
        fp,
        fn_,
        idsw,
        matches,
        idtp,
        frames.len(),
    );
    report.per_frame = per_frame;
    Ok(report)
}

fn identity_true_positives(
    gt_ids: &BTreeMap<TrackId, usize>,
    hyp_ids: &BTreeMap<TrackId, usize>,
    overlap: &HashMap<(TrackId, TrackId), usize>,
) -> usize {
    if gt_ids.is_empty() || hyp_ids.is_empty() || overlap.is_empty() {
        return 0;
    }
    let mut weights = DMatrix::<f64>::zeros(gt_ids.len(), hyp_ids.len());
    for (&(g, h), &n) in overlap {
        weights[(gt_ids[&g], hyp_ids[&h])] = n as f64;
    }
    let top = weights.max();
    // Complete assignment on `top - w` maximises total co-detections.
    let costs = weights.map(|w| top - w);
    assignment::solve(&costs, f64::MAX)
        .matches
        .iter()
        .map(|&(r, c)| weights[(r, c)] as usize)
        .sum()
}
