//! MOTChallenge text files.
//!
//! Every line is `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
//! Ground-truth files from MOT17 ship only nine columns (class and
//! visibility in place of `x,y`); missing trailing fields read as `-1`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{BoundingBox, Detection};
use crate::tracker::{FrameResult, TrackId, TrackerConfig};

#[derive(Debug, Error)]
pub enum MotIoError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate ground-truth entry for frame {frame}, id {id}")]
    DuplicateId { line: usize, frame: u64, id: i64 },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<MotIoError>,
    },
}

impl MotIoError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        MotIoError::Parse {
            line,
            message: message.into(),
        }
    }

    fn in_file(self, path: &Path) -> Self {
        MotIoError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

/// One MOTChallenge row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u64,
    pub id: i64,
    pub bb_left: f64,
    pub bb_top: f64,
    pub bb_width: f64,
    pub bb_height: f64,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MotRecord {
    pub fn detection(frame: u64, bbox: &BoundingBox, conf: f64) -> Self {
        Self::with_id(frame, -1, bbox, conf)
    }

    pub fn with_id(frame: u64, id: i64, bbox: &BoundingBox, conf: f64) -> Self {
        let [l, t, w, h] = bbox.to_tlwh();
        Self {
            frame,
            id,
            bb_left: l,
            bb_top: t,
            bb_width: w,
            bb_height: h,
            conf,
            x: -1.0,
            y: -1.0,
            z: -1.0,
        }
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        if self.bb_width > 0.0 && self.bb_height > 0.0 {
            BoundingBox::from_tlwh(self.bb_left, self.bb_top, self.bb_width, self.bb_height).ok()
        } else {
            None
        }
    }
}

fn fmt_placeholder(out: &mut String, v: f64) {
    let s = format!("{v:.2}");
    if s == "-1.00" {
        out.push_str("-1");
    } else {
        out.push_str(&s);
    }
}

/// Canonical single-line rendering (no trailing newline).
pub fn format_record(r: &MotRecord) -> String {
    let mut s = String::with_capacity(64);
    let _ = write!(
        s,
        "{},{},{:.2},{:.2},{:.2},{:.2},{:.4},",
        r.frame, r.id, r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf
    );
    fmt_placeholder(&mut s, r.x);
    s.push(',');
    fmt_placeholder(&mut s, r.y);
    s.push(',');
    fmt_placeholder(&mut s, r.z);
    s
}

pub fn format_records(records: &[MotRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

fn parse_number(line: usize, name: &str, raw: &str) -> Result<f64, MotIoError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| MotIoError::parse(line, format!("{name}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(MotIoError::parse(line, format!("{name}: {raw:?} is not finite")));
    }
    Ok(v)
}

fn parse_integer(line: usize, name: &str, raw: &str) -> Result<i64, MotIoError> {
    let v = parse_number(line, name, raw)?;
    if v.fract() != 0.0 || v.abs() > 9.0e15 {
        return Err(MotIoError::parse(line, format!("{name}: {raw:?} is not an integer")));
    }
    Ok(v as i64)
}

/// Parses one non-empty line (1-based `line` for error messages).
pub fn parse_record(line: usize, text: &str) -> Result<MotRecord, MotIoError> {
    let fields: Vec<&str> = text.split(',').collect();
    if !(7..=10).contains(&fields.len()) {
        return Err(MotIoError::parse(
            line,
            format!("expected 7 to 10 comma-separated fields, found {}", fields.len()),
        ));
    }
    let frame = parse_integer(line, "frame", fields[0])?;
    if frame < 1 {
        return Err(MotIoError::parse(line, format!("frame must be >= 1, got {frame}")));
    }
    let opt = |i: usize, name: &str| -> Result<f64, MotIoError> {
        fields.get(i).map_or(Ok(-1.0), |raw| parse_number(line, name, raw))
    };
    Ok(MotRecord {
        frame: frame as u64,
        id: parse_integer(line, "id", fields[1])?,
        bb_left: parse_number(line, "bb_left", fields[2])?,
        bb_top: parse_number(line, "bb_top", fields[3])?,
        bb_width: parse_number(line, "bb_width", fields[4])?,
        bb_height: parse_number(line, "bb_height", fields[5])?,
        conf: parse_number(line, "conf", fields[6])?,
        x: opt(7, "x")?,
        y: opt(8, "y")?,
        z: opt(9, "z")?,
    })
}

/// Parses every non-blank line, returning `(line number, record)` pairs.
pub fn parse_records(text: &str) -> Result<Vec<(usize, MotRecord)>, MotIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(i + 1, l.trim()).map(|r| (i + 1, r)))
        .collect()
}

fn read_text(path: &Path) -> Result<String, MotIoError> {
    let bytes = fs::read(path).map_err(|source| MotIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| {
        MotIoError::parse(0, format!("file is not valid UTF-8: {e}")).in_file(path)
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), MotIoError> {
    fs::write(path, text).map_err(|source| MotIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Detections grouped by frame, with counts of rows that needed fixing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub frames: BTreeMap<u64, Vec<Detection>>,
    /// Rows whose confidence was clamped into `[0, 1]`.
    pub clamped_scores: usize,
    /// Rows dropped for a non-positive width or height.
    pub rejected_rows: usize,
}

pub fn parse_detections(text: &str) -> Result<DetectionSet, MotIoError> {
    let mut set = DetectionSet::default();
    for (_, r) in parse_records(text)? {
        let Some(bbox) = r.bbox() else {
            set.rejected_rows += 1;
            continue;
        };
        let score = r.conf.clamp(0.0, 1.0);
        if score != r.conf {
            set.clamped_scores += 1;
        }
        set.frames
            .entry(r.frame)
            .or_default()
            .push(Detection { bbox, score });
    }
    Ok(set)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionSet, MotIoError> {
    let path = path.as_ref();
    parse_detections(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn format_detections(frames: &BTreeMap<u64, Vec<Detection>>) -> String {
    let records: Vec<MotRecord> = frames
        .iter()
        .flat_map(|(&f, dets)| dets.iter().map(move |d| MotRecord::detection(f, &d.bbox, d.score)))
        .collect();
    format_records(&records)
}

pub fn write_detections(
    path: impl AsRef<Path>,
    frames: &BTreeMap<u64, Vec<Detection>>,
) -> Result<(), MotIoError> {
    write_text(path.as_ref(), &format_detections(frames))
}

pub fn format_results(results: &[FrameResult]) -> String {
    let mut ordered: Vec<&FrameResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.frame_index);
    let records: Vec<MotRecord> = ordered
        .iter()
        .flat_map(|r| {
            r.outputs
                .iter()
                .map(|o| MotRecord::with_id(r.frame_index, o.track_id as i64, &o.bbox, o.score))
        })
        .collect();
    format_records(&records)
}

pub fn write_results(path: impl AsRef<Path>, results: &[FrameResult]) -> Result<(), MotIoError> {
    write_text(path.as_ref(), &format_results(results))
}

/// Tracker output keyed by frame, as read back from a result file.
pub type ResultMap = BTreeMap<u64, Vec<(TrackId, BoundingBox)>>;

pub fn parse_results(text: &str) -> Result<ResultMap, MotIoError> {
    let mut map = ResultMap::new();
    for (line, r) in parse_records(text)? {
        if r.id < 1 {
            return Err(MotIoError::parse(line, format!("result id must be >= 1, got {}", r.id)));
        }
        let bbox = r
            .bbox()
            .ok_or_else(|| MotIoError::parse(line, "result box has non-positive size"))?;
        map.entry(r.frame).or_default().push((r.id as TrackId, bbox));
    }
    Ok(map)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultMap, MotIoError> {
    let path = path.as_ref();
    parse_results(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Turns tracker output into the same shape [`read_results`] returns.
pub fn results_to_map(results: &[FrameResult]) -> ResultMap {
    let mut map = ResultMap::new();
    for r in results {
        if r.outputs.is_empty() {
            continue;
        }
        map.entry(r.frame_index)
            .or_default()
            .extend(r.outputs.iter().map(|o| (o.track_id, o.bbox)));
    }
    map
}

/// One ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtObject {
    pub id: TrackId,
    pub bbox: BoundingBox,
    /// False for rows the evaluation must ignore (consider flag 0 or a
    /// non-pedestrian class).
    pub evaluable: bool,
}

pub type GroundTruth = BTreeMap<u64, Vec<GtObject>>;

/// MOT17 marks rows to ignore with `conf == 0`; class 1 is pedestrian and
/// `-1` means the class column is absent.
fn is_evaluable(r: &MotRecord) -> bool {
    r.conf != 0.0 && (r.x == -1.0 || r.x == 1.0)
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth, MotIoError> {
    let mut gt = GroundTruth::new();
    let mut seen: BTreeMap<(u64, i64), usize> = BTreeMap::new();
    for (line, r) in parse_records(text)? {
        if r.id < 1 {
            return Err(MotIoError::parse(line, format!("ground-truth id must be >= 1, got {}", r.id)));
        }
        match seen.entry((r.frame, r.id)) {
            Entry::Occupied(_) => {
                return Err(MotIoError::DuplicateId {
                    line,
                    frame: r.frame,
                    id: r.id,
                })
            }
            Entry::Vacant(v) => {
                v.insert(line);
            }
        }
        let bbox = r
            .bbox()
            .ok_or_else(|| MotIoError::parse(line, "ground-truth box has non-positive size"))?;
        gt.entry(r.frame).or_default().push(GtObject {
            id: r.id as TrackId,
            bbox,
            evaluable: is_evaluable(&r),
        });
    }
    Ok(gt)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, MotIoError> {
    let path = path.as_ref();
    parse_ground_truth(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn format_ground_truth(gt: &GroundTruth) -> String {
    let records: Vec<MotRecord> = gt
        .iter()
        .flat_map(|(&f, objs)| {
            objs.iter().map(move |o| {
                let conf = if o.evaluable { 1.0 } else { 0.0 };
                MotRecord::with_id(f, o.id as i64, &o.bbox, conf)
            })
        })
        .collect();
    format_records(&records)
}

pub fn write_ground_truth(path: impl AsRef<Path>, gt: &GroundTruth) -> Result<(), MotIoError> {
    write_text(path.as_ref(), &format_ground_truth(gt))
}

/// Drops non-evaluable rows and returns plain `(id, box)` lists.
pub fn evaluable_ground_truth(gt: &GroundTruth) -> BTreeMap<u64, Vec<(TrackId, BoundingBox)>> {
    gt.iter()
        .map(|(&f, objs)| {
            (
                f,
                objs.iter()
                    .filter(|o| o.evaluable)
                    .map(|o| (o.id, o.bbox))
                    .collect::<Vec<_>>(),
            )
        })
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

/// Loads a TOML tracker config. Missing keys keep their defaults.
pub fn read_config(path: impl AsRef<Path>) -> Result<TrackerConfig, MotIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MotIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: TrackerConfig = toml::from_str(&text).map_err(|e| MotIoError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate().map_err(|e| MotIoError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(config)
}

pub fn config_to_toml(config: &TrackerConfig) -> String {
    toml::to_string(config).expect("tracker config is always serializable")
}
