//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the code under test except for plain data types.
//! Each oracle is written straight from the definition, favouring obvious
//! correctness over speed.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Axis-aligned box as `[left, top, width, height]`.
pub type Tlwh = [f64; 4];

pub fn overlap_1d(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

pub fn rect_iou(p: &Tlwh, q: &Tlwh) -> f64 {
    let ix = overlap_1d(p[0], p[0] + p[2], q[0], q[0] + q[2]);
    let iy = overlap_1d(p[1], p[1] + p[3], q[1], q[1] + q[3]);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (p[2] * p[3] + q[2] * q[3] - inter)
}

/// Direct evaluation of `1 - IoU + rho_h + rho_s`.
pub fn shape_iou(p: &Tlwh, q: &Tlwh, eps: f64, height: bool, area: bool) -> f64 {
    let top = p[1].min(q[1]);
    let bottom = (p[1] + p[3]).max(q[1] + q[3]);
    let left = p[0].min(q[0]);
    let right = (p[0] + p[2]).max(q[0] + q[2]);
    let hull_h = bottom - top;
    let hull_area = (right - left) * hull_h;

    let mut d = 1.0 - rect_iou(p, q);
    if height {
        d += (p[3] - q[3]).powi(2) / (hull_h + eps).powi(2);
    }
    if area {
        d += (p[2] * p[3] - q[2] * q[3]).powi(2) / (hull_area + eps).powi(2);
    }
    d
}

/// Best gated matching by exhaustive enumeration: most pairs first, then
/// lowest total cost. Returns `(pairs sorted by row, total cost)`. Costs are
/// accumulated in row order.
pub fn brute_force_assignment(costs: &[Vec<f64>], gate: f64) -> (Vec<(usize, usize)>, f64) {
    fn walk(
        costs: &[Vec<f64>],
        gate: f64,
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (Vec<(usize, usize)>, f64),
    ) {
        if row == costs.len() {
            let better = current.len() > best.0.len()
                || (current.len() == best.0.len() && cost < best.1);
            if better {
                *best = (current.clone(), cost);
            }
            return;
        }
        walk(costs, gate, row + 1, used, current, cost, best);
        for col in 0..used.len() {
            let c = costs[row][col];
            if used[col] || !(c.is_finite() && c <= gate) {
                continue;
            }
            used[col] = true;
            current.push((row, col));
            walk(costs, gate, row + 1, used, current, cost + c, best);
            current.pop();
            used[col] = false;
        }
    }

    let cols = costs.first().map_or(0, Vec::len);
    let mut best = (Vec::new(), 0.0);
    walk(costs, gate, 0, &mut vec![false; cols], &mut Vec::new(), 0.0, &mut best);
    best
}

/// `(id, box)` pairs per frame.
pub type Frames = BTreeMap<u64, Vec<(u64, Tlwh)>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClearCounts {
    pub gt: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub matches: usize,
    pub idtp: usize,
}

/// CLEAR accounting with match persistence, plus identity true positives.
///
/// Per frame: a ground-truth object keeps its most recent hypothesis if that
/// hypothesis is present with IoU at or above `thresh`; the remaining objects
/// and hypotheses are paired by enumerating every admissible matching and
/// taking the one with the most pairs and the least summed `1 - IoU`. A
/// switch is a match whose hypothesis differs from the object's previous one.
pub fn brute_force_clear(gt: &Frames, hyp: &Frames, thresh: f64) -> ClearCounts {
    let mut out = ClearCounts::default();
    let mut last: HashMap<u64, u64> = HashMap::new();
    let frames: BTreeSet<u64> = gt.keys().chain(hyp.keys()).copied().collect();
    let empty = Vec::new();

    for f in frames {
        let g = gt.get(&f).unwrap_or(&empty);
        let h = hyp.get(&f).unwrap_or(&empty);
        out.gt += g.len();
        let iou = |i: usize, j: usize| rect_iou(&g[i].1, &h[j].1);

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut g_used = vec![false; g.len()];
        let mut h_used = vec![false; h.len()];
        for i in 0..g.len() {
            let Some(&prev) = last.get(&g[i].0) else { continue };
            if let Some(j) = (0..h.len()).find(|&j| !h_used[j] && h[j].0 == prev) {
                if iou(i, j) >= thresh {
                    g_used[i] = true;
                    h_used[j] = true;
                    pairs.push((i, j));
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&j| !h_used[j]).collect();
        let costs: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&i| {
                free_h
                    .iter()
                    .map(|&j| {
                        let v = iou(i, j);
                        if v >= thresh { 1.0 - v } else { f64::INFINITY }
                    })
                    .collect()
            })
            .collect();
        let (extra, _) = brute_force_assignment(&costs, f64::MAX);
        pairs.extend(extra.into_iter().map(|(a, b)| (free_g[a], free_h[b])));

        for &(i, j) in &pairs {
            if let Some(prev) = last.insert(g[i].0, h[j].0) {
                if prev != h[j].0 {
                    out.idsw += 1;
                }
            }
        }
        out.matches += pairs.len();
        out.fp += h.len() - pairs.len();
        out.fn_ += g.len() - pairs.len();
    }

    out.idtp = brute_force_idtp(gt, hyp, thresh);
    out
}

/// Largest total co-detection count over one-to-one maps from ground-truth
/// ids to hypothesis ids, found by trying every such map.
pub fn brute_force_idtp(gt: &Frames, hyp: &Frames, thresh: f64) -> usize {
    let mut together: HashMap<(u64, u64), usize> = HashMap::new();
    for (f, g) in gt {
        let Some(h) = hyp.get(f) else { continue };
        for (gid, gb) in g {
            for (hid, hb) in h {
                if rect_iou(gb, hb) >= thresh {
                    *together.entry((*gid, *hid)).or_default() += 1;
                }
            }
        }
    }
    let gt_ids: Vec<u64> = gt.values().flatten().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let hyp_ids: Vec<u64> = hyp.values().flatten().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();

    fn best(
        k: usize,
        gt_ids: &[u64],
        hyp_ids: &[u64],
        used: &mut Vec<bool>,
        together: &HashMap<(u64, u64), usize>,
    ) -> usize {
        if k == gt_ids.len() {
            return 0;
        }
        let mut top = best(k + 1, gt_ids, hyp_ids, used, together);
        for j in 0..hyp_ids.len() {
            if used[j] {
                continue;
            }
            let n = together.get(&(gt_ids[k], hyp_ids[j])).copied().unwrap_or(0);
            if n == 0 {
                continue;
            }
            used[j] = true;
            top = top.max(n + best(k + 1, gt_ids, hyp_ids, used, together));
            used[j] = false;
        }
        top
    }
    best(0, &gt_ids, &hyp_ids, &mut vec![false; hyp_ids.len()], &together)
}

/// Random 5-object / 20-frame ground truth plus a degraded copy as results:
/// jittered boxes, dropped and spurious hypotheses, and id changes. Objects
/// share a small area so nearby boxes compete for matches.
pub fn random_clear_case(rng: &mut impl rand::Rng) -> (Frames, Frames) {
    const OBJECTS: u64 = 5;
    const FRAMES: u64 = 20;
    let mut gt = Frames::new();
    let mut hyp = Frames::new();
    let mut boxes: Vec<Tlwh> = (0..OBJECTS)
        .map(|_| {
            [
                rng.random_range(0.0..150.0),
                rng.random_range(0.0..150.0),
                rng.random_range(20.0..60.0),
                rng.random_range(20.0..60.0),
            ]
        })
        .collect();
    // Hypothesis id for each object; reassigned now and then.
    let mut labels: Vec<u64> = (1..=OBJECTS).map(|i| 100 + i).collect();
    let mut next_label = 200;

    for f in 1..=FRAMES {
        for b in &mut boxes {
            b[0] += rng.random_range(-8.0..8.0);
            b[1] += rng.random_range(-8.0..8.0);
            b[2] = (b[2] + rng.random_range(-3.0..3.0)).max(10.0);
            b[3] = (b[3] + rng.random_range(-3.0..3.0)).max(10.0);
        }
        if rng.random_bool(0.15) {
            let (a, b) = (rng.random_range(0..OBJECTS as usize), rng.random_range(0..OBJECTS as usize));
            labels.swap(a, b);
        }
        if rng.random_bool(0.1) {
            labels[rng.random_range(0..OBJECTS as usize)] = next_label;
            next_label += 1;
        }
        let g = gt.entry(f).or_default();
        let h = hyp.entry(f).or_default();
        for (k, b) in boxes.iter().enumerate() {
            if rng.random_bool(0.9) {
                g.push((k as u64 + 1, *b));
            }
            if rng.random_bool(0.85) {
                let s = rng.random_range(0.0..12.0);
                let jitter = [
                    b[0] + rng.random_range(-s..=s),
                    b[1] + rng.random_range(-s..=s),
                    (b[2] + rng.random_range(-s..=s)).max(5.0),
                    (b[3] + rng.random_range(-s..=s)).max(5.0),
                ];
                h.push((labels[k], jitter));
            }
        }
        for _ in 0..rng.random_range(0..3) {
            let fp = [
                rng.random_range(0.0..150.0),
                rng.random_range(0.0..150.0),
                rng.random_range(20.0..60.0),
                rng.random_range(20.0..60.0),
            ];
            h.push((next_label, fp));
            next_label += 1;
        }
    }
    gt.retain(|_, v| !v.is_empty());
    hyp.retain(|_, v| !v.is_empty());
    (gt, hyp)
}

/// Converts oracle frames into the library's per-frame box lists.
pub fn to_frame_boxes(frames: &Frames) -> sctrack::metrics::FrameBoxes {
    frames
        .iter()
        .map(|(&f, v)| {
            let boxes = v
                .iter()
                .map(|(id, b)| (*id, sctrack::BoundingBox::from_tlwh(b[0], b[1], b[2], b[3]).unwrap()))
                .collect();
            (f, boxes)
        })
        .collect()
}
