use ndarray::Array2;
use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{PhysicalImage, Roi};

/// Direction in which the displacing phase advances in the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthDirection {
    #[default]
    Down,
    Up,
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TipConfig {
    /// Tips closer than this (pixels) to a deeper tip are dropped.
    pub min_spacing_px: f64,
    /// Minimum depth of a tip above the lower of its two flanking minima.
    pub min_prominence_px: f64,
}

impl Default for TipConfig {
    fn default() -> Self {
        Self { min_spacing_px: 10.0, min_prominence_px: 3.0 }
    }
}

/// Front depth per lateral position, measured along the growth direction
/// from the ROI edge the front starts at. `None` where the mask is empty.
fn front_profile(mask: &Array2<bool>, block: (usize, usize, usize, usize), dir: GrowthDirection) -> Vec<Option<usize>> {
    let (r0, r1, c0, c1) = block;
    let (depth, lateral) = match dir {
        GrowthDirection::Down | GrowthDirection::Up => (r1 - r0, c1 - c0),
        GrowthDirection::Left | GrowthDirection::Right => (c1 - c0, r1 - r0),
    };
    (0..lateral)
        .map(|j| {
            (0..depth).rev().find(|&i| {
                let (r, c) = to_pixel(block, dir, i, j);
                mask[[r, c]]
            })
        })
        .collect()
}

fn to_pixel(block: (usize, usize, usize, usize), dir: GrowthDirection, i: usize, j: usize) -> (usize, usize) {
    let (r0, r1, c0, c1) = block;
    match dir {
        GrowthDirection::Down => (r0 + i, c0 + j),
        GrowthDirection::Up => (r1 - 1 - i, c0 + j),
        GrowthDirection::Right => (r0 + j, c0 + i),
        GrowthDirection::Left => (r0 + j, c1 - 1 - i),
    }
}

/// Plateau-aware strict local maxima of `p` with their prominence, as
/// `(first, last, value, prominence)`. Plateaus touching either end are
/// not maxima.
pub(crate) fn profile_peaks(p: &[f64]) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    let n = p.len();
    let mut a = 0;
    while a < n {
        let v = p[a];
        let mut b = a;
        while b + 1 < n && p[b + 1] == v {
            b += 1;
        }
        if a > 0 && b + 1 < n && p[a - 1] < v && p[b + 1] < v {
            let mut left_min = v;
            for k in (0..a).rev() {
                if p[k] > v {
                    break;
                }
                left_min = left_min.min(p[k]);
            }
            let mut right_min = v;
            for &x in &p[b + 1..] {
                if x > v {
                    break;
                }
                right_min = right_min.min(x);
            }
            out.push((a, b, v, v - left_min.max(right_min)));
        }
        a = b + 1;
    }
    out
}

/// Finger tips of a binary mask: prominent local extrema of the front
/// along the growth direction, in physical coordinates, deepest first.
pub fn detect_finger_tips(mask: &PhysicalImage, roi: Option<&Roi>, dir: GrowthDirection, cfg: &TipConfig) -> Result<Vec<[f64; 2]>> {
    let m = mask.mask()?;
    let block = match roi {
        Some(roi) => roi.block(mask)?,
        None => (0, mask.rows(), 0, mask.cols()),
    };
    if block.0 >= block.1 || block.2 >= block.3 {
        return Err(Error::EmptyRoi);
    }
    let profile: Vec<f64> = front_profile(&m, block, dir).into_iter().map(|d| d.map_or(-1.0, |d| d as f64)).collect();
    let mut candidates: Vec<(f64, f64)> = profile_peaks(&profile)
        .into_iter()
        .filter(|&(_, _, _, prom)| prom >= cfg.min_prominence_px)
        .map(|(a, b, v, _)| (v, 0.5 * (a + b) as f64))
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| ((k.0 - c.0).powi(2) + (k.1 - c.1).powi(2)).sqrt() >= cfg.min_spacing_px) {
            kept.push(c);
        }
    }
    let (r0, r1, c0, c1) = block;
    Ok(kept
        .into_iter()
        .map(|(i, j)| {
            let (row, col) = match dir {
                GrowthDirection::Down => (r0 as f64 + i, c0 as f64 + j),
                GrowthDirection::Up => ((r1 - 1) as f64 - i, c0 as f64 + j),
                GrowthDirection::Right => (r0 as f64 + j, c0 as f64 + i),
                GrowthDirection::Left => (r0 as f64 + j, (c1 - 1) as f64 - i),
            };
            mask.coords().continuous_to_phys(row, col)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipFrame {
    pub time: f64,
    pub tips: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub time: f64,
    pub position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub points: Vec<TrackPoint>,
    /// Path length in meters.
    pub length: f64,
    /// Length relative to the longest trajectory.
    pub weight: f64,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Pairs `from[i]` with `to[j]` within `max_hop`, maximizing the number of
/// pairs and then minimizing their total distance.
fn associate(from: &[[f64; 2]], to: &[[f64; 2]], max_hop: f64) -> Vec<(usize, usize)> {
    if from.is_empty() || to.is_empty() {
        return Vec::new();
    }
    const UNIT: f64 = 1e9;
    let forbidden = (UNIT as i64 + 1) * (from.len().min(to.len()) as i64 + 1);
    let cost = |i: usize, j: usize| {
        let d = distance(from[i], to[j]);
        if d <= max_hop {
            (d / max_hop * UNIT).round() as i64
        } else {
            forbidden
        }
    };
    let transpose = from.len() > to.len();
    let (n, m) = if transpose { (to.len(), from.len()) } else { (from.len(), to.len()) };
    let rows: Vec<Vec<i64>> =
        (0..n).map(|a| (0..m).map(|b| if transpose { cost(b, a) } else { cost(a, b) }).collect()).collect();
    let matrix = Matrix::from_rows(rows).expect("rectangular cost matrix");
    let (_, assignment) = kuhn_munkres_min(&matrix);
    assignment
        .into_iter()
        .enumerate()
        .map(|(a, b)| if transpose { (b, a) } else { (a, b) })
        .filter(|&(i, j)| distance(from[i], to[j]) <= max_hop)
        .collect()
}

/// Links tips of consecutive frames into trajectories. A trajectory ends
/// when none of the next frame's tips lies within `max_hop` (meters) of its
/// last point; unmatched tips start new trajectories.
pub fn track_fingers(frames: &[TipFrame], max_hop: f64) -> Result<Vec<Trajectory>> {
    if !(max_hop > 0.0 && max_hop.is_finite()) {
        return Err(Error::invalid("hop radius must be positive"));
    }
    if frames.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::invalid("frame times must be strictly increasing"));
    }
    let mut tracks: Vec<Trajectory> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for frame in frames {
        let mut tips = frame.tips.clone();
        tips.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let last: Vec<[f64; 2]> = active.iter().map(|&t| tracks[t].points.last().unwrap().position).collect();
        let pairs = associate(&last, &tips, max_hop);
        let mut next_active = Vec::with_capacity(tips.len());
        let mut taken = vec![false; tips.len()];
        for (i, j) in pairs {
            let t = active[i];
            tracks[t].points.push(TrackPoint { time: frame.time, position: tips[j] });
            taken[j] = true;
            next_active.push(t);
        }
        for (tip, _) in tips.iter().zip(&taken).filter(|(_, t)| !**t) {
            tracks.push(Trajectory { id: tracks.len(), points: vec![TrackPoint { time: frame.time, position: *tip }], length: 0.0, weight: 0.0 });
            next_active.push(tracks.len() - 1);
        }
        next_active.sort_unstable();
        active = next_active;
    }
    for t in &mut tracks {
        t.length = t.points.windows(2).map(|w| distance(w[0].position, w[1].position)).sum();
    }
    let longest = tracks.iter().map(|t| t.length).fold(0.0, f64::max);
    if longest > 0.0 {
        for t in &mut tracks {
            t.weight = t.length / longest;
        }
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_and_prominence() {
        let p = [0.0, 1.0, 5.0, 5.0, 2.0, 4.0, 1.0];
        let peaks = profile_peaks(&p);
        assert_eq!(peaks, vec![(2, 3, 5.0, 4.0), (5, 5, 4.0, 2.0)]);
        assert!(profile_peaks(&[3.0; 10]).is_empty());
        assert!(profile_peaks(&[5.0, 4.0, 3.0]).is_empty());
    }

    #[test]
    fn crossing_tips_use_minimum_total_displacement() {
        // closest pair first would take (1.5,0)->(1,0) and strand (0,0)
        let from = [[0.0, 0.0], [1.5, 0.0]];
        let to = [[1.0, 0.0], [3.4, 0.0]];
        let pairs = associate(&from, &to, 2.0);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        let from = [[0.0, 0.0], [2.0, 0.0]];
        let to = [[1.1, 0.0], [2.2, 0.0]];
        assert_eq!(associate(&from, &to, 1.5), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn tracks_grow_and_weigh() {
        let frames: Vec<TipFrame> =
            (0..4).map(|k| TipFrame { time: k as f64, tips: vec![[0.0, -(k as f64)], [5.0, -0.5 * k as f64]] }).collect();
        let tracks = track_fingers(&frames, 1.5).unwrap();
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].length, 3.0);
        assert_eq!(tracks[0].weight, 1.0);
        assert_eq!(tracks[1].weight, 0.5);
    }
}
