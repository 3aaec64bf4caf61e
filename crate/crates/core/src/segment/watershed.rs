use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::labels::{connected_components, neighbors, LabelMap};
use crate::error::{Error, Result};
use crate::imgcore::{intensity_plane, PhysicalImage};
use crate::regularize::{tv_denoise_plane, RegularizationConfig};

/// Gradient modulus per pixel, relative to the intensity range, below which
/// a pixel always qualifies as a marker.
pub const FLAT_GRADIENT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WatershedConfig {
    /// TV smoothing strength in meters; 0 disables smoothing.
    pub mu: f64,
    /// Pixels with gradient modulus at or below this quantile seed markers.
    pub marker_quantile: f64,
    /// Adjacent regions whose mean intensities differ by less than this are
    /// merged.
    pub merge_tol: f64,
    pub max_iter: usize,
}

impl Default for WatershedConfig {
    fn default() -> Self {
        Self { mu: 0.0, marker_quantile: 0.2, merge_tol: 0.05, max_iter: 500 }
    }
}

/// Central-difference gradient modulus per pixel (one-sided at the border).
pub fn gradient_modulus(plane: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = plane.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let d = |a: f64, b: f64, span: usize| if span == 0 { 0.0 } else { (a - b) / span as f64 };
        let (c0, c1) = (c.saturating_sub(1), (c + 1).min(cols - 1));
        let (r0, r1) = (r.saturating_sub(1), (r + 1).min(rows - 1));
        let gx = d(plane[[r, c1]], plane[[r, c0]], c1 - c0);
        let gy = d(plane[[r1, c]], plane[[r0, c]], r1 - r0);
        gx.hypot(gy)
    })
}

#[derive(PartialEq)]
struct Entry {
    priority: f64,
    order: u64,
    pixel: (usize, usize),
    label: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (priority, insertion order)
        other.priority.total_cmp(&self.priority).then(other.order.cmp(&self.order))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Priority flood from the nonzero `markers`: unlabeled pixels are claimed
/// in order of `priority`, ties broken by insertion order, each taking the
/// label of the pixel that reached it first.
pub fn flood(priority: &Array2<f64>, markers: &Array2<u32>) -> Array2<u32> {
    let (rows, cols) = priority.dim();
    let mut labels = markers.clone();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    for r in 0..rows {
        for c in 0..cols {
            let l = labels[[r, c]];
            if l == 0 {
                continue;
            }
            for q in neighbors(r, c, rows, cols) {
                if labels[q] == 0 {
                    heap.push(Entry { priority: priority[q], order, pixel: q, label: l });
                    order += 1;
                }
            }
        }
    }
    while let Some(e) = heap.pop() {
        if labels[e.pixel] != 0 {
            continue;
        }
        labels[e.pixel] = e.label;
        let (r, c) = e.pixel;
        for q in neighbors(r, c, rows, cols) {
            if labels[q] == 0 {
                heap.push(Entry { priority: priority[q], order, pixel: q, label: e.label });
                order += 1;
            }
        }
    }
    labels
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges adjacent regions (labels `1..=n`) whose mean `values` differ by
/// less than `tol`, closest pair first. Returns a root per label.
fn merge_similar(labels: &Array2<u32>, n: usize, values: &Array2<f64>, tol: f64) -> Vec<usize> {
    let (rows, cols) = labels.dim();
    let mut sum = vec![0.0; n + 1];
    let mut count = vec![0usize; n + 1];
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
    for r in 0..rows {
        for c in 0..cols {
            let l = labels[[r, c]] as usize;
            sum[l] += values[[r, c]];
            count[l] += 1;
            for q in [(r + 1 < rows).then(|| (r + 1, c)), (c + 1 < cols).then(|| (r, c + 1))].into_iter().flatten() {
                let m = labels[q] as usize;
                if m != l {
                    adj[l].insert(m);
                    adj[m].insert(l);
                }
            }
        }
    }
    let mut parent: Vec<usize> = (0..=n).collect();
    let mean = |s: &[f64], k: &[usize], a: usize| s[a] / k[a] as f64;

    #[derive(PartialEq)]
    struct Pair(f64, usize, usize);
    impl Eq for Pair {}
    impl Ord for Pair {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1)).then(o.2.cmp(&self.2))
        }
    }
    impl PartialOrd for Pair {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }

    let mut heap = BinaryHeap::new();
    for a in 1..=n {
        for &b in adj[a].iter().filter(|&&b| b > a) {
            heap.push(Pair((mean(&sum, &count, a) - mean(&sum, &count, b)).abs(), a, b));
        }
    }
    while let Some(Pair(d, a, b)) = heap.pop() {
        if d >= tol {
            break;
        }
        if find(&mut parent, a) != a || find(&mut parent, b) != b {
            continue;
        }
        let now = (mean(&sum, &count, a) - mean(&sum, &count, b)).abs();
        if now != d {
            heap.push(Pair(now, a, b));
            continue;
        }
        let (keep, gone) = (a.min(b), a.max(b));
        parent[gone] = keep;
        sum[keep] += sum[gone];
        count[keep] += count[gone];
        let moved = std::mem::take(&mut adj[gone]);
        for m in moved {
            let root = find(&mut parent, m);
            if root != keep {
                adj[keep].insert(root);
            }
        }
        let current: Vec<usize> = adj[keep].iter().copied().collect();
        let mut fresh = BTreeSet::new();
        for m in current {
            let root = find(&mut parent, m);
            if root != keep && fresh.insert(root) {
                let (x, y) = (keep.min(root), keep.max(root));
                heap.push(Pair((mean(&sum, &count, keep) - mean(&sum, &count, root)).abs(), x, y));
            }
        }
        adj[keep] = fresh;
    }
    (0..=n).map(|l| find(&mut parent, l)).collect()
}

/// Facies labels: TV smoothing, gradient modulus, markers from the
/// low-gradient quantile, priority flood on the gradient, merging of
/// similar neighbors, contiguous relabeling.
pub fn watershed_labels(image: &PhysicalImage, cfg: &WatershedConfig) -> Result<LabelMap> {
    let cs = *image.coords();
    let raw = intensity_plane(image);
    let smooth = if cfg.mu > 0.0 {
        let rc = RegularizationConfig::with_mu(cfg.mu).iterations(cfg.max_iter, 1e-5);
        tv_denoise_plane(&raw.view(), &cs, &rc)?.0
    } else {
        raw
    };
    let grad = gradient_modulus(&smooth);
    let mut sorted: Vec<f64> = grad.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let q = cfg.marker_quantile;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("marker quantile {q} outside [0, 1]")));
    }
    // Smoothing leaves flat areas with tiny residual gradients; anything
    // below the flatness floor counts as flat so every plateau gets a seed.
    let range = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let level = sorted[((q * (sorted.len() - 1) as f64).floor()) as usize].max(FLAT_GRADIENT * range);
    let seeds = grad.mapv(|g| g <= level && q > 0.0);
    let (markers, n) = connected_components(&seeds);
    if n == 0 {
        return Err(Error::Degenerate("no watershed markers found; raise the marker quantile".into()));
    }
    let flooded = flood(&grad, &markers);
    let roots = merge_similar(&flooded, n, &smooth, cfg.merge_tol);
    let merged = flooded.mapv(|l| roots[l as usize] as u32);
    LabelMap::relabel(&merged, cs)
}
