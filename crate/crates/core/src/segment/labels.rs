use std::path::Path;

use image::{ImageBuffer, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::CoordinateSystem;

/// Integer labels `0..label_count` covering every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    labels: Array2<u32>,
    label_count: usize,
    coords: CoordinateSystem,
}

#[derive(Serialize, Deserialize)]
struct LabelSidecar {
    label_count: usize,
    coords: CoordinateSystem,
}

impl LabelMap {
    /// Validates that labels form the contiguous range `0..label_count`.
    pub fn new(labels: Array2<u32>, coords: CoordinateSystem) -> Result<Self> {
        if labels.dim() != (coords.rows, coords.cols) {
            return Err(Error::mismatch(format!("labels are {:?}, grid is {}x{}", labels.dim(), coords.rows, coords.cols)));
        }
        let max = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut seen = vec![false; max + 1];
        for &l in labels.iter() {
            seen[l as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("labels are not a contiguous range starting at 0"));
        }
        Ok(Self { labels, label_count: max + 1, coords })
    }

    /// Single label covering the grid.
    pub fn uniform(coords: CoordinateSystem) -> Self {
        Self { labels: Array2::zeros((coords.rows, coords.cols)), label_count: 1, coords }
    }

    /// Renumbers arbitrary labels to `0..n` in raster order of first
    /// appearance.
    pub fn relabel(raw: &Array2<u32>, coords: CoordinateSystem) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = raw.mapv(|l| {
            let n = map.len() as u32;
            *map.entry(l).or_insert(n)
        });
        Self::new(labels, coords)
    }

    pub fn labels(&self) -> &Array2<u32> {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn get(&self, r: usize, c: usize) -> usize {
        self.labels[[r, c]] as usize
    }

    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.label_count];
        for &l in self.labels.iter() {
            n[l as usize] += 1;
        }
        n
    }

    /// Writes a 16-bit single-channel PNG plus a `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.label_count > u16::MAX as usize + 1 {
            return Err(Error::invalid("too many labels for a 16-bit raster"));
        }
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            self.coords.cols as u32,
            self.coords.rows as u32,
            self.labels.iter().map(|&l| l as u16).collect(),
        )
        .ok_or_else(|| Error::invalid("raster size"))?;
        buf.save(path)?;
        let sidecar = LabelSidecar { label_count: self.label_count, coords: self.coords };
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sc_path = path.with_extension("json");
        let text = std::fs::read_to_string(&sc_path).map_err(|e| Error::Sidecar { path: sc_path.clone(), reason: e.to_string() })?;
        let sc: LabelSidecar = serde_json::from_str(&text).map_err(|e| Error::Sidecar { path: sc_path.clone(), reason: e.to_string() })?;
        let img = image::open(path)?.to_luma16();
        if (img.height() as usize, img.width() as usize) != (sc.coords.rows, sc.coords.cols) {
            return Err(Error::Sidecar { path: sc_path, reason: "raster size differs from sidecar".into() });
        }
        let labels = Array2::from_shape_fn((sc.coords.rows, sc.coords.cols), |(r, c)| img.get_pixel(c as u32, r as u32)[0] as u32);
        let map = Self::new(labels, sc.coords)?;
        if map.label_count != sc.label_count {
            return Err(Error::Sidecar { path: sc_path, reason: "label count differs from sidecar".into() });
        }
        Ok(map)
    }
}

/// 4-connected components of `mask`, numbered from 1 in raster order; 0 is
/// background. Returns the labels and the component count.
pub fn connected_components(mask: &Array2<bool>) -> (Array2<u32>, usize) {
    let (rows, cols) = mask.dim();
    let mut out = Array2::zeros((rows, cols));
    let mut n = 0u32;
    let mut stack = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !mask[[r, c]] || out[[r, c]] != 0 {
                continue;
            }
            n += 1;
            out[[r, c]] = n;
            stack.push((r, c));
            while let Some((y, x)) = stack.pop() {
                for (ny, nx) in neighbors(y, x, rows, cols) {
                    if mask[[ny, nx]] && out[[ny, nx]] == 0 {
                        out[[ny, nx]] = n;
                        stack.push((ny, nx));
                    }
                }
            }
        }
    }
    (out, n as usize)
}

/// 4-neighbors in the order up, left, right, down.
pub(crate) fn neighbors(r: usize, c: usize, rows: usize, cols: usize) -> impl Iterator<Item = (usize, usize)> {
    let cand = [
        (r > 0).then(|| (r.wrapping_sub(1), c)),
        (c > 0).then(|| (r, c.wrapping_sub(1))),
        (c + 1 < cols).then_some((r, c + 1)),
        (r + 1 < rows).then_some((r + 1, c)),
    ];
    cand.into_iter().flatten()
}

/// Drops 4-connected components of `mask` smaller than `min_pixels`.
pub fn remove_small_components(mask: &Array2<bool>, min_pixels: usize) -> Array2<bool> {
    if min_pixels <= 1 {
        return mask.clone();
    }
    let (cc, n) = connected_components(mask);
    let mut sizes = vec![0usize; n + 1];
    for &l in cc.iter() {
        sizes[l as usize] += 1;
    }
    cc.mapv(|l| l != 0 && sizes[l as usize] >= min_pixels)
}
