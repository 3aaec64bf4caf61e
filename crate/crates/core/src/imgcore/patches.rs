use ndarray::{s, Array3};

use super::{roi::extract_block, CoordinateSystem, PhysicalImage};
use crate::error::{Error, Result};

/// Split of one image axis into `n` tiles extended by `ext` pixels into each
/// interior neighbor.
#[derive(Clone, Debug, PartialEq)]
struct AxisSplit {
    /// Core tile boundaries, `n + 1` entries from 0 to the axis length.
    bounds: Vec<usize>,
    ext: usize,
}

impl AxisSplit {
    fn new(len: usize, n: usize, overlap: f64) -> Self {
        let bounds: Vec<usize> = (0..=n).map(|i| ((i as f64) * len as f64 / n as f64).round() as usize).collect();
        let min_core = bounds.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(len);
        let ext = if n > 1 { (overlap * min_core as f64).round() as usize } else { 0 };
        Self { bounds, ext }
    }

    fn n(&self) -> usize {
        self.bounds.len() - 1
    }

    fn extent(&self, i: usize) -> (usize, usize) {
        let lo = if i == 0 { 0 } else { self.bounds[i] - self.ext };
        let hi = if i + 1 == self.n() { self.bounds[i + 1] } else { self.bounds[i + 1] + self.ext };
        (lo, hi)
    }

    /// Blending weight of tile `i` at pixel `p`: a linear ramp across each
    /// interior band `[b - ext, b + ext)`, 1 in the tile core, 0 elsewhere.
    fn weight(&self, i: usize, p: usize) -> f64 {
        let (lo, hi) = self.extent(i);
        if p < lo || p >= hi {
            return 0.0;
        }
        let e = self.ext as f64;
        let pc = p as f64 + 0.5;
        if i > 0 && self.ext > 0 {
            let b = self.bounds[i];
            if p < b + self.ext {
                return (pc - (b as f64 - e)) / (2.0 * e);
            }
        }
        if i + 1 < self.n() && self.ext > 0 {
            let b = self.bounds[i + 1];
            if p >= b - self.ext {
                return 1.0 - (pc - (b as f64 - e)) / (2.0 * e);
            }
        }
        1.0
    }
}

/// Pixel blocks `(r0, r1, c0, c1)` of a `num_v x num_h` patch grid on a
/// `rows x cols` image, row-major from the top-left, each extended by
/// `overlap` times the smallest core size into interior neighbors.
pub fn patch_blocks(rows: usize, cols: usize, num_v: usize, num_h: usize, overlap: f64) -> Vec<(usize, usize, usize, usize)> {
    let rs = AxisSplit::new(rows, num_v.max(1), overlap);
    let cs = AxisSplit::new(cols, num_h.max(1), overlap);
    let mut out = Vec::with_capacity(num_v * num_h);
    for i in 0..rs.n() {
        let (r0, r1) = rs.extent(i);
        for j in 0..cs.n() {
            let (c0, c1) = cs.extent(j);
            out.push((r0, r1, c0, c1));
        }
    }
    out
}

/// Grid of possibly overlapping sub-images of a parent image.
///
/// Patch `(i, j)` is the `i`-th from the top and `j`-th from the left. The
/// blending weights are tensor products of per-axis linear ramps and sum to
/// one at every pixel.
#[derive(Clone, Debug)]
pub struct PatchSet {
    parent: CoordinateSystem,
    timestamp: Option<f64>,
    channels: usize,
    overlap: f64,
    rows: AxisSplit,
    cols: AxisSplit,
    patches: Vec<PhysicalImage>,
}

impl PatchSet {
    pub fn new(image: &PhysicalImage, num_v: usize, num_h: usize, overlap: f64) -> Result<Self> {
        if num_v == 0 || num_h == 0 {
            return Err(Error::invalid("patch counts must be at least 1"));
        }
        if !(0.0..0.5).contains(&overlap) {
            return Err(Error::invalid(format!("overlap {overlap} outside [0, 0.5)")));
        }
        let rows = AxisSplit::new(image.rows(), num_v, overlap);
        let cols = AxisSplit::new(image.cols(), num_h, overlap);
        let mut patches = Vec::with_capacity(num_v * num_h);
        for i in 0..num_v {
            let (r0, r1) = rows.extent(i);
            for j in 0..num_h {
                let (c0, c1) = cols.extent(j);
                if r1 - r0 < 2 || c1 - c0 < 2 {
                    return Err(Error::invalid(format!("patch ({i}, {j}) is smaller than 2x2 pixels")));
                }
                patches.push(extract_block(image, r0, r1, c0, c1)?);
            }
        }
        Ok(Self {
            parent: *image.coords(),
            timestamp: image.timestamp(),
            channels: image.channels(),
            overlap,
            rows,
            cols,
            patches,
        })
    }

    pub fn num_v(&self) -> usize {
        self.rows.n()
    }

    pub fn num_h(&self) -> usize {
        self.cols.n()
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn parent(&self) -> &CoordinateSystem {
        &self.parent
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> &PhysicalImage {
        &self.patches[i * self.num_h() + j]
    }

    /// Pixel block `(r0, r1, c0, c1)` of patch `(i, j)` within the parent.
    pub fn block(&self, i: usize, j: usize) -> (usize, usize, usize, usize) {
        let (r0, r1) = self.rows.extent(i);
        let (c0, c1) = self.cols.extent(j);
        (r0, r1, c0, c1)
    }

    /// Physical center of patch `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let (r0, r1, c0, c1) = self.block(i, j);
        self.parent.continuous_to_phys((r0 + r1) as f64 / 2.0 - 0.5, (c0 + c1) as f64 / 2.0 - 0.5)
    }

    /// Replaces patch `(i, j)`; the replacement must keep the patch shape.
    pub fn set(&mut self, i: usize, j: usize, patch: PhysicalImage) -> Result<()> {
        let idx = i * self.num_h() + j;
        let old = &self.patches[idx];
        if patch.rows() != old.rows() || patch.cols() != old.cols() || patch.channels() != old.channels() {
            return Err(Error::mismatch(format!(
                "patch ({i}, {j}) must stay {}x{}x{}, got {}x{}x{}",
                old.rows(),
                old.cols(),
                old.channels(),
                patch.rows(),
                patch.cols(),
                patch.channels()
            )));
        }
        let patch = PhysicalImage::from_parts_unchecked(patch.into_data(), *old.coords(), old.timestamp(), old.colorspace());
        self.patches[idx] = patch;
        Ok(())
    }

    /// Blending weight of patch `(i, j)` at parent pixel `(row, col)`.
    pub fn weight(&self, i: usize, j: usize, row: usize, col: usize) -> f64 {
        self.rows.weight(i, row) * self.cols.weight(j, col)
    }

    /// Convex combination of all patches covering each pixel.
    pub fn assemble(&self) -> Result<PhysicalImage> {
        let mut out = Array3::<f64>::zeros((self.parent.rows, self.parent.cols, self.channels));
        for i in 0..self.num_v() {
            for j in 0..self.num_h() {
                let (r0, r1, c0, c1) = self.block(i, j);
                let patch = self.get(i, j).data();
                if patch.dim() != (r1 - r0, c1 - c0, self.channels) {
                    return Err(Error::mismatch(format!("patch ({i}, {j}) shape changed")));
                }
                let mut target = out.slice_mut(s![r0..r1, c0..c1, ..]);
                for r in r0..r1 {
                    let wr = self.rows.weight(i, r);
                    if wr == 0.0 {
                        continue;
                    }
                    for c in c0..c1 {
                        let w = wr * self.cols.weight(j, c);
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..self.channels {
                            target[[r - r0, c - c0, k]] += w * patch[[r - r0, c - c0, k]];
                        }
                    }
                }
            }
        }
        let colorspace = self.patches[0].colorspace();
        if colorspace == super::ColorSpace::Binary {
            out.mapv_inplace(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        } else {
            out.mapv_inplace(|v| v.clamp(0.0, 1.0));
        }
        PhysicalImage::from_parts(out, self.parent, self.timestamp, colorspace)
    }
}

/// Convenience wrapper for [`PatchSet::new`].
pub fn make_patches(image: &PhysicalImage, num_v: usize, num_h: usize, overlap: f64) -> Result<PatchSet> {
    PatchSet::new(image, num_v, num_h, overlap)
}
