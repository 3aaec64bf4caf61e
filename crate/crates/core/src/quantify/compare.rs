use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, PhysicalImage};

/// Colors for regions covered by exactly one mask, cycled if there are more
/// masks than entries.
pub const PALETTE: [[f64; 3]; 10] = [
    [0.122, 0.467, 0.706],
    [1.000, 0.498, 0.055],
    [0.173, 0.627, 0.173],
    [0.839, 0.153, 0.157],
    [0.580, 0.404, 0.741],
    [0.549, 0.337, 0.294],
    [0.890, 0.467, 0.761],
    [0.737, 0.741, 0.133],
    [0.090, 0.745, 0.812],
    [0.498, 0.498, 0.498],
];

/// Gray level for regions covered by exactly `k >= 2` of `n` masks: light
/// for few, dark for all.
pub fn overlap_gray(k: usize, n: usize) -> f64 {
    if n <= 2 {
        0.25
    } else {
        0.75 - 0.5 * (k - 2) as f64 / (n - 2) as f64
    }
}

/// Shares of the union of all masks, optionally weighted per pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFractions {
    /// Covered by mask `i` only.
    pub unique: Vec<f64>,
    /// `overlap[k - 2]`: covered by exactly `k` masks.
    pub overlap: Vec<f64>,
    /// Total (weighted) size of the union.
    pub union: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub image: PhysicalImage,
    pub fractions: ComparisonFractions,
}

/// Overlays binary segmentations: white where none is set, a palette color
/// where exactly one is set, and a gray ramp by overlap count otherwise.
pub fn compare_segmentations(masks: &[PhysicalImage], weights: Option<&Array2<f64>>) -> Result<Comparison> {
    let first = masks.first().ok_or_else(|| Error::invalid("nothing to compare"))?;
    let n = masks.len();
    let coords = *first.coords();
    let mut bools = Vec::with_capacity(n);
    for m in masks {
        coords.check_same_grid(m.coords(), "segmentation")?;
        bools.push(m.mask()?);
    }
    if let Some(w) = weights {
        if w.dim() != (coords.rows, coords.cols) {
            return Err(Error::mismatch("weight field and segmentations differ in shape"));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
    }
    let mut rgb = Array3::from_elem((coords.rows, coords.cols, 3), 1.0);
    let mut unique = vec![0.0; n];
    let mut overlap = vec![0.0; n.saturating_sub(1)];
    let mut union = 0.0;
    for r in 0..coords.rows {
        for c in 0..coords.cols {
            let hits: Vec<usize> = (0..n).filter(|&i| bools[i][[r, c]]).collect();
            if hits.is_empty() {
                continue;
            }
            let w = weights.map_or(1.0, |w| w[[r, c]]);
            union += w;
            let color = if hits.len() == 1 {
                unique[hits[0]] += w;
                PALETTE[hits[0] % PALETTE.len()]
            } else {
                overlap[hits.len() - 2] += w;
                [overlap_gray(hits.len(), n); 3]
            };
            for (k, v) in color.into_iter().enumerate() {
                rgb[[r, c, k]] = v;
            }
        }
    }
    if union > 0.0 {
        unique.iter_mut().chain(overlap.iter_mut()).for_each(|v| *v /= union);
    }
    let image = PhysicalImage::from_parts(rgb, coords, first.timestamp(), ColorSpace::Rgb)?;
    Ok(Comparison { image, fractions: ComparisonFractions { unique, overlap, union } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::CoordinateSystem;

    fn mask(cs: CoordinateSystem, f: impl Fn(usize, usize) -> bool) -> PhysicalImage {
        PhysicalImage::from_mask(&Array2::from_shape_fn((cs.rows, cs.cols), |(r, c)| f(r, c)), cs).unwrap()
    }

    #[test]
    fn identical_masks_are_all_overlap() {
        let cs = CoordinateSystem::new(20, 20, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let m = mask(cs, |r, c| r < 10 && c < 5);
        let cmp = compare_segmentations(&[m.clone(), m.clone(), m], None).unwrap();
        assert_eq!(cmp.fractions.overlap, vec![0.0, 1.0]);
        assert_eq!(cmp.fractions.unique, vec![0.0; 3]);
        assert_eq!(cmp.image.data()[[0, 0, 0]], 0.25);
        assert_eq!(cmp.image.data()[[19, 19, 1]], 1.0);
    }

    #[test]
    fn gray_ramp() {
        assert_eq!(overlap_gray(2, 2), 0.25);
        assert_eq!(overlap_gray(2, 4), 0.75);
        assert_eq!(overlap_gray(4, 4), 0.25);
    }

    #[test]
    fn disjoint_halves() {
        let cs = CoordinateSystem::new(4, 4, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let a = mask(cs, |_, c| c < 2);
        let b = mask(cs, |_, c| c >= 2);
        let cmp = compare_segmentations(&[a, b], None).unwrap();
        assert_eq!(cmp.fractions.unique, vec![0.5, 0.5]);
        assert_eq!(cmp.fractions.overlap, vec![0.0]);
        assert_eq!(cmp.image.data()[[0, 3, 0]], PALETTE[1][0]);
    }
}
