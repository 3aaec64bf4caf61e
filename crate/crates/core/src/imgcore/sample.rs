//! Bilinear resampling helpers. Continuous positions use the convention that
//! integer coordinates are pixel centers.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

/// What to return for lookups outside the pixel footprint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Border {
    /// Nearest edge value.
    Clamp,
    /// Constant fill value.
    Fill(f64),
}

#[inline]
pub fn bilinear(plane: &ArrayView2<f64>, row: f64, col: f64, border: Border) -> f64 {
    let (rows, cols) = plane.dim();
    if let Border::Fill(v) = border {
        if !(row >= -0.5 && row <= rows as f64 - 0.5 && col >= -0.5 && col <= cols as f64 - 0.5) {
            return v;
        }
    }
    let r = row.clamp(0.0, (rows - 1) as f64);
    let c = col.clamp(0.0, (cols - 1) as f64);
    let r0 = (r.floor() as usize).min(rows - 1);
    let c0 = (c.floor() as usize).min(cols - 1);
    let r1 = (r0 + 1).min(rows - 1);
    let c1 = (c0 + 1).min(cols - 1);
    let fr = r - r0 as f64;
    let fc = c - c0 as f64;
    let top = plane[[r0, c0]] * (1.0 - fc) + plane[[r0, c1]] * fc;
    let bottom = plane[[r1, c0]] * (1.0 - fc) + plane[[r1, c1]] * fc;
    top * (1.0 - fr) + bottom * fr
}

/// Nearest-neighbor lookup with the same border semantics.
#[inline]
pub fn nearest(plane: &ArrayView2<f64>, row: f64, col: f64, border: Border) -> f64 {
    let (rows, cols) = plane.dim();
    if let Border::Fill(v) = border {
        if !(row >= -0.5 && row < rows as f64 - 0.5 && col >= -0.5 && col < cols as f64 - 0.5) {
            return v;
        }
    }
    let r = row.round().clamp(0.0, (rows - 1) as f64) as usize;
    let c = col.round().clamp(0.0, (cols - 1) as f64) as usize;
    plane[[r, c]]
}

/// Resamples every channel at the positions produced by `map(row, col)`.
pub fn remap<F>(data: &ArrayView3<f64>, out_rows: usize, out_cols: usize, border: Border, map: F) -> Array3<f64>
where
    F: Fn(usize, usize) -> (f64, f64) + Sync,
{
    let channels = data.dim().2;
    let mut out = Array3::zeros((out_rows, out_cols, channels));
    let planes: Vec<ArrayView2<f64>> = (0..channels).map(|k| data.index_axis(ndarray::Axis(2), k)).collect();
    for r in 0..out_rows {
        for c in 0..out_cols {
            let (sr, sc) = map(r, c);
            for (k, plane) in planes.iter().enumerate() {
                out[[r, c, k]] = bilinear(plane, sr, sc, border);
            }
        }
    }
    out
}

/// Translates a plane so that `out(r, c) = plane(r - dy, c - dx)`.
pub fn shift_plane(plane: &ArrayView2<f64>, dx: f64, dy: f64, border: Border) -> Array2<f64> {
    let (rows, cols) = plane.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| bilinear(plane, r as f64 - dy, c as f64 - dx, border))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_are_exact() {
        let p = Array2::from_shape_fn((4, 5), |(r, c)| (r * 5 + c) as f64);
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(bilinear(&p.view(), r as f64, c as f64, Border::Clamp), p[[r, c]]);
            }
        }
        assert_eq!(bilinear(&p.view(), 0.5, 0.5, Border::Clamp), 3.0);
        assert_eq!(bilinear(&p.view(), -3.0, 0.0, Border::Fill(-1.0)), -1.0);
        assert_eq!(bilinear(&p.view(), -3.0, 0.0, Border::Clamp), 0.0);
    }

    #[test]
    fn integer_shift_is_index_shift() {
        let p = Array2::from_shape_fn((6, 7), |(r, c)| (r * 7 + c) as f64);
        let s = shift_plane(&p.view(), 2.0, -1.0, Border::Fill(0.0));
        assert_eq!(s[[2, 4]], p[[3, 2]]);
        assert_eq!(s[[0, 0]], 0.0);
    }
}
