use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::Correction;
use crate::error::{Error, Result};
use crate::imgcore::{sample, CoordinateSystem, PhysicalImage};

/// Parameters of a rectification. Corners are `(col, row)` positions of
/// the domain corners in the source image, in edge coordinates (the
/// top-left pixel spans `[0, 1] x [0, 1]`), ordered top-left, top-right,
/// bottom-right, bottom-left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySpec {
    pub corners: [[f64; 2]; 4],
    /// Target width and height in meters.
    pub width: f64,
    pub height: f64,
    /// Per-axis quadratic bulge `u -> u + k u (1 - u)` in normalized target
    /// coordinates; `|k| < 1`.
    pub bulge: [f64; 2],
    /// Per-axis linear stretch `u -> c + (u - c)(1 + s)` about `stretch_center`.
    pub stretch: [f64; 2],
    pub stretch_center: [f64; 2],
    /// Output `[rows, cols]`; defaults to the mean edge lengths of the quad.
    pub shape: Option<[usize; 2]>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            corners: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            width: 1.0,
            height: 1.0,
            bulge: [0.0; 2],
            stretch: [0.0; 2],
            stretch_center: [0.5; 2],
            shape: None,
        }
    }
}

impl GeometrySpec {
    /// Corners of a full `rows x cols` image.
    pub fn full_frame(rows: usize, cols: usize, width: f64, height: f64) -> Self {
        let (r, c) = (rows as f64, cols as f64);
        Self { corners: [[0.0, 0.0], [c, 0.0], [c, r], [0.0, r]], width, height, ..Default::default() }
    }
}

/// Source position `p = H(B(S(q)))` for normalized target coordinates `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricCorrection {
    pub spec: GeometrySpec,
    pub homography: [[f64; 3]; 3],
    pub rows: usize,
    pub cols: usize,
}

/// Homography taking the unit square corners `(0,0), (1,0), (1,1), (0,1)`
/// to `quad`.
pub fn unit_square_homography(quad: &[[f64; 2]; 4]) -> Result<Matrix3<f64>> {
    let src = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    homography_from_points(&src, quad)
}

/// Homography from four point correspondences (8x8 linear system).
pub fn homography_from_points(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Matrix3<f64>> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for k in 0..4 {
        let [u, v] = src[k];
        let [x, y] = dst[k];
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[u, v, 1.0, 0.0, 0.0, 0.0, -u * x, -v * x]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, u, v, 1.0, -u * y, -v * y]);
        b[r] = x;
        b[r + 1] = y;
    }
    let h = a.lu().solve(&b).ok_or_else(|| Error::Degenerate("homography system is singular".into()))?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("homography system is singular".into()));
    }
    Ok(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

pub fn apply_homography(h: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = h * Vector3::new(p[0], p[1], 1.0);
    [v[0] / v[2], v[1] / v[2]]
}

fn check_convex(q: &[[f64; 2]; 4]) -> Result<()> {
    let mut sign = 0.0;
    let scale = (0..4).map(|k| (q[(k + 1) % 4][0] - q[k][0]).hypot(q[(k + 1) % 4][1] - q[k][1])).fold(0.0, f64::max);
    for k in 0..4 {
        let (a, b, c) = (q[k], q[(k + 1) % 4], q[(k + 2) % 4]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross.abs() <= 1e-9 * scale * scale {
            return Err(Error::Degenerate("corners are collinear".into()));
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return Err(Error::invalid("corners do not form a convex quadrilateral"));
        }
    }
    Ok(())
}

#[inline]
fn bulge(u: f64, k: f64) -> f64 {
    u + k * u * (1.0 - u)
}

#[inline]
fn bulge_inv(w: f64, k: f64) -> f64 {
    if k.abs() < 1e-12 {
        return w;
    }
    let b = 1.0 + k;
    (b - (b * b - 4.0 * k * w).max(0.0).sqrt()) / (2.0 * k)
}

pub fn build_geometric_correction(spec: &GeometrySpec) -> Result<GeometricCorrection> {
    if !(spec.width > 0.0 && spec.height > 0.0) {
        return Err(Error::invalid("target dimensions must be positive"));
    }
    if spec.bulge.iter().any(|k| !(k.abs() < 1.0)) {
        return Err(Error::invalid("bulge coefficients must satisfy |k| < 1"));
    }
    if spec.stretch.iter().any(|s| !(*s > -1.0 && s.is_finite())) {
        return Err(Error::invalid("stretch coefficients must exceed -1"));
    }
    check_convex(&spec.corners)?;
    let h = unit_square_homography(&spec.corners)?;
    let q = &spec.corners;
    let len = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let [rows, cols] = spec.shape.unwrap_or([
        (0.5 * (len(q[0], q[3]) + len(q[1], q[2]))).round().max(2.0) as usize,
        (0.5 * (len(q[0], q[1]) + len(q[3], q[2]))).round().max(2.0) as usize,
    ]);
    if rows < 2 || cols < 2 {
        return Err(Error::invalid("output must be at least 2x2"));
    }
    Ok(GeometricCorrection {
        spec: spec.clone(),
        homography: [0, 1, 2].map(|i| [h[(i, 0)], h[(i, 1)], h[(i, 2)]]),
        rows,
        cols,
    })
}

impl GeometricCorrection {
    fn h(&self) -> Matrix3<f64> {
        let m = &self.homography;
        Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
    }

    /// Source edge coordinates `(col, row)` of normalized target `(u, v)`.
    pub fn forward(&self, q: [f64; 2]) -> [f64; 2] {
        let s = &self.spec;
        let st = [0, 1].map(|a| s.stretch_center[a] + (q[a] - s.stretch_center[a]) * (1.0 + s.stretch[a]));
        let b = [0, 1].map(|a| bulge(st[a], s.bulge[a]));
        apply_homography(&self.h(), b)
    }

    /// Normalized target coordinates of a source edge position.
    pub fn inverse(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let s = &self.spec;
        let hinv = self.h().try_inverse().ok_or_else(|| Error::Degenerate("homography not invertible".into()))?;
        let b = apply_homography(&hinv, p);
        let st = [0, 1].map(|a| bulge_inv(b[a], s.bulge[a]));
        Ok([0, 1].map(|a| s.stretch_center[a] + (st[a] - s.stretch_center[a]) / (1.0 + s.stretch[a])))
    }

    pub fn target_coords(&self) -> Result<CoordinateSystem> {
        CoordinateSystem::new(self.rows, self.cols, self.spec.width, self.spec.height, [0.0, 0.0])
    }
}

/// Resamples `image` onto the target rectangle (bilinear, clamped border).
pub fn apply_geometric_correction(correction: &GeometricCorrection, image: &PhysicalImage) -> Result<PhysicalImage> {
    let (rows, cols) = (correction.rows, correction.cols);
    let data = sample::remap(&image.data().view(), rows, cols, sample::Border::Clamp, |r, c| {
        let q = [(c as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64];
        let p = correction.forward(q);
        (p[1] - 0.5, p[0] - 0.5)
    });
    let data = match image.colorspace() {
        crate::imgcore::ColorSpace::Binary => data.mapv(|v| if v >= 0.5 { 1.0 } else { 0.0 }),
        _ => data,
    };
    PhysicalImage::from_parts(data, correction.target_coords()?, image.timestamp(), image.colorspace())
}

impl Correction for GeometricCorrection {
    fn name(&self) -> &str {
        "geometry"
    }

    fn apply(&self, image: &PhysicalImage) -> Result<PhysicalImage> {
        apply_geometric_correction(self, image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ColorSpace;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn checker(rows: usize, cols: usize, cell: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(r, c)| if (r / cell + c / cell) % 2 == 0 { 0.9 } else { 0.1 })
    }

    #[test]
    fn full_frame_is_identity() {
        let cs = CoordinateSystem::new(30, 40, 0.4, 0.3, [0.0, 0.0]).unwrap();
        let plane = Array2::from_shape_fn((30, 40), |(r, c)| ((r * 13 + c * 7) % 17) as f64 / 16.0);
        let img = PhysicalImage::from_plane(plane, cs, ColorSpace::Gray).unwrap();
        let gc = build_geometric_correction(&GeometrySpec::full_frame(30, 40, 0.4, 0.3)).unwrap();
        let out = apply_geometric_correction(&gc, &img).unwrap();
        assert_eq!((out.rows(), out.cols()), (30, 40));
        for (a, b) in out.data().iter().zip(img.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn crop_shrinks_output() {
        let mut spec = GeometrySpec::full_frame(200, 300, 0.21, 0.2);
        spec.corners = [[90.0, 0.0], [300.0, 0.0], [300.0, 200.0], [90.0, 200.0]];
        let gc = build_geometric_correction(&spec).unwrap();
        assert_eq!((gc.rows, gc.cols), (200, 210));
    }

    #[test]
    fn collinear_corners_rejected() {
        let mut spec = GeometrySpec::full_frame(10, 10, 1.0, 1.0);
        spec.corners = [[0.0, 0.0], [5.0, 5.0], [10.0, 10.0], [0.0, 10.0]];
        assert!(build_geometric_correction(&spec).is_err());
    }

    #[test]
    fn inverts_known_homography() {
        // Render a checkerboard through a known perspective map, then
        // rectify with corners = H(unit square).
        let (rows, cols) = (160, 240);
        let truth = checker(rows, cols, 20);
        let corners = [[18.0, 12.0], [225.0, 4.0], [236.0, 150.0], [8.0, 158.0]];
        let h = unit_square_homography(&corners).unwrap();
        let hinv = h.try_inverse().unwrap();
        let (sr, sc) = (170, 250);
        let warped = Array2::from_shape_fn((sr, sc), |(r, c)| {
            let q = apply_homography(&hinv, [c as f64 + 0.5, r as f64 + 0.5]);
            crate::imgcore::sample::nearest(&truth.view(), q[1] * rows as f64 - 0.5, q[0] * cols as f64 - 0.5, sample::Border::Clamp)
        });
        let cs = CoordinateSystem::new(sr, sc, 0.25, 0.17, [0.0, 0.0]).unwrap();
        let img = PhysicalImage::from_plane(warped, cs, ColorSpace::Gray).unwrap();
        let spec = GeometrySpec { corners, width: 0.24, height: 0.16, shape: Some([rows, cols]), ..Default::default() };
        let gc = build_geometric_correction(&spec).unwrap();
        // grid points land where H puts them
        for &(u, v) in &[(0.25, 0.25), (0.5, 0.5), (0.9, 0.1)] {
            let p = gc.forward([u, v]);
            let e = apply_homography(&h, [u, v]);
            assert!((p[0] - e[0]).abs() < 1e-9 && (p[1] - e[1]).abs() < 1e-9);
        }
        let out = apply_geometric_correction(&gc, &img).unwrap();
        let o = out.plane().unwrap();
        let (mut ok, mut n) = (0, 0);
        for r in 2..rows - 2 {
            for c in 2..cols - 2 {
                // skip checker edges where resampling blurs
                if r % 20 < 2 || r % 20 > 17 || c % 20 < 2 || c % 20 > 17 {
                    continue;
                }
                n += 1;
                if (o[[r, c]] - truth[[r, c]]).abs() < 0.1 {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.99 * n as f64, "{ok}/{n}");
    }

    proptest! {
        #[test]
        fn forward_inverse_round_trip(u in 0.0f64..1.0, v in 0.0f64..1.0, kb in -0.3f64..0.3, ks in -0.2f64..0.2) {
            let spec = GeometrySpec {
                corners: [[10.0, 5.0], [400.0, 20.0], [390.0, 300.0], [0.0, 280.0]],
                width: 1.0,
                height: 0.7,
                bulge: [kb, -kb / 2.0],
                stretch: [ks, 0.5 * ks],
                ..Default::default()
            };
            let gc = build_geometric_correction(&spec).unwrap();
            let p = gc.forward([u, v]);
            let q = gc.inverse(p).unwrap();
            let back = gc.forward(q);
            prop_assert!((back[0] - p[0]).abs() < 0.1 && (back[1] - p[1]).abs() < 0.1);
            prop_assert!((q[0] - u).abs() < 1e-9 && (q[1] - v).abs() < 1e-9);
        }
    }
}
