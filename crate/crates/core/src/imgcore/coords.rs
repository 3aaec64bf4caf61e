use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map between matrix indices and physical Cartesian coordinates.
///
/// Row 0 is the top of the image while the physical origin is the lower-left
/// corner, so the vertical axis is flipped. Pixel `(row, col)` covers the
/// physical rectangle `[x0 + col*dx, x0 + (col+1)*dx] x [y_top - (row+1)*dy, y_top - row*dy]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSystem {
    pub rows: usize,
    pub cols: usize,
    /// Physical width in meters.
    pub width: f64,
    /// Physical height in meters.
    pub height: f64,
    /// Physical coordinate of the lower-left corner.
    pub origin: [f64; 2],
}

impl CoordinateSystem {
    pub fn new(rows: usize, cols: usize, width: f64, height: f64, origin: [f64; 2]) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(format!("image must be at least 2x2 pixels, got {rows}x{cols}")));
        }
        if !(width > 0.0 && width.is_finite()) || !(height > 0.0 && height.is_finite()) {
            return Err(Error::invalid(format!("non-positive physical dimensions {width} x {height}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        Ok(Self { rows, cols, width, height, origin })
    }

    /// Pixel pitch along x (meters per column).
    pub fn dx(&self) -> f64 {
        self.width / self.cols as f64
    }

    /// Pixel pitch along y (meters per row).
    pub fn dy(&self) -> f64 {
        self.height / self.rows as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn top(&self) -> f64 {
        self.origin[1] + self.height
    }

    pub fn right(&self) -> f64 {
        self.origin[0] + self.width
    }

    /// Physical coordinate of the center of pixel `(row, col)`.
    pub fn pixel_to_phys(&self, row: usize, col: usize) -> [f64; 2] {
        self.continuous_to_phys(row as f64, col as f64)
    }

    /// Physical coordinate of a continuous pixel position, where integer
    /// positions are pixel centers.
    pub fn continuous_to_phys(&self, row: f64, col: f64) -> [f64; 2] {
        [
            self.origin[0] + (col + 0.5) * self.dx(),
            self.top() - (row + 0.5) * self.dy(),
        ]
    }

    /// Continuous pixel position `(row, col)` of a physical coordinate; pixel
    /// centers map to integers.
    pub fn phys_to_continuous(&self, p: [f64; 2]) -> (f64, f64) {
        let col = (p[0] - self.origin[0]) / self.dx() - 0.5;
        let row = (self.top() - p[1]) / self.dy() - 0.5;
        (row, col)
    }

    /// Index of the pixel whose footprint contains `p`, or `None` outside.
    pub fn phys_to_pixel(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let (r, c) = self.phys_to_continuous(p);
        let (r, c) = (r.round(), c.round());
        if r < 0.0 || c < 0.0 || r >= self.rows as f64 || c >= self.cols as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.origin[0] && p[0] <= self.right() && p[1] >= self.origin[1] && p[1] <= self.top()
    }

    /// Sub-system covering the pixel block `rows r0..r1`, `cols c0..c1`.
    pub fn sub(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Result<Self> {
        if r1 > self.rows || c1 > self.cols || r0 >= r1 || c0 >= c1 {
            return Err(Error::invalid(format!(
                "pixel block {r0}..{r1} x {c0}..{c1} outside {}x{}",
                self.rows, self.cols
            )));
        }
        let origin = [
            self.origin[0] + c0 as f64 * self.dx(),
            self.top() - r1 as f64 * self.dy(),
        ];
        Self::new(
            r1 - r0,
            c1 - c0,
            (c1 - c0) as f64 * self.dx(),
            (r1 - r0) as f64 * self.dy(),
            origin,
        )
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        const TOL: f64 = 1e-9;
        self.rows == other.rows
            && self.cols == other.cols
            && (self.width - other.width).abs() <= TOL * self.width.max(1.0)
            && (self.height - other.height).abs() <= TOL * self.height.max(1.0)
            && (self.origin[0] - other.origin[0]).abs() <= TOL
            && (self.origin[1] - other.origin[1]).abs() <= TOL
    }

    pub fn check_same_grid(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::mismatch(format!(
                "{what}: {}x{} ({} x {} m) vs {}x{} ({} x {} m)",
                self.rows, self.cols, self.width, self.height, other.rows, other.cols, other.width, other.height
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pitch_and_corners() {
        let cs = CoordinateSystem::new(1500, 2800, 2.8, 1.5, [0.0, 0.0]).unwrap();
        assert!((cs.dx() - 1e-3).abs() < 1e-15);
        assert!((cs.dy() - 1e-3).abs() < 1e-15);
        let p = cs.pixel_to_phys(0, 0);
        assert!((p[0] - 0.0005).abs() < 1e-12 && (p[1] - 1.4995).abs() < 1e-12);
        let p = cs.pixel_to_phys(1499, 2799);
        assert!((p[0] - 2.7995).abs() < 1e-12 && (p[1] - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(CoordinateSystem::new(1, 5, 1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(CoordinateSystem::new(5, 5, 0.0, 1.0, [0.0, 0.0]).is_err());
        assert!(CoordinateSystem::new(5, 5, 1.0, -1.0, [0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_on_pixel_centers(
            rows in 2usize..400, cols in 2usize..400,
            w in 0.01f64..10.0, h in 0.01f64..10.0,
            ox in -5.0f64..5.0, oy in -5.0f64..5.0,
            fr in 0.0f64..1.0, fc in 0.0f64..1.0,
        ) {
            let cs = CoordinateSystem::new(rows, cols, w, h, [ox, oy]).unwrap();
            let r = ((rows - 1) as f64 * fr) as usize;
            let c = ((cols - 1) as f64 * fc) as usize;
            let p = cs.pixel_to_phys(r, c);
            prop_assert_eq!(cs.phys_to_pixel(p), Some((r, c)));
            let (rr, cc) = cs.phys_to_continuous(p);
            let back = cs.continuous_to_phys(rr, cc);
            prop_assert!((back[0] - p[0]).abs() <= 1e-9 && (back[1] - p[1]).abs() <= 1e-9);
        }
    }
}
