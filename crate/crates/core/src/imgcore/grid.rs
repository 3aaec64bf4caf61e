use super::{ColorSpace, PhysicalImage};
use crate::error::{Error, Result};

/// Marker color of grid lines on RGB images.
pub const GRID_RGB: [f64; 3] = [1.0, 0.0, 0.0];

/// Pixel indices of lines placed at `k * spacing` from the axis origin, for
/// every multiple strictly inside the axis length.
pub(crate) fn line_indices(len_px: usize, extent: f64, spacing: f64) -> Vec<usize> {
    let pitch = extent / len_px as f64;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let pos = k as f64 * spacing;
        if pos >= extent - 1e-9 * extent {
            break;
        }
        let idx = (pos / pitch + 1e-9).floor() as usize;
        if idx >= len_px {
            break;
        }
        if out.last() != Some(&idx) {
            out.push(idx);
        }
        k += 1;
    }
    out
}

/// Overlays a Cartesian grid with vertical lines every `dx` and horizontal
/// lines every `dy` meters, measured from the physical origin.
///
/// Lines are one pixel wide. RGB images get [`GRID_RGB`]; single-channel
/// images get intensity 1.
pub fn add_grid(image: &PhysicalImage, dx: f64, dy: f64) -> Result<PhysicalImage> {
    let cs = image.coords();
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::invalid("grid spacing must be positive"));
    }
    if dx < 2.0 * cs.dx() || dy < 2.0 * cs.dy() {
        return Err(Error::invalid("grid spacing below two pixel pitches"));
    }
    let vertical = line_indices(cs.cols, cs.width, dx);
    // Horizontal lines are measured upwards from the bottom edge.
    let horizontal: Vec<usize> = line_indices(cs.rows, cs.height, dy).into_iter().map(|k| cs.rows - 1 - k).collect();

    let marker: Vec<f64> = match image.colorspace() {
        ColorSpace::Rgb => GRID_RGB.to_vec(),
        ColorSpace::Hsv => vec![0.0, 1.0, 1.0],
        _ => vec![1.0],
    };
    let mut data = image.data().clone();
    for &c in &vertical {
        for r in 0..cs.rows {
            for (k, &m) in marker.iter().enumerate() {
                data[[r, c, k]] = m;
            }
        }
    }
    for &r in &horizontal {
        for c in 0..cs.cols {
            for (k, &m) in marker.iter().enumerate() {
                data[[r, c, k]] = m;
            }
        }
    }
    image.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn ten_centimeter_grid_every_hundred_pixels() {
        let img = PhysicalImage::new(Array3::zeros((1500, 2800, 1)), 2.8, 1.5, [0.0, 0.0], None).unwrap();
        let v = line_indices(2800, 2.8, 0.1);
        assert_eq!(v, (0..28).map(|k| k * 100).collect::<Vec<_>>());
        let h = line_indices(1500, 1.5, 0.1);
        assert_eq!(h, (0..15).map(|k| k * 100).collect::<Vec<_>>());
        let g = add_grid(&img, 0.1, 0.1).unwrap();
        assert_eq!(g.data()[[700, 300, 0]], 1.0);
        assert_eq!(g.data()[[1499, 1234, 0]], 1.0); // bottom line at y = 0
        assert_eq!(g.data()[[700, 301, 0]], 0.0);
    }

    #[test]
    fn spacing_beyond_domain_only_origin_line() {
        let img = PhysicalImage::new(Array3::zeros((50, 80, 1)), 0.8, 0.5, [0.0, 0.0], None).unwrap();
        let g = add_grid(&img, 2.0, 3.0).unwrap();
        let count = g.data().iter().filter(|&&v| v == 1.0).count();
        // column 0 and bottom row, sharing one pixel
        assert_eq!(count, 50 + 80 - 1);
        assert_eq!(g.data()[[0, 0, 0]], 1.0);
        assert_eq!(g.data()[[49, 79, 0]], 1.0);
    }

    #[test]
    fn pixel_count_matches_line_count_oracle() {
        let (rows, cols) = (123, 217);
        let (w, h) = (2.17, 1.23);
        let img = PhysicalImage::new(Array3::zeros((rows, cols, 3)), w, h, [0.0, 0.0], None).unwrap();
        for &(dx, dy) in &[(0.1, 0.1), (0.25, 0.07), (0.5, 1.0), (0.03, 0.2)] {
            let g = add_grid(&img, dx, dy).unwrap();
            let marked = (0..rows)
                .flat_map(|r| (0..cols).map(move |c| (r, c)))
                .filter(|&(r, c)| g.data()[[r, c, 0]] == 1.0)
                .count();
            // Independent count of multiples k*d < extent.
            let nv = (0..).take_while(|&k| (k as f64) * dx < w - 1e-12).count();
            let nh = (0..).take_while(|&k| (k as f64) * dy < h - 1e-12).count();
            assert_eq!(marked, nv * rows + nh * cols - nv * nh, "dx={dx} dy={dy}");
        }
    }

    #[test]
    fn too_fine_spacing() {
        let img = PhysicalImage::new(Array3::zeros((10, 10, 1)), 1.0, 1.0, [0.0, 0.0], None).unwrap();
        assert!(add_grid(&img, 0.15, 0.5).is_err());
    }
}
