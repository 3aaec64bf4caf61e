use nalgebra::{DMatrix, Matrix3, Vector3};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::Correction;
use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, PhysicalImage, Roi};

const CLASSIC_CSV: &str = include_str!("../../data/colorchecker_classic.csv");

/// The 24 classic color-checker patches as `(name, sRGB in [0, 1])`, in
/// reading order (dark skin top-left, black bottom-right).
pub fn classic_checker_targets() -> Vec<(String, [f64; 3])> {
    CLASSIC_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let v = |k: usize| f[k].trim().parse::<f64>().expect("bundled checker data") / 255.0;
            (f[0].to_string(), [v(1), v(2), v(3)])
        })
        .collect()
}

/// One reference patch: where to measure and what it should read.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Swatch {
    pub roi: Roi,
    pub target: [f64; 3],
}

/// Swatches of a 6x4 classic checker filling `checker`, each measured over
/// the central half of its cell.
pub fn classic_checker_layout(checker: Roi) -> Vec<Swatch> {
    let [x0, y0] = checker.lower_left;
    let [x1, y1] = checker.upper_right;
    let (cw, ch) = ((x1 - x0) / 6.0, (y1 - y0) / 4.0);
    classic_checker_targets()
        .into_iter()
        .enumerate()
        .map(|(k, (_, target))| {
            let (i, j) = (k / 6, k % 6);
            let cx = x0 + (j as f64 + 0.5) * cw;
            let cy = y1 - (i as f64 + 0.5) * ch;
            Swatch { roi: Roi::new([cx - cw / 4.0, cy - ch / 4.0], [cx + cw / 4.0, cy + ch / 4.0]), target }
        })
        .collect()
}

/// Affine color map `c -> M c + b`, clamped to the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorCorrection {
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
    /// Root mean square of the per-swatch residual norm after fitting.
    pub residual_rms: f64,
    pub residual_max: f64,
}

impl ColorCorrection {
    pub fn identity() -> Self {
        Self { matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], offset: [0.0; 3], residual_rms: 0.0, residual_max: 0.0 }
    }

    /// `M c + b` without clamping.
    pub fn map(&self, c: [f64; 3]) -> [f64; 3] {
        let m = &self.matrix;
        let mut out = self.offset;
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[i][0] * c[0] + m[i][1] * c[1] + m[i][2] * c[2];
        }
        out
    }
}

/// Mean RGB over a swatch.
pub fn swatch_mean(image: &PhysicalImage, roi: &Roi) -> Result<[f64; 3]> {
    let block = roi.extract(image)?;
    let n = (block.rows() * block.cols()) as f64;
    Ok([0, 1, 2].map(|k| block.channel(k).sum() / n))
}

fn require_rgb(image: &PhysicalImage) -> Result<()> {
    if image.colorspace() != ColorSpace::Rgb {
        return Err(Error::invalid(format!("color correction needs an RGB image, got {:?}", image.colorspace())));
    }
    Ok(())
}

/// Least-squares affine map from observed swatch means to their targets.
pub fn fit_color_correction(image: &PhysicalImage, swatches: &[Swatch]) -> Result<ColorCorrection> {
    require_rgb(image)?;
    if swatches.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 swatches, got {}", swatches.len())));
    }
    let obs = swatches.iter().map(|s| swatch_mean(image, &s.roi)).collect::<Result<Vec<_>>>()?;
    fit_affine(&obs, &swatches.iter().map(|s| s.target).collect::<Vec<_>>())
}

/// Least-squares `[M | b]` with `M obs_k + b ~ target_k`.
pub fn fit_affine(obs: &[[f64; 3]], targets: &[[f64; 3]]) -> Result<ColorCorrection> {
    let n = obs.len();
    let mean: Vector3<f64> = obs.iter().map(|o| Vector3::from(*o)).sum::<Vector3<f64>>() / n as f64;
    let centered = DMatrix::from_fn(n, 3, |k, j| obs[k][j] - mean[j]);
    let sv = centered.singular_values();
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= 1e-9 * smax {
        return Err(Error::Degenerate("observed swatch colors are rank deficient after centering".into()));
    }
    let a = DMatrix::from_fn(n, 4, |k, j| if j < 3 { obs[k][j] } else { 1.0 });
    let t = DMatrix::from_fn(n, 3, |k, j| targets[k][j]);
    let x = a.svd(true, true).solve(&t, 1e-14).map_err(|e| Error::Degenerate(e.to_string()))?;
    let m = Matrix3::from_fn(|i, j| x[(j, i)]);
    let mut cc = ColorCorrection {
        matrix: [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]),
        offset: [x[(3, 0)], x[(3, 1)], x[(3, 2)]],
        residual_rms: 0.0,
        residual_max: 0.0,
    };
    let res: Vec<f64> = obs
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let p = cc.map(*o);
            ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2) + (p[2] - t[2]).powi(2)).sqrt()
        })
        .collect();
    cc.residual_rms = (res.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    cc.residual_max = res.iter().cloned().fold(0.0, f64::max);
    Ok(cc)
}

pub fn apply_color_correction(correction: &ColorCorrection, image: &PhysicalImage) -> Result<PhysicalImage> {
    require_rgb(image)?;
    let (rows, cols, _) = image.data().dim();
    let d = image.data();
    let mut out = Array3::zeros((rows, cols, 3));
    for r in 0..rows {
        for c in 0..cols {
            let v = correction.map([d[[r, c, 0]], d[[r, c, 1]], d[[r, c, 2]]]);
            for k in 0..3 {
                out[[r, c, k]] = v[k].clamp(0.0, 1.0);
            }
        }
    }
    image.with_data(out)
}

impl Correction for ColorCorrection {
    fn name(&self) -> &str {
        "color"
    }

    fn apply(&self, image: &PhysicalImage) -> Result<PhysicalImage> {
        apply_color_correction(self, image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::CoordinateSystem;

    /// Checker image with the given per-swatch colors painted into its cells.
    fn checker_image(colors: &[[f64; 3]]) -> (PhysicalImage, Vec<Swatch>) {
        let cs = CoordinateSystem::new(80, 120, 0.12, 0.08, [0.0, 0.0]).unwrap();
        let layout = classic_checker_layout(Roi::whole(&cs));
        let mut data = Array3::zeros((80, 120, 3));
        for r in 0..80 {
            for c in 0..120 {
                let k = (r / 20) * 6 + c / 20;
                for ch in 0..3 {
                    data[[r, c, ch]] = colors[k][ch];
                }
            }
        }
        (PhysicalImage::from_parts(data, cs, None, ColorSpace::Rgb).unwrap(), layout)
    }

    #[test]
    fn bundled_targets() {
        let t = classic_checker_targets();
        assert_eq!(t.len(), 24);
        assert_eq!(t[0].0, "dark skin");
        assert_eq!(t[23].1, [52.0 / 255.0; 3]);
    }

    #[test]
    fn identity_fit() {
        let targets: Vec<[f64; 3]> = classic_checker_targets().into_iter().map(|(_, t)| t).collect();
        let (img, sw) = checker_image(&targets);
        let cc = fit_color_correction(&img, &sw).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((cc.matrix[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
            assert!(cc.offset[i].abs() < 1e-10);
        }
    }

    #[test]
    fn half_intensity_gives_double() {
        let targets: Vec<[f64; 3]> = classic_checker_targets().into_iter().map(|(_, t)| t).take(6).collect();
        let obs: Vec<[f64; 3]> = targets.iter().map(|t| t.map(|v| 0.5 * v)).collect();
        let cc = fit_affine(&obs, &targets).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((cc.matrix[i][j] - if i == j { 2.0 } else { 0.0 }).abs() < 1e-8);
            }
            assert!(cc.offset[i].abs() < 1e-8);
        }
    }

    #[test]
    fn gray_swatches_are_rank_deficient() {
        let obs: Vec<[f64; 3]> = (0..6).map(|k| [k as f64 / 6.0; 3]).collect();
        assert!(matches!(fit_affine(&obs, &obs), Err(Error::Degenerate(_))));
    }

    #[test]
    fn apply_rejects_gray_and_clamps() {
        let cs = CoordinateSystem::new(4, 4, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let gray = PhysicalImage::from_plane(ndarray::Array2::zeros((4, 4)), cs, ColorSpace::Gray).unwrap();
        assert!(apply_color_correction(&ColorCorrection::identity(), &gray).is_err());
        let half = PhysicalImage::from_parts(Array3::from_elem((4, 4, 3), 0.5), cs, None, ColorSpace::Rgb).unwrap();
        let mut cc = ColorCorrection::identity();
        cc.matrix = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        let out = apply_color_correction(&cc, &half).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }
}
