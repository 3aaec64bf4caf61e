use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{add_noise, stream_rng, texture, TextureSpec};
use crate::error::Result;
use crate::imgcore::{sample, ColorSpace, CoordinateSystem, PhysicalImage};

/// Analytic displacement in pixels, `(dcol, drow)` with rows pointing down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Deformation {
    Constant {
        dcol: f64,
        drow: f64,
    },
    /// `dcol = o0 + a0 sin(2 pi p0 c / cols) cos(2 pi p1 r / rows)`,
    /// `drow = o1 + a1 cos(2 pi p0 c / cols) sin(2 pi p1 r / rows)`.
    Sinusoidal {
        offset: [f64; 2],
        amplitude: [f64; 2],
        periods: [f64; 2],
    },
    /// Uniform contraction towards the image center by `strain`.
    Compression {
        strain: f64,
    },
}

impl Deformation {
    pub fn eval(&self, row: f64, col: f64, rows: usize, cols: usize) -> (f64, f64) {
        use std::f64::consts::PI;
        match *self {
            Deformation::Constant { dcol, drow } => (dcol, drow),
            Deformation::Sinusoidal { offset, amplitude, periods } => {
                let a = 2.0 * PI * periods[0] * col / cols as f64;
                let b = 2.0 * PI * periods[1] * row / rows as f64;
                (offset[0] + amplitude[0] * a.sin() * b.cos(), offset[1] + amplitude[1] * a.cos() * b.sin())
            }
            Deformation::Compression { strain } => {
                let cc = (cols as f64 - 1.0) / 2.0;
                let cr = (rows as f64 - 1.0) / 2.0;
                (-strain * (col - cc), -strain * (row - cr))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarpPairSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub width: f64,
    pub height: f64,
    pub deformation: Deformation,
    pub texture: TextureSpec,
    /// Optional low-feature texture used in the column band `fine_band`
    /// (fractions of the width, in reference coordinates).
    pub fine_texture: Option<TextureSpec>,
    pub fine_band: [f64; 2],
    /// Independent sensor noise added to each image.
    pub noise_sigma: f64,
}

impl Default for WarpPairSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            rows: 512,
            cols: 512,
            width: 0.512,
            height: 0.512,
            deformation: Deformation::Constant { dcol: 6.0, drow: 0.0 },
            texture: TextureSpec::default(),
            fine_texture: None,
            fine_band: [0.0, 0.5],
            noise_sigma: 0.005,
        }
    }
}

/// Reference, secondary and the displacement `d` with
/// `reference(x) = secondary(x + d(x))`, sampled at reference pixel centers.
#[derive(Clone, Debug)]
pub struct WarpPair {
    pub reference: PhysicalImage,
    pub secondary: PhysicalImage,
    pub dcol: Array2<f64>,
    pub drow: Array2<f64>,
    /// Pixels rendered with the fine texture.
    pub fine_mask: Array2<bool>,
}

impl WarpPair {
    /// True displacement in meters, `(x right, y up)`, at a reference pixel.
    pub fn displacement_m(&self, row: usize, col: usize) -> [f64; 2] {
        let cs = self.reference.coords();
        [self.dcol[[row, col]] * cs.dx(), -self.drow[[row, col]] * cs.dy()]
    }
}

pub fn gen_warp_pair(spec: &WarpPairSpec) -> Result<WarpPair> {
    let coords = CoordinateSystem::new(spec.rows, spec.cols, spec.width, spec.height, [0.0, 0.0])?;
    let (rows, cols) = (spec.rows, spec.cols);
    let def = &spec.deformation;
    let eval = |r: f64, c: f64| def.eval(r, c, rows, cols);

    let dcol = Array2::from_shape_fn((rows, cols), |(r, c)| eval(r as f64, c as f64).0);
    let drow = Array2::from_shape_fn((rows, cols), |(r, c)| eval(r as f64, c as f64).1);
    let max_d = dcol.iter().chain(drow.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let pad = max_d.ceil() as usize + 4;
    let (pr, pc) = (rows + 2 * pad, cols + 2 * pad);

    let mut rng = stream_rng(spec.seed, 0);
    let coarse = texture(pr, pc, &spec.texture, &mut rng);
    let band = |c: f64| {
        let x = (c - pad as f64) / cols as f64;
        x >= spec.fine_band[0] && x < spec.fine_band[1]
    };
    let canvas = match &spec.fine_texture {
        Some(ft) => {
            let fine = texture(pr, pc, ft, &mut rng);
            Array2::from_shape_fn((pr, pc), |(r, c)| if band(c as f64) { fine[[r, c]] } else { coarse[[r, c]] })
        }
        None => coarse,
    };
    let fine_mask = Array2::from_shape_fn((rows, cols), |(_, c)| spec.fine_texture.is_some() && band((c + pad) as f64));

    let mut reference = Array2::from_shape_fn((rows, cols), |(r, c)| canvas[[r + pad, c + pad]]);
    let view = canvas.view();
    let mut secondary = Array2::from_shape_fn((rows, cols), |(r, c)| {
        // Solve x + d(x) = y by fixed-point iteration.
        let (yr, yc) = (r as f64, c as f64);
        let (mut xr, mut xc) = (yr, yc);
        for _ in 0..100 {
            let (dc, dr) = eval(xr, xc);
            let (nr, nc) = (yr - dr, yc - dc);
            let done = (nr - xr).abs() < 1e-12 && (nc - xc).abs() < 1e-12;
            xr = nr;
            xc = nc;
            if done {
                break;
            }
        }
        sample::bilinear(&view, xr + pad as f64, xc + pad as f64, sample::Border::Clamp)
    });
    let mut noise = stream_rng(spec.seed, 1);
    add_noise(&mut reference, spec.noise_sigma, &mut noise);
    let mut noise = stream_rng(spec.seed, 2);
    add_noise(&mut secondary, spec.noise_sigma, &mut noise);

    Ok(WarpPair {
        reference: PhysicalImage::from_plane(reference, coords, ColorSpace::Gray)?,
        secondary: PhysicalImage::from_plane(secondary, coords, ColorSpace::Gray)?,
        dcol,
        drow,
        fine_mask,
    })
}
