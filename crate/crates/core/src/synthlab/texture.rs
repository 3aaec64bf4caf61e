use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::fft::{fft2, freq};

/// Band-limited random intensity texture ("sand").
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    /// Gaussian correlation length in pixels; larger means coarser grains.
    pub correlation_px: f64,
    /// Standard deviation of the intensity.
    pub contrast: f64,
    pub mean: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self { correlation_px: 3.0, contrast: 0.15, mean: 0.5 }
    }
}

/// Zero-mean, unit-variance Gaussian random field with Gaussian
/// autocorrelation of width `correlation_px` (periodic).
pub fn gaussian_field<R: Rng>(rows: usize, cols: usize, correlation_px: f64, rng: &mut R) -> Array2<f64> {
    let mut buf = Array2::from_shape_simple_fn((rows, cols), || Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0));
    if correlation_px > 0.0 {
        fft2(&mut buf, FftDirection::Forward);
        let s = 2.0 * std::f64::consts::PI * std::f64::consts::PI * correlation_px * correlation_px;
        for ((r, c), v) in buf.indexed_iter_mut() {
            let fr = freq(r, rows) / rows as f64;
            let fc = freq(c, cols) / cols as f64;
            *v *= (-s * (fr * fr + fc * fc)).exp();
        }
        fft2(&mut buf, FftDirection::Inverse);
    }
    let re = buf.mapv(|z| z.re);
    let n = re.len() as f64;
    let mean = re.sum() / n;
    let sd = (re.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        re.mapv(|v| (v - mean) / sd)
    } else {
        re.mapv(|_| 0.0)
    }
}

pub fn texture<R: Rng>(rows: usize, cols: usize, spec: &TextureSpec, rng: &mut R) -> Array2<f64> {
    gaussian_field(rows, cols, spec.correlation_px, rng).mapv(|z| (spec.mean + spec.contrast * z).clamp(0.0, 1.0))
}

/// Adds i.i.d. Gaussian noise and clamps to `[0, 1]`.
pub fn add_noise<R: Rng>(plane: &mut Array2<f64>, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    for v in plane.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v + sigma * z).clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalized_and_smooth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gaussian_field(64, 96, 4.0, &mut rng);
        let n = g.len() as f64;
        assert!((g.sum() / n).abs() < 1e-12);
        assert!(((g.mapv(|v| v * v).sum() / n) - 1.0).abs() < 1e-9);
        // neighbor correlation close to exp(-1/(4 l^2)) for Gaussian autocorrelation
        let mut acc = 0.0;
        for r in 0..64 {
            for c in 0..95 {
                acc += g[[r, c]] * g[[r, c + 1]];
            }
        }
        assert!(acc / (64.0 * 95.0) > 0.9);
    }
}
