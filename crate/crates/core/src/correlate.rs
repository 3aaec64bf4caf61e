//! Normalized cross-correlation of a template against every placement in a
//! larger search window, with quadratic subpixel peak refinement.

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::fft::fft2;

/// NCC surface of shape `(H - h + 1, W - w + 1)`; entry `(u, v)` compares
/// `template` with `search[u.., v..]`. Flat windows score 0.
pub fn ncc_surface(template: &ArrayView2<f64>, search: &ArrayView2<f64>) -> Array2<f64> {
    let (h, w) = template.dim();
    let (sh, sw) = search.dim();
    assert!(h <= sh && w <= sw, "template larger than search window");
    let (oh, ow) = (sh - h + 1, sw - w + 1);
    let n = (h * w) as f64;

    let t_mean = template.sum() / n;
    let t_norm = template.iter().map(|v| (v - t_mean) * (v - t_mean)).sum::<f64>().sqrt();

    // Integral images of the search window and its square.
    let mut s1 = Array2::<f64>::zeros((sh + 1, sw + 1));
    let mut s2 = Array2::<f64>::zeros((sh + 1, sw + 1));
    for r in 0..sh {
        let (mut a1, mut a2) = (0.0, 0.0);
        for c in 0..sw {
            let v = search[[r, c]];
            a1 += v;
            a2 += v * v;
            s1[[r + 1, c + 1]] = s1[[r, c + 1]] + a1;
            s2[[r + 1, c + 1]] = s2[[r, c + 1]] + a2;
        }
    }
    let boxsum = |s: &Array2<f64>, u: usize, v: usize| s[[u + h, v + w]] - s[[u, v + w]] - s[[u + h, v]] + s[[u, v]];

    let cross = if oh * ow * h * w <= 1 << 16 {
        Array2::from_shape_fn((oh, ow), |(u, v)| {
            let mut acc = 0.0;
            for i in 0..h {
                for j in 0..w {
                    acc += (template[[i, j]] - t_mean) * search[[u + i, v + j]];
                }
            }
            acc
        })
    } else {
        let mut ft = Array2::from_elem((sh, sw), Complex64::new(0.0, 0.0));
        for i in 0..h {
            for j in 0..w {
                ft[[i, j]] = Complex64::new(template[[i, j]] - t_mean, 0.0);
            }
        }
        let mut fs = search.mapv(|v| Complex64::new(v, 0.0));
        fft2(&mut ft, FftDirection::Forward);
        fft2(&mut fs, FftDirection::Forward);
        let mut prod = Array2::from_shape_fn((sh, sw), |idx| ft[idx].conj() * fs[idx]);
        fft2(&mut prod, FftDirection::Inverse);
        let scale = 1.0 / (sh * sw) as f64;
        Array2::from_shape_fn((oh, ow), |(u, v)| prod[[u, v]].re * scale)
    };

    Array2::from_shape_fn((oh, ow), |(u, v)| {
        let sum = boxsum(&s1, u, v);
        let sq = boxsum(&s2, u, v);
        let var = sq - sum * sum / n;
        // Relative floor: cancellation in the integral images leaves
        // round-off sized variance on flat windows.
        if var <= 1e-10 * sq.max(1e-300) || t_norm <= 1e-9 {
            0.0
        } else {
            (cross[[u, v]] / (t_norm * var.sqrt())).clamp(-1.0, 1.0)
        }
    })
}

/// Location and value of the maximum (first in row-major order on ties).
pub fn argmax(surface: &ArrayView2<f64>) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for (idx, &v) in surface.indexed_iter() {
        if v > best.1 {
            best = (idx, v);
        }
    }
    best
}

/// Vertex offset of the parabola through `(-1, a)`, `(0, b)`, `(1, c)`,
/// limited to half a sample.
#[inline]
pub fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

/// Subpixel peak `(row, col)` by separable quadratic fits around an interior
/// integer maximum. A perfect match (score 1) is returned unrefined.
pub fn refine_peak(surface: &ArrayView2<f64>, peak: (usize, usize)) -> (f64, f64) {
    let (r, c) = peak;
    let (rows, cols) = surface.dim();
    let b = surface[[r, c]];
    if b >= 1.0 - 1e-12 {
        return (r as f64, c as f64);
    }
    let dr = if r > 0 && r + 1 < rows { parabolic_offset(surface[[r - 1, c]], b, surface[[r + 1, c]]) } else { 0.0 };
    let dc = if c > 0 && c + 1 < cols { parabolic_offset(surface[[r, c - 1]], b, surface[[r, c + 1]]) } else { 0.0 };
    (r as f64 + dr, c as f64 + dc)
}
