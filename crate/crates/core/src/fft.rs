//! 2-D FFT on row-major complex buffers.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D transform. The inverse is unnormalized.
pub(crate) fn fft2(buf: &mut Array2<Complex64>, direction: FftDirection) {
    let (rows, cols) = buf.dim();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(cols, direction);
    let col_fft = planner.plan_fft(rows, direction);
    for mut row in buf.rows_mut() {
        let mut tmp: Vec<Complex64> = row.to_vec();
        row_fft.process(&mut tmp);
        row.iter_mut().zip(tmp).for_each(|(d, s)| *d = s);
    }
    let mut tmp = vec![Complex64::new(0.0, 0.0); rows];
    for mut col in buf.columns_mut() {
        tmp.iter_mut().zip(col.iter()).for_each(|(d, s)| *d = *s);
        col_fft.process(&mut tmp);
        col.iter_mut().zip(&tmp).for_each(|(d, s)| *d = *s);
    }
}

/// Signed frequency index for position `k` of an `n`-point transform.
#[inline]
pub(crate) fn freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let orig = Array2::from_shape_fn((6, 10), |(r, c)| Complex64::new((r * 3 + c) as f64, 0.0));
        let mut buf = orig.clone();
        fft2(&mut buf, FftDirection::Forward);
        fft2(&mut buf, FftDirection::Inverse);
        let n = 60.0;
        for (a, b) in buf.iter().zip(orig.iter()) {
            assert!((a / n - b).norm() < 1e-10);
        }
    }
}
