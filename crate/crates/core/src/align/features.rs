//! Corner-feature patch matcher: Harris corners, binary intensity-pair
//! descriptors, Hamming matching and a RANSAC homography.

use nalgebra::{DMatrix, Matrix3};
use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matcher::{MatchConfig, PatchMatch, PatchMatcher};
use crate::corrections::{apply_homography, homography_from_points};

const DESCRIPTOR_RADIUS: i64 = 12;
const PAIRS: usize = 256;

#[derive(Clone, Debug)]
pub struct FeatureMatcher {
    pub max_corners: usize,
    /// Largest Hamming distance of an accepted descriptor match.
    pub max_distance: u32,
    /// Reprojection tolerance of RANSAC inliers, pixels.
    pub inlier_tol: f64,
    pub iterations: usize,
    pub min_inliers: usize,
    pairs: Vec<[(i64, i64); 2]>,
}

impl Default for FeatureMatcher {
    fn default() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let r = DESCRIPTOR_RADIUS;
        let pairs = (0..PAIRS).map(|_| [(rng.random_range(-r..=r), rng.random_range(-r..=r)), (rng.random_range(-r..=r), rng.random_range(-r..=r))]).collect();
        Self { max_corners: 300, max_distance: 64, inlier_tol: 1.5, iterations: 500, min_inliers: 8, pairs }
    }
}

fn gaussian_blur(plane: &ArrayView2<f64>, sigma: f64) -> Array2<f64> {
    let rad = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-rad..=rad).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|v| v / sum).collect();
    let (rows, cols) = plane.dim();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let tmp = Array2::from_shape_fn((rows, cols), |(r, c)| {
        k.iter().enumerate().map(|(i, w)| w * plane[[r, clamp(c as i64 + i as i64 - rad, cols)]]).sum::<f64>()
    });
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        k.iter().enumerate().map(|(i, w)| w * tmp[[clamp(r as i64 + i as i64 - rad, rows), c]]).sum::<f64>()
    })
}

/// Harris corners `(row, col)` at least `border` pixels from the edges,
/// strongest first.
fn harris_corners(plane: &ArrayView2<f64>, border: usize, max_corners: usize) -> Vec<(usize, usize)> {
    let (rows, cols) = plane.dim();
    if rows < 2 * border + 3 || cols < 2 * border + 3 {
        return Vec::new();
    }
    let smooth = gaussian_blur(plane, 1.0);
    let mut ixx = Array2::zeros((rows, cols));
    let mut iyy = Array2::zeros((rows, cols));
    let mut ixy = Array2::zeros((rows, cols));
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            let gx = 0.5 * (smooth[[r, c + 1]] - smooth[[r, c - 1]]);
            let gy = 0.5 * (smooth[[r + 1, c]] - smooth[[r - 1, c]]);
            ixx[[r, c]] = gx * gx;
            iyy[[r, c]] = gy * gy;
            ixy[[r, c]] = gx * gy;
        }
    }
    let (sxx, syy, sxy) = (gaussian_blur(&ixx.view(), 1.5), gaussian_blur(&iyy.view(), 1.5), gaussian_blur(&ixy.view(), 1.5));
    let resp = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (a, b, d) = (sxx[[r, c]], syy[[r, c]], sxy[[r, c]]);
        a * b - d * d - 0.04 * (a + b) * (a + b)
    });
    let max = resp.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut found = Vec::new();
    for r in border..rows - border {
        for c in border..cols - border {
            let v = resp[[r, c]];
            if v <= 1e-3 * max {
                continue;
            }
            let window = resp.slice(s![r - 2..=r + 2, c - 2..=c + 2]);
            if window.iter().all(|&w| w <= v) {
                found.push((v, r, c));
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    found.truncate(max_corners);
    found.into_iter().map(|(_, r, c)| (r, c)).collect()
}

impl FeatureMatcher {
    fn describe(&self, smooth: &Array2<f64>, (r, c): (usize, usize)) -> [u64; 4] {
        let mut d = [0u64; 4];
        for (k, [(r1, c1), (r2, c2)]) in self.pairs.iter().enumerate() {
            let a = smooth[[(r as i64 + r1) as usize, (c as i64 + c1) as usize]];
            let b = smooth[[(r as i64 + r2) as usize, (c as i64 + c2) as usize]];
            if a < b {
                d[k / 64] |= 1 << (k % 64);
            }
        }
        d
    }

    fn keypoints(&self, plane: &ArrayView2<f64>) -> Vec<([f64; 2], [u64; 4])> {
        let border = DESCRIPTOR_RADIUS as usize + 1;
        let smooth = gaussian_blur(plane, 2.0);
        harris_corners(plane, border, self.max_corners)
            .into_iter()
            .map(|p| ([p.1 as f64, p.0 as f64], self.describe(&smooth, p)))
            .collect()
    }
}

fn hamming(a: &[u64; 4], b: &[u64; 4]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Least-squares homography by the normalized direct linear transform.
fn fit_homography(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Option<Matrix3<f64>> {
    let norm = |pts: &[[f64; 2]]| {
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n);
        let d = pts.iter().map(|p| (p[0] - mx).hypot(p[1] - my)).sum::<f64>() / n;
        let s = if d > 0.0 { std::f64::consts::SQRT_2 / d } else { 1.0 };
        Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
    };
    let (ts, td) = (norm(src), norm(dst));
    let mut a = DMatrix::zeros(2 * src.len(), 9);
    for (k, (p, q)) in src.iter().zip(dst).enumerate() {
        let p = apply_homography(&ts, *p);
        let q = apply_homography(&td, *q);
        let (x, y, u, v) = (p[0], p[1], q[0], q[1]);
        let rows = [[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u], [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]];
        for (i, row) in rows.iter().enumerate() {
            for (j, val) in row.iter().enumerate() {
                a[(2 * k + i, j)] = *val;
            }
        }
    }
    let svd = (a.transpose() * &a).symmetric_eigen();
    let imin = svd.eigenvalues.imin();
    let h = svd.eigenvectors.column(imin);
    let hn = Matrix3::from_row_slice(h.as_slice());
    let full = td.try_inverse()? * hn * ts;
    if full[(2, 2)].abs() < 1e-15 {
        return None;
    }
    Some(full / full[(2, 2)])
}

impl PatchMatcher for FeatureMatcher {
    fn name(&self) -> &str {
        "feature"
    }

    fn estimate(&self, reference: &ArrayView2<f64>, secondary: &ArrayView2<f64>, block: (usize, usize, usize, usize), cfg: &MatchConfig) -> PatchMatch {
        let (r0, r1, c0, c1) = block;
        let (rows, cols) = secondary.dim();
        let m = ((cfg.search_fraction * (r1 - r0).min(c1 - c0) as f64).floor() as usize).max(1);
        let (wr0, wr1, wc0, wc1) = (r0.saturating_sub(m), (r1 + m).min(rows), c0.saturating_sub(m), (c1 + m).min(cols));
        let ref_kp = self.keypoints(&reference.slice(s![r0..r1, c0..c1]));
        let sec_kp = self.keypoints(&secondary.slice(s![wr0..wr1, wc0..wc1]));
        if ref_kp.len() < self.min_inliers || sec_kp.len() < self.min_inliers {
            return PatchMatch::rejected("too few corners", [0.0; 2], 0.0);
        }
        let best = |d: &[u64; 4], set: &[([f64; 2], [u64; 4])]| {
            set.iter().enumerate().map(|(i, k)| (hamming(d, &k.1), i)).min().unwrap()
        };
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (i, (p, d)) in ref_kp.iter().enumerate() {
            let (dist, j) = best(d, &sec_kp);
            if dist > self.max_distance || best(&sec_kp[j].1, &ref_kp).1 != i {
                continue;
            }
            src.push([p[0] + c0 as f64, p[1] + r0 as f64]);
            dst.push([sec_kp[j].0[0] + wc0 as f64, sec_kp[j].0[1] + wr0 as f64]);
        }
        if src.len() < self.min_inliers {
            return PatchMatch::rejected("too few descriptor matches", [0.0; 2], 0.0);
        }

        let mut rng = ChaCha8Rng::seed_from_u64((r0 * 7919 + c0) as u64);
        let n = src.len();
        let mut best_inliers: Vec<usize> = Vec::new();
        let tol2 = self.inlier_tol * self.inlier_tol;
        let inliers_of = |h: &Matrix3<f64>| {
            (0..n)
                .filter(|&k| {
                    let q = apply_homography(h, src[k]);
                    (q[0] - dst[k][0]).powi(2) + (q[1] - dst[k][1]).powi(2) <= tol2
                })
                .collect::<Vec<_>>()
        };
        for _ in 0..self.iterations {
            let mut idx = [0usize; 4];
            for k in 0..4 {
                loop {
                    let c = rng.random_range(0..n);
                    if !idx[..k].contains(&c) {
                        idx[k] = c;
                        break;
                    }
                }
            }
            let s4 = idx.map(|k| src[k]);
            let d4 = idx.map(|k| dst[k]);
            let Ok(h) = homography_from_points(&s4, &d4) else { continue };
            let inl = inliers_of(&h);
            if inl.len() > best_inliers.len() {
                best_inliers = inl;
            }
        }
        if best_inliers.len() < self.min_inliers {
            return PatchMatch::rejected("too few RANSAC inliers", [0.0; 2], 0.0);
        }
        let s_in: Vec<_> = best_inliers.iter().map(|&k| src[k]).collect();
        let d_in: Vec<_> = best_inliers.iter().map(|&k| dst[k]).collect();
        let Some(h) = fit_homography(&s_in, &d_in) else {
            return PatchMatch::rejected("homography fit failed", [0.0; 2], 0.0);
        };
        let score = best_inliers.len() as f64 / n as f64;
        let center = [(c0 + c1) as f64 / 2.0 - 0.5, (r0 + r1) as f64 / 2.0 - 0.5];
        let pc = apply_homography(&h, center);
        let t = [pc[0] - center[0], pc[1] - center[1]];
        let corners = [[c0 as f64, r0 as f64], [c1 as f64, r0 as f64], [c1 as f64, r1 as f64], [c0 as f64, r1 as f64]];
        let residual = corners
            .iter()
            .map(|q| {
                let p = apply_homography(&h, *q);
                (p[0] - q[0] - t[0]).hypot(p[1] - q[1] - t[1])
            })
            .fold(0.0, f64::max);
        if score < cfg.threshold {
            return PatchMatch::rejected("weak inlier fraction", t, score);
        }
        if residual > cfg.dominance_tol {
            return PatchMatch::rejected(format!("not translation dominated ({residual:.2} px)"), t, score);
        }
        PatchMatch { translation: t, score, accepted: true, reason: None, center: Some(center) }
    }
}
