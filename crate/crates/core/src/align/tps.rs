//! Thin-plate spline interpolation of scattered scalar data in the plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `s(x) = sum_k w_k phi(|x - x_k|) + a0 + a1 x + a2 y` with
/// `phi(r) = r^2 log r`, interpolating its data exactly and reproducing
/// affine data. Coordinates are normalized internally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinPlateSpline {
    center: [f64; 2],
    scale: f64,
    /// Normalized data sites.
    sites: Vec<[f64; 2]>,
    weights: Vec<f64>,
    affine: [f64; 3],
}

#[inline]
fn kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

impl ThinPlateSpline {
    /// Fits the spline through `(points[k], values[k])`. Needs at least three
    /// non-collinear, pairwise distinct points.
    pub fn fit(points: &[[f64; 2]], values: &[f64]) -> Result<Self> {
        let n = points.len();
        if n != values.len() {
            return Err(Error::invalid("point and value counts differ"));
        }
        if n < 3 {
            return Err(Error::Degenerate(format!("thin-plate spline needs at least 3 sites, got {n}")));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        if !(scale > 0.0) {
            return Err(Error::Degenerate("all interpolation sites coincide".into()));
        }
        let sites: Vec<[f64; 2]> = points.iter().map(|p| [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale]).collect();
        let mut sorted: Vec<[f64; 2]> = sites.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sites"));
        if sorted.windows(2).any(|w| (w[0][0] - w[1][0]).abs() < 1e-12 && (w[0][1] - w[1][1]).abs() < 1e-12) {
            return Err(Error::invalid("duplicate interpolation sites"));
        }

        let (mx, my) = (sites.iter().map(|p| p[0]).sum::<f64>() / n as f64, sites.iter().map(|p| p[1]).sum::<f64>() / n as f64);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in &sites {
            sxx += (p[0] - mx).powi(2);
            sxy += (p[0] - mx) * (p[1] - my);
            syy += (p[1] - my).powi(2);
        }
        let tr = sxx + syy;
        let det = sxx * syy - sxy * sxy;
        if det <= 1e-12 * tr * tr {
            return Err(Error::Degenerate("interpolation sites are collinear".into()));
        }

        let m = n + 3;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            for j in 0..i {
                let d2 = (sites[i][0] - sites[j][0]).powi(2) + (sites[i][1] - sites[j][1]).powi(2);
                let k = kernel(d2);
                a[(i, j)] = k;
                a[(j, i)] = k;
            }
            let row = [1.0, sites[i][0], sites[i][1]];
            for (c, v) in row.into_iter().enumerate() {
                a[(i, n + c)] = v;
                a[(n + c, i)] = v;
            }
        }
        let mut b = DVector::<f64>::zeros(m);
        for (i, v) in values.iter().enumerate() {
            b[i] = *v;
        }
        let x = a.lu().solve(&b).ok_or_else(|| Error::Degenerate("interpolation sites are collinear".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("interpolation sites are collinear".into()));
        }
        Ok(Self { center, scale, weights: x.rows(0, n).iter().copied().collect(), affine: [x[n], x[n + 1], x[n + 2]], sites })
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let x = (p[0] - self.center[0]) / self.scale;
        let y = (p[1] - self.center[1]) / self.scale;
        let mut s = self.affine[0] + self.affine[1] * x + self.affine[2] * y;
        for (site, w) in self.sites.iter().zip(&self.weights) {
            s += w * kernel((x - site[0]).powi(2) + (y - site[1]).powi(2));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_reproduces_affine() {
        let pts: Vec<[f64; 2]> = (0..30).map(|k| [(k * 37 % 101) as f64 * 0.01, (k * 53 % 97) as f64 * 0.013]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| 0.002 + 0.1 * p[0] - 0.3 * p[1]).collect();
        let s = ThinPlateSpline::fit(&pts, &vals).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((s.eval(*p) - v).abs() < 1e-12);
        }
        assert!((s.eval([0.5, 0.2]) - (0.002 + 0.05 - 0.06)).abs() < 1e-10);
    }

    #[test]
    fn exact_at_sites_for_wiggly_data() {
        let pts: Vec<[f64; 2]> = (0..40).map(|k| [(k % 8) as f64 * 0.1, (k / 8) as f64 * 0.1]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| 0.004 * (7.0 * p[0]).sin() * (5.0 * p[1]).cos()).collect();
        let s = ThinPlateSpline::fit(&pts, &vals).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((s.eval(*p) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_sites() {
        assert!(ThinPlateSpline::fit(&[[0.0, 0.0], [1.0, 0.0]], &[0.0, 1.0]).is_err());
        assert!(ThinPlateSpline::fit(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], &[0.0, 1.0, 0.5, 0.2]).is_err());
        assert!(ThinPlateSpline::fit(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], &[0.0, 1.0, 0.5, 0.2]).is_err());
    }
}
