//! Weighted anisotropic TV denoising by split Bregman.
//!
//! Minimizes, in pixel units,
//!
//! ```text
//! E(u) = 1/2 sum_i w_i (f_i - u_i)^2 + sum_i mx_i |u_{i+x} - u_i| + my_i |u_{i+y} - u_i|
//! ```
//!
//! with forward differences and reflecting boundaries (differences leaving
//! the domain vanish). The edge weights `mx`, `my` are the regularization
//! parameter converted to pixels, taken as the smaller of the two endpoint
//! values so that a zero-mu pixel is decoupled from all its neighbors.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use super::RegularizationConfig;
use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, PhysicalImage};

/// Solver outcome reported alongside the regularized image.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub relative_change: f64,
    pub initial_objective: f64,
    pub final_objective: f64,
}

#[derive(Clone, Debug)]
pub struct TvOutput {
    pub image: PhysicalImage,
    pub diagnostics: TvDiagnostics,
}

/// Discrete problem data on the pixel grid.
#[derive(Clone, Debug)]
pub struct PixelProblem {
    pub f: Array2<f64>,
    pub omega: Array2<f64>,
    /// Weight of the edge between `(r, c)` and `(r, c + 1)`; last column unused.
    pub mu_x: Array2<f64>,
    /// Weight of the edge between `(r, c)` and `(r + 1, c)`; last row unused.
    pub mu_y: Array2<f64>,
}

impl PixelProblem {
    /// Builds edge weights from a per-pixel mu already expressed in pixel units
    /// along each axis.
    pub fn new(f: Array2<f64>, omega: Array2<f64>, mu_px_x: &Array2<f64>, mu_px_y: &Array2<f64>) -> Self {
        let (rows, cols) = f.dim();
        let mut mu_x = Array2::zeros((rows, cols));
        let mut mu_y = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    mu_x[[r, c]] = mu_px_x[[r, c]].min(mu_px_x[[r, c + 1]]);
                }
                if r + 1 < rows {
                    mu_y[[r, c]] = mu_px_y[[r, c]].min(mu_px_y[[r + 1, c]]);
                }
            }
        }
        Self { f, omega, mu_x, mu_y }
    }

    /// Uniform-weight problem, handy for tests.
    pub fn uniform(f: Array2<f64>, omega: f64, mu: f64) -> Self {
        let dim = f.dim();
        let m = Array2::from_elem(dim, mu);
        Self::new(f, Array2::from_elem(dim, omega), &m, &m)
    }

    /// Mean weight over all interior edges.
    pub fn mean_edge_weight(&self) -> f64 {
        let (rows, cols) = self.f.dim();
        let n = rows * (cols - 1) + cols * (rows - 1);
        let sx: f64 = self.mu_x.slice(ndarray::s![.., ..cols - 1]).sum();
        let sy: f64 = self.mu_y.slice(ndarray::s![..rows - 1, ..]).sum();
        if n == 0 {
            0.0
        } else {
            (sx + sy) / n as f64
        }
    }

    pub fn objective(&self, u: &ArrayView2<f64>) -> f64 {
        objective(&self.f.view(), u, &self.omega.view(), &self.mu_x.view(), &self.mu_y.view())
    }
}

pub fn objective(
    f: &ArrayView2<f64>,
    u: &ArrayView2<f64>,
    omega: &ArrayView2<f64>,
    mu_x: &ArrayView2<f64>,
    mu_y: &ArrayView2<f64>,
) -> f64 {
    let (rows, cols) = f.dim();
    let mut e = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let d = f[[r, c]] - u[[r, c]];
            e += 0.5 * omega[[r, c]] * d * d;
            if c + 1 < cols {
                e += mu_x[[r, c]] * (u[[r, c + 1]] - u[[r, c]]).abs();
            }
            if r + 1 < rows {
                e += mu_y[[r, c]] * (u[[r + 1, c]] - u[[r, c]]).abs();
            }
        }
    }
    e
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solver controls independent of the physical setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverControls {
    pub penalty: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub sweeps: usize,
}

/// Split Bregman iterations with red-black Gauss-Seidel sweeps for the
/// quadratic subproblem `(W + p D^T D) u = W f + p D^T (d - b)`.
pub fn split_bregman(problem: &PixelProblem, controls: SolverControls) -> (Array2<f64>, TvDiagnostics) {
    let (rows, cols) = problem.f.dim();
    let n = rows * cols;
    let f = problem.f.as_standard_layout();
    let f = f.as_slice().expect("standard layout");
    let w = problem.omega.as_standard_layout();
    let w = w.as_slice().expect("standard layout");
    let mx = problem.mu_x.as_standard_layout();
    let mx = mx.as_slice().expect("standard layout");
    let my = problem.mu_y.as_standard_layout();
    let my = my.as_slice().expect("standard layout");
    if mx.iter().chain(my.iter()).all(|&m| m == 0.0) && w.iter().all(|&v| v > 0.0) {
        // Without a TV term the minimizer is the data itself.
        let objective = problem.objective(&problem.f.view());
        let diagnostics = TvDiagnostics { iterations: 0, converged: true, relative_change: 0.0, initial_objective: objective, final_objective: objective };
        return (problem.f.clone(), diagnostics);
    }
    let p = controls.penalty;

    let mut u: Vec<f64> = f.to_vec();
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut prev = vec![0.0; n];

    let initial_objective = problem.objective(&problem.f.view());
    if mx.iter().chain(my).all(|&m| m == 0.0) && w.iter().all(|&v| v > 0.0) {
        let diagnostics = TvDiagnostics {
            iterations: 0,
            converged: true,
            relative_change: 0.0,
            initial_objective,
            final_objective: initial_objective,
        };
        return (problem.f.clone(), diagnostics);
    }

    // Degree of each node in the grid graph.
    let degree = |r: usize, c: usize| -> f64 {
        (usize::from(r > 0) + usize::from(r + 1 < rows) + usize::from(c > 0) + usize::from(c + 1 < cols)) as f64
    };

    let mut iterations = 0;
    let mut relative_change = f64::INFINITY;
    let mut converged = false;
    for it in 0..controls.max_iter {
        iterations = it + 1;
        prev.copy_from_slice(&u);

        // rhs = W f + p * D^T (d - b); D^T v at i = v_{i-1} - v_i per axis,
        // with v at the last column/row equal to zero.
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let mut acc = 0.0;
                if c + 1 < cols {
                    acc -= dx[i] - bx[i];
                }
                if c > 0 {
                    acc += dx[i - 1] - bx[i - 1];
                }
                if r + 1 < rows {
                    acc -= dy[i] - by[i];
                }
                if r > 0 {
                    acc += dy[i - cols] - by[i - cols];
                }
                rhs[i] = w[i] * f[i] + p * acc;
            }
        }

        for _ in 0..controls.sweeps {
            for color in 0..2 {
                for r in 0..rows {
                    let start = (r + color) % 2;
                    let mut c = start;
                    while c < cols {
                        let i = r * cols + c;
                        let mut nb = 0.0;
                        if c > 0 {
                            nb += u[i - 1];
                        }
                        if c + 1 < cols {
                            nb += u[i + 1];
                        }
                        if r > 0 {
                            nb += u[i - cols];
                        }
                        if r + 1 < rows {
                            nb += u[i + cols];
                        }
                        u[i] = (rhs[i] + p * nb) / (w[i] + p * degree(r, c));
                        c += 2;
                    }
                }
            }
        }

        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    let g = u[i + 1] - u[i];
                    dx[i] = shrink(g + bx[i], mx[i] / p);
                    bx[i] += g - dx[i];
                }
                if r + 1 < rows {
                    let g = u[i + cols] - u[i];
                    dy[i] = shrink(g + by[i], my[i] / p);
                    by[i] += g - dy[i];
                }
            }
        }

        let num: f64 = u.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = prev.iter().map(|a| a * a).sum();
        relative_change = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        if relative_change <= controls.tol {
            converged = true;
            break;
        }
    }

    // Projecting onto [min f, max f] lowers both terms of the objective.
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for v in u.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    let u = Array2::from_shape_vec((rows, cols), u).expect("shape");
    let final_objective = problem.objective(&u.view());
    let diagnostics = TvDiagnostics { iterations, converged, relative_change, initial_objective, final_objective };
    (u, diagnostics)
}

/// Pixel-unit problem for a single-channel image under a physical config.
pub fn pixel_problem(image: &PhysicalImage, config: &RegularizationConfig) -> Result<PixelProblem> {
    let plane = image.plane()?;
    let (rows, cols) = plane.dim();
    config.validate()?;
    config.mu.check_shape(rows, cols, "mu")?;
    config.omega.check_shape(rows, cols, "omega")?;
    let cs = image.coords();
    let mu = config.mu.to_array(rows, cols);
    let mu_px_x = mu.mapv(|m| m / cs.dx());
    let mu_px_y = mu.mapv(|m| m / cs.dy());
    Ok(PixelProblem::new(plane.to_owned(), config.omega.to_array(rows, cols), &mu_px_x, &mu_px_y))
}

/// Weighted TV regularization of a single-channel physical image.
///
/// Non-convergence within `max_iter` is not an error: the last iterate is
/// returned with `diagnostics.converged == false`.
pub fn tv_denoise(image: &PhysicalImage, config: &RegularizationConfig) -> Result<TvOutput> {
    let problem = pixel_problem(image, config)?;
    let (u, diagnostics) = split_bregman(&problem, config.controls(problem.mean_edge_weight()));
    if !diagnostics.converged {
        log::warn!(
            "split Bregman stopped after {} iterations with relative change {:.3e}",
            diagnostics.iterations,
            diagnostics.relative_change
        );
    }
    let colorspace = match image.colorspace() {
        ColorSpace::Binary => ColorSpace::Gray,
        cs => cs,
    };
    let image = PhysicalImage::from_parts(u.insert_axis(ndarray::Axis(2)), *image.coords(), image.timestamp(), colorspace)?;
    Ok(TvOutput { image, diagnostics })
}

/// Regularizes a signed signal plane (values need not lie in `[0, 1]`).
pub fn tv_denoise_plane(
    plane: &ArrayView2<f64>,
    coords: &crate::imgcore::CoordinateSystem,
    config: &RegularizationConfig,
) -> Result<(Array2<f64>, TvDiagnostics)> {
    config.validate()?;
    let (rows, cols) = plane.dim();
    if (rows, cols) != (coords.rows, coords.cols) {
        return Err(Error::mismatch("signal plane and coordinate system differ"));
    }
    config.mu.check_shape(rows, cols, "mu")?;
    config.omega.check_shape(rows, cols, "omega")?;
    let mu = config.mu.to_array(rows, cols);
    let problem = PixelProblem::new(
        plane.to_owned(),
        config.omega.to_array(rows, cols),
        &mu.mapv(|m| m / coords.dx()),
        &mu.mapv(|m| m / coords.dy()),
    );
    Ok(split_bregman(&problem, config.controls(problem.mean_edge_weight())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn tight() -> SolverControls {
        SolverControls { penalty: 1.0, max_iter: 20_000, tol: 1e-12, sweeps: 4 }
    }

    /// Exact minimum over `u_i in levels` via threshold decomposition: the
    /// energy splits into independent binary cut problems, one per level,
    /// each solved by enumerating all labelings.
    fn level_set_minimum(p: &PixelProblem, levels: &[f64]) -> f64 {
        let (rows, cols) = p.f.dim();
        let n = rows * cols;
        assert!(n <= 12);
        let f: Vec<f64> = p.f.iter().copied().collect();
        let w: Vec<f64> = p.omega.iter().copied().collect();
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1, p.mu_x[[r, c]]));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols, p.mu_y[[r, c]]));
                }
            }
        }
        let base: f64 = (0..n).map(|i| 0.5 * w[i] * (f[i] - levels[0]).powi(2)).sum();
        let mut total = base;
        for k in 1..levels.len() {
            let (lo, hi) = (levels[k - 1], levels[k]);
            let gain: Vec<f64> = (0..n).map(|i| 0.5 * w[i] * ((f[i] - hi).powi(2) - (f[i] - lo).powi(2))).collect();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                let on = |i: usize| mask >> i & 1 == 1;
                let mut e: f64 = (0..n).filter(|&i| on(i)).map(|i| gain[i]).sum();
                for &(a, b, m) in &edges {
                    if on(a) != on(b) {
                        e += m * (hi - lo);
                    }
                }
                best = best.min(e);
            }
            total += best;
        }
        total
    }

    fn grid(step: f64) -> Vec<f64> {
        let n = (1.0 / step).round() as usize;
        (0..=n).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn four_pixel_step() {
        let p = PixelProblem::uniform(array![[0.0, 0.0, 1.0, 1.0]], 1.0, 0.25);
        let (u, d) = split_bregman(&p, tight());
        for (got, want) in u.iter().zip([0.125, 0.125, 0.875, 0.875]) {
            assert!((got - want).abs() < 1e-6, "{u:?}");
        }
        assert!((d.final_objective - 0.21875).abs() < 1e-6);
        assert!((level_set_minimum(&p, &grid(0.125)) - 0.21875).abs() < 1e-12);
    }

    #[test]
    fn constant_is_fixed_point() {
        let p = PixelProblem::uniform(Array2::from_elem((6, 7), 0.37), 1.0, 3.0);
        let (u, _) = split_bregman(&p, tight());
        assert!(u.iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn zero_mu_is_identity() {
        let f = Array2::from_shape_fn((5, 6), |(r, c)| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        let p = PixelProblem::uniform(f.clone(), 1.0, 0.0);
        let (u, d) = split_bregman(&p, tight());
        assert!(d.converged);
        assert!(u.iter().zip(f.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn huge_mu_gives_weighted_mean() {
        let f = Array2::from_shape_fn((6, 6), |(r, c)| ((r * 5 + c * 2) % 7) as f64 / 6.0);
        let w = Array2::from_shape_fn((6, 6), |(r, c)| if (r + c) % 3 == 0 { 0.0 } else { 1.0 + r as f64 });
        let m = Array2::from_elem((6, 6), 1e3);
        let p = PixelProblem::new(f.clone(), w.clone(), &m, &m);
        let (u, _) = split_bregman(&p, SolverControls { penalty: 50.0, ..tight() });
        let mean = (&w * &f).sum() / w.sum();
        assert!(u.iter().all(|v| (v - mean).abs() < 1e-4), "mean {mean} u {u:?}");
    }

    #[test]
    fn matches_level_set_oracle_on_small_grids() {
        let cases = [
            (array![[0.1, 0.9, 0.3], [0.7, 0.2, 0.8], [0.4, 0.6, 0.05]], 0.3),
            (array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], 0.2),
            (array![[0.2, 0.25, 0.9, 0.95], [0.15, 0.3, 0.85, 1.0]], 0.15),
            (array![[0.5, 0.52, 0.48], [0.51, 0.49, 0.5]], 0.01),
        ];
        for (f, mu) in cases {
            let p = PixelProblem::uniform(f, 1.0, mu);
            let (_, d) = split_bregman(&p, tight());
            let coarse = level_set_minimum(&p, &grid(0.05));
            let fine = level_set_minimum(&p, &grid(0.001));
            assert!(d.final_objective <= coarse + 1e-3, "{} vs {coarse}", d.final_objective);
            assert!((d.final_objective - fine).abs() <= 1e-3, "{} vs {fine}", d.final_objective);
        }
    }

    #[test]
    fn zero_mu_pixel_is_decoupled() {
        let f = array![[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let mut mu = Array2::from_elem((3, 3), 10.0);
        mu[[0, 2]] = 0.0;
        let p = PixelProblem::new(f, Array2::ones((3, 3)), &mu, &mu);
        let (u, _) = split_bregman(&p, tight());
        assert!((u[[0, 2]] - 1.0).abs() < 1e-9);
        assert!(u.iter().enumerate().filter(|(k, _)| *k != 2).all(|(_, v)| v.abs() < 1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stays_within_input_range(vals in proptest::collection::vec(0.0f64..1.0, 20), mu in 0.0f64..2.0) {
            let f = Array2::from_shape_vec((4, 5), vals).unwrap();
            let p = PixelProblem::uniform(f.clone(), 1.0, mu);
            let (u, d) = split_bregman(&p, SolverControls { penalty: 1.0, max_iter: 300, tol: 1e-8, sweeps: 2 });
            let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(u.iter().all(|&v| v >= lo && v <= hi));
            prop_assert!(d.final_objective <= d.initial_objective + 1e-12);
        }

        #[test]
        fn beats_quantized_minimum(vals in proptest::collection::vec(0.0f64..1.0, 6), mu in 0.0f64..0.5) {
            let f = Array2::from_shape_vec((2, 3), vals).unwrap();
            let p = PixelProblem::uniform(f, 1.0, mu);
            let (_, d) = split_bregman(&p, tight());
            let coarse = level_set_minimum(&p, &grid(0.05));
            prop_assert!(d.final_objective <= coarse + 1e-3);
        }
    }
}
