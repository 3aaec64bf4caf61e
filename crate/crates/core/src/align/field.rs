use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tps::ThinPlateSpline;
use crate::error::{Error, Result};
use crate::imgcore::{patch_blocks, ColorSpace, CoordinateSystem, PhysicalImage};

/// Displacement estimate of one patch, in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    /// Patch center in the reference image.
    pub center: [f64; 2],
    pub displacement: [f64; 2],
    pub score: f64,
    pub accepted: bool,
    /// Rejected at this level; the displacement is carried over from the
    /// previous level and still constrains the interpolant.
    #[serde(default)]
    pub prior: bool,
}

/// Prescribes one displacement component at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub point: [f64; 2],
    /// 0 for x, 1 for y.
    pub component: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Zero normal displacement at `count` evenly spaced points along each of
/// the given domain sides.
pub fn fixed_sides(domain: &CoordinateSystem, sides: &[Side], count: usize) -> Vec<BoundaryCondition> {
    let [x0, y0] = domain.origin;
    let (x1, y1) = (domain.right(), domain.top());
    let mut out = Vec::new();
    for side in sides {
        for k in 0..count {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.5 };
            let (point, component) = match side {
                Side::Left => ([x0, y0 + t * (y1 - y0)], 0),
                Side::Right => ([x1, y0 + t * (y1 - y0)], 0),
                Side::Bottom => ([x0 + t * (x1 - x0), y0], 1),
                Side::Top => ([x0 + t * (x1 - x0), y1], 1),
            };
            out.push(BoundaryCondition { point, component, value: 0.0 });
        }
    }
    out
}

/// Piecewise-linear vector field on a regular grid of rectangles spanning
/// the domain, each split into two triangles along its rising diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub origin: [f64; 2],
    pub size: [f64; 2],
    /// Cell counts `[nx, ny]`.
    pub cells: [usize; 2],
    /// Node values, row `i` (from the bottom) major: index `i * (nx + 1) + j`.
    pub values: Vec<[f64; 2]>,
}

impl GridMap {
    pub fn from_fn(domain: &CoordinateSystem, cells: [usize; 2], f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut g = GridMap { origin: domain.origin, size: [domain.width, domain.height], cells, values: Vec::new() };
        let [nx, ny] = cells;
        g.values = (0..=ny).flat_map(|i| (0..=nx).map(move |j| (i, j))).map(|(i, j)| f(g.node(i, j))).collect();
        g
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + self.size[0] * j as f64 / self.cells[0] as f64,
            self.origin[1] + self.size[1] * i as f64 / self.cells[1] as f64,
        ]
    }

    fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[i * (self.cells[0] + 1) + j]
    }

    /// Barycentric interpolation; points outside the domain use the nearest
    /// boundary value.
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let [nx, ny] = self.cells;
        let s = ((p[0] - self.origin[0]) / self.size[0] * nx as f64).clamp(0.0, nx as f64);
        let t = ((p[1] - self.origin[1]) / self.size[1] * ny as f64).clamp(0.0, ny as f64);
        let j = (s.floor() as usize).min(nx - 1);
        let i = (t.floor() as usize).min(ny - 1);
        let (fs, ft) = (s - j as f64, t - i as f64);
        let (d00, d10, d01, d11) = (self.at(i, j), self.at(i, j + 1), self.at(i + 1, j), self.at(i + 1, j + 1));
        let mut out = [0.0; 2];
        for a in 0..2 {
            out[a] = if fs >= ft {
                d00[a] + fs * (d10[a] - d00[a]) + ft * (d11[a] - d10[a])
            } else {
                d00[a] + ft * (d01[a] - d00[a]) + fs * (d11[a] - d01[a])
            };
        }
        out
    }
}

/// One displacement arrow, all in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glyph {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Smooth displacement `d` with `psi(x) = x + d(x)` such that
/// `reference(x) ~ secondary(psi(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub domain: CoordinateSystem,
    pub samples: Vec<FieldSample>,
    pub boundary_conditions: Vec<BoundaryCondition>,
    spline: [ThinPlateSpline; 2],
    /// `d` sampled on the grid map nodes.
    pub grid: GridMap,
    /// `psi^-1(y) - y` on the same nodes.
    pub inverse_grid: GridMap,
}

fn fit_component(samples: &[FieldSample], bcs: &[BoundaryCondition], a: usize) -> Result<ThinPlateSpline> {
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for s in samples.iter().filter(|s| s.accepted || s.prior) {
        pts.push(s.center);
        vals.push(s.displacement[a]);
    }
    for bc in bcs.iter().filter(|b| b.component == a) {
        pts.push(bc.point);
        vals.push(bc.value);
    }
    ThinPlateSpline::fit(&pts, &vals)
}

impl DisplacementField {
    /// Interpolates the accepted samples and the boundary conditions with a
    /// thin-plate spline per component and tabulates it on a grid map with
    /// `cells = [nx, ny]` cells.
    pub fn build(domain: CoordinateSystem, samples: Vec<FieldSample>, boundary_conditions: Vec<BoundaryCondition>, cells: [usize; 2]) -> Result<Self> {
        let accepted = samples.iter().filter(|s| s.accepted).count();
        if accepted < 3 {
            return Err(Error::TooFewAccepted { level: 0, accepted, total: samples.len(), fidelity: Vec::new() });
        }
        if let Some(bc) = boundary_conditions.iter().find(|b| b.component > 1 || !b.value.is_finite()) {
            return Err(Error::invalid(format!("bad boundary condition {bc:?}")));
        }
        if cells[0] == 0 || cells[1] == 0 {
            return Err(Error::invalid("grid map needs at least one cell per direction"));
        }
        let spline = [fit_component(&samples, &boundary_conditions, 0)?, fit_component(&samples, &boundary_conditions, 1)?];
        let grid = GridMap::from_fn(&domain, cells, |p| [spline[0].eval(p), spline[1].eval(p)]);
        let inverse_grid = GridMap::from_fn(&domain, cells, |y| invert_at(&grid, y));
        Ok(Self { domain, samples, boundary_conditions, spline, grid, inverse_grid })
    }

    /// Identity field (zero displacement).
    pub fn identity(domain: CoordinateSystem) -> Self {
        let [x0, y0] = domain.origin;
        let (x1, y1) = (domain.right(), domain.top());
        let corners = [[x0, y0], [x1, y0], [x0, y1]];
        let zero = ThinPlateSpline::fit(&corners, &[0.0; 3]).expect("corners are not collinear");
        let grid = GridMap::from_fn(&domain, [1, 1], |_| [0.0; 2]);
        Self { domain, samples: Vec::new(), boundary_conditions: Vec::new(), spline: [zero.clone(), zero], inverse_grid: grid.clone(), grid }
    }

    /// `d(p)` from the grid map.
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        self.grid.eval(p)
    }

    /// `d(p)` from the interpolating splines.
    pub fn eval_smooth(&self, p: [f64; 2]) -> [f64; 2] {
        [self.spline[0].eval(p), self.spline[1].eval(p)]
    }

    /// `psi^-1(p) - p`.
    pub fn eval_inverse(&self, p: [f64; 2]) -> [f64; 2] {
        self.inverse_grid.eval(p)
    }

    pub fn map(&self, p: [f64; 2]) -> [f64; 2] {
        let d = self.eval(p);
        [p[0] + d[0], p[1] + d[1]]
    }

    pub fn inverse_map(&self, p: [f64; 2]) -> [f64; 2] {
        let d = self.eval_inverse(p);
        [p[0] + d[0], p[1] + d[1]]
    }

    /// `[[d dx/dx, d dx/dy], [d dy/dx, d dy/dy]]` of the spline field by
    /// central differences with a one-pixel step.
    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let (hx, hy) = (self.domain.dx(), self.domain.dy());
        let px = (self.eval_smooth([p[0] + hx, p[1]]), self.eval_smooth([p[0] - hx, p[1]]));
        let py = (self.eval_smooth([p[0], p[1] + hy]), self.eval_smooth([p[0], p[1] - hy]));
        let mut j = [[0.0; 2]; 2];
        for a in 0..2 {
            j[a] = [(px.0[a] - px.1[a]) / (2.0 * hx), (py.0[a] - py.1[a]) / (2.0 * hy)];
        }
        j
    }

    /// Arrows at every `stride`-th pixel center along both axes, starting at
    /// row 0, column 0.
    pub fn glyphs(&self, stride: usize) -> Vec<Glyph> {
        let stride = stride.max(1);
        let mut out = Vec::new();
        for r in (0..self.domain.rows).step_by(stride) {
            for c in (0..self.domain.cols).step_by(stride) {
                let p = self.domain.pixel_to_phys(r, c);
                let d = self.eval(p);
                out.push(Glyph { x: p[0], y: p[1], dx: d[0], dy: d[1] });
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Solves `w + d(w) = y` by fixed-point iteration and returns `w - y`.
fn invert_at(grid: &GridMap, y: [f64; 2]) -> [f64; 2] {
    let mut w = y;
    for _ in 0..100 {
        let d = grid.eval(w);
        let next = [y[0] - d[0], y[1] - d[1]];
        let step = (next[0] - w[0]).hypot(next[1] - w[1]);
        w = next;
        if step < 1e-12 * (1.0 + y[0].abs() + y[1].abs()) {
            break;
        }
    }
    [w[0] - y[0], w[1] - y[1]]
}

/// Paints each patch's core block (no overlap) with 1 where accepted.
/// `fidelity` is row-major from the top-left patch.
pub fn fidelity_raster(domain: &CoordinateSystem, fidelity: &[Vec<bool>]) -> Result<PhysicalImage> {
    let num_v = fidelity.len();
    let num_h = fidelity.first().map_or(0, |r| r.len());
    if num_v == 0 || num_h == 0 || fidelity.iter().any(|r| r.len() != num_h) {
        return Err(Error::invalid("fidelity map must be a non-empty rectangle"));
    }
    let mut plane = Array2::zeros((domain.rows, domain.cols));
    for (k, (r0, r1, c0, c1)) in patch_blocks(domain.rows, domain.cols, num_v, num_h, 0.0).into_iter().enumerate() {
        if fidelity[k / num_h][k % num_h] {
            plane.slice_mut(ndarray::s![r0..r1, c0..c1]).fill(1.0);
        }
    }
    PhysicalImage::from_plane(plane, *domain, ColorSpace::Binary)
}
