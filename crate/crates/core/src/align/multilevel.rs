use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{fixed_sides, BoundaryCondition, DisplacementField, FieldSample, Side};
use super::matcher::{matcher_registry, MatchConfig};
use crate::error::{Error, Result};
use crate::imgcore::sample::{bilinear, Border};
use crate::imgcore::{intensity_plane, patch_blocks, CoordinateSystem, PhysicalImage};

/// Patch layout of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub num_v: usize,
    pub num_h: usize,
    #[serde(default)]
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Coarse to fine.
    pub levels: Vec<LevelSpec>,
    pub matcher: String,
    pub matching: MatchConfig,
    /// Sides held at zero normal displacement.
    pub fixed_sides: Vec<Side>,
    pub boundary_conditions: Vec<BoundaryCondition>,
    /// Grid map cells `[nx, ny]`; defaults to the final level's patch grid.
    pub grid_cells: Option<[usize; 2]>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            levels: vec![LevelSpec { num_v: 4, num_h: 4, overlap: 0.0 }],
            matcher: "ncc".into(),
            matching: MatchConfig::default(),
            fixed_sides: Vec::new(),
            boundary_conditions: Vec::new(),
            grid_cells: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub num_v: usize,
    pub num_h: usize,
    pub accepted: usize,
    pub total: usize,
    /// Row-major from the top-left patch; true where accepted.
    pub fidelity: Vec<Vec<bool>>,
    pub seconds: f64,
}

impl LevelReport {
    pub fn rejected_fraction(&self) -> f64 {
        1.0 - self.accepted as f64 / self.total as f64
    }
}

#[derive(Clone, Debug)]
pub struct Alignment {
    pub field: DisplacementField,
    pub levels: Vec<LevelReport>,
}

/// Resamples `plane` at `psi(x)` for every pixel center `x`.
fn pull_back(plane: &Array2<f64>, cs: &CoordinateSystem, field: &DisplacementField) -> Array2<f64> {
    let view = plane.view();
    let rows: Vec<Vec<f64>> = (0..cs.rows)
        .into_par_iter()
        .map(|r| {
            (0..cs.cols)
                .map(|c| {
                    let (sr, sc) = cs.phys_to_continuous(field.map(cs.pixel_to_phys(r, c)));
                    bilinear(&view, sr, sc, Border::Clamp)
                })
                .collect()
        })
        .collect();
    Array2::from_shape_fn((cs.rows, cs.cols), |(r, c)| rows[r][c])
}

/// Total displacement at `x` of a residual shift `step` measured against the
/// secondary image pulled back through `prev`: `step + d_prev(x + step)`.
pub(crate) fn compose(prev: &DisplacementField, x: [f64; 2], step: [f64; 2]) -> [f64; 2] {
    let d = prev.eval([x[0] + step[0], x[1] + step[1]]);
    [step[0] + d[0], step[1] + d[1]]
}

/// Coarse-to-fine patchwise alignment of `secondary` onto `reference`.
///
/// Each level matches patches of the reference against the secondary image
/// pulled back through the previous level's field, composes the residual
/// shift with that field, and interpolates the result with boundary
/// conditions. Patches rejected at a refining level keep the previous
/// level's displacement.
pub fn align(reference: &PhysicalImage, secondary: &PhysicalImage, config: &AlignConfig) -> Result<Alignment> {
    let cs = *reference.coords();
    cs.check_same_grid(secondary.coords(), "secondary image")?;
    if config.levels.is_empty() {
        return Err(Error::invalid("alignment needs at least one level"));
    }
    let matcher = matcher_registry().create(&config.matcher)?;
    let ref_plane = intensity_plane(reference);
    let sec_plane = intensity_plane(secondary);
    let mut bcs = config.boundary_conditions.clone();
    let last = config.levels.last().expect("non-empty");
    bcs.extend(fixed_sides(&cs, &config.fixed_sides, 2 * last.num_h.max(last.num_v) + 1));

    let mut prev: Option<DisplacementField> = None;
    let mut reports = Vec::new();
    for (level, spec) in config.levels.iter().enumerate() {
        let start = Instant::now();
        if spec.num_v == 0 || spec.num_h == 0 || spec.num_v > cs.rows / 8 || spec.num_h > cs.cols / 8 {
            return Err(Error::invalid(format!("level {level}: {}x{} patches do not fit the image", spec.num_v, spec.num_h)));
        }
        let target = match &prev {
            Some(f) => pull_back(&sec_plane, &cs, f),
            None => sec_plane.clone(),
        };
        let blocks = patch_blocks(cs.rows, cs.cols, spec.num_v, spec.num_h, spec.overlap);
        let matches: Vec<_> = blocks
            .par_iter()
            .map(|&b| matcher.estimate(&ref_plane.view(), &target.view(), b, &config.matching))
            .collect();

        let (dx, dy) = (cs.dx(), cs.dy());
        let samples: Vec<FieldSample> = blocks
            .iter()
            .zip(&matches)
            .map(|(&(r0, r1, c0, c1), m)| {
                let [cc, cr] = m.center.unwrap_or([(c0 + c1) as f64 / 2.0 - 0.5, (r0 + r1) as f64 / 2.0 - 0.5]);
                let center = cs.continuous_to_phys(cr, cc);
                let step = [m.translation[0] * dx, -m.translation[1] * dy];
                let (displacement, prior) = match (&prev, m.accepted) {
                    (None, _) => (step, false),
                    (Some(f), true) => (compose(f, center, step), false),
                    (Some(f), false) => (f.eval(center), true),
                };
                FieldSample { center, displacement, score: m.score, accepted: m.accepted, prior }
            })
            .collect();
        let accepted = samples.iter().filter(|s| s.accepted).count();
        let fidelity: Vec<Vec<bool>> = samples.chunks(spec.num_h).map(|row| row.iter().map(|s| s.accepted).collect()).collect();
        log::debug!("level {level}: {accepted}/{} patches accepted", samples.len());
        if accepted < 3 {
            return Err(Error::TooFewAccepted { level, accepted, total: samples.len(), fidelity });
        }
        let cells = if level + 1 == config.levels.len() { config.grid_cells.unwrap_or([spec.num_h, spec.num_v]) } else { [spec.num_h, spec.num_v] };
        let field = DisplacementField::build(cs, samples, bcs.clone(), cells)?;
        reports.push(LevelReport {
            level,
            num_v: spec.num_v,
            num_h: spec.num_h,
            accepted,
            total: blocks.len(),
            fidelity,
            seconds: start.elapsed().as_secs_f64(),
        });
        prev = Some(field);
    }
    Ok(Alignment { field: prev.expect("at least one level"), levels: reports })
}
