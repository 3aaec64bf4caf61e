use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{add_noise, stream_rng};
use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrainPackSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Physical width and height in meters.
    pub width: f64,
    pub height: f64,
    pub target_porosity: f64,
    /// Largest grain radius in pixels; radii decrease towards `radius_min_px`
    /// as the pack fills up.
    pub radius_max_px: f64,
    pub radius_min_px: f64,
    /// Random placement attempts per radius level.
    pub attempts_per_level: usize,
    pub pore_intensity: f64,
    pub grain_intensity: f64,
    pub noise_sigma: f64,
}

impl Default for GrainPackSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            rows: 256,
            cols: 256,
            width: 0.256,
            height: 0.256,
            target_porosity: 0.4,
            radius_max_px: 10.0,
            radius_min_px: 3.0,
            attempts_per_level: 4000,
            pore_intensity: 0.2,
            grain_intensity: 0.8,
            noise_sigma: 0.02,
        }
    }
}

/// A solid disk in continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub row: f64,
    pub col: f64,
    pub radius: f64,
}

impl Disk {
    fn contains(&self, r: usize, c: usize) -> bool {
        let dr = r as f64 - self.row;
        let dc = c as f64 - self.col;
        dr * dr + dc * dc < self.radius * self.radius
    }

    fn pixel_box(&self, rows: usize, cols: usize) -> (usize, usize, usize, usize) {
        let r0 = (self.row - self.radius).floor().max(0.0) as usize;
        let r1 = ((self.row + self.radius).ceil() as usize + 1).min(rows);
        let c0 = (self.col - self.radius).floor().max(0.0) as usize;
        let c1 = ((self.col + self.radius).ceil() as usize + 1).min(cols);
        (r0, r1.max(r0), c0, c1.max(c0))
    }
}

#[derive(Clone, Debug)]
pub struct GrainPack {
    pub image: PhysicalImage,
    /// Exact pore indicator (1 in pore space, 0 in grains).
    pub pore_indicator: PhysicalImage,
    /// Pore pixel fraction of the indicator.
    pub porosity: f64,
    pub grains: Vec<Disk>,
    /// Characteristic pore length in meters, taken as the mean grain
    /// diameter.
    pub pore_length: f64,
}

/// Pore indicator of a set of disks: 1 where no disk covers the pixel center.
pub fn disk_indicator(rows: usize, cols: usize, disks: &[Disk]) -> Array2<f64> {
    let mut ind = Array2::from_elem((rows, cols), 1.0);
    for d in disks {
        let (r0, r1, c0, c1) = d.pixel_box(rows, cols);
        for r in r0..r1 {
            for c in c0..c1 {
                if d.contains(r, c) {
                    ind[[r, c]] = 0.0;
                }
            }
        }
    }
    ind
}

/// Random disjoint disks with decreasing radii until the pore fraction
/// reaches the target.
pub fn gen_grain_pack(spec: &GrainPackSpec) -> Result<GrainPack> {
    if !(spec.target_porosity > 0.2 && spec.target_porosity < 0.6) {
        return Err(Error::invalid("target porosity must lie in (0.2, 0.6)"));
    }
    if !(spec.radius_min_px >= 3.0 && spec.radius_max_px >= spec.radius_min_px) {
        return Err(Error::invalid("grain radii must satisfy 3 <= min <= max (pixels)"));
    }
    let coords = CoordinateSystem::new(spec.rows, spec.cols, spec.width, spec.height, [0.0, 0.0])?;
    let (rows, cols) = (spec.rows, spec.cols);
    let total = (rows * cols) as f64;
    let mut rng = stream_rng(spec.seed, 0);

    let mut solid = Array2::from_elem((rows, cols), false);
    let mut solid_count = 0usize;
    let mut grains: Vec<Disk> = Vec::new();
    // Spatial hash of centers for the continuous non-overlap test.
    let cell = 2.0 * spec.radius_max_px;
    let gr = (rows as f64 / cell).ceil() as usize + 1;
    let gc = (cols as f64 / cell).ceil() as usize + 1;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); gr * gc];
    let bucket_of = |row: f64, col: f64| -> (usize, usize) {
        (((row / cell).floor().max(0.0) as usize).min(gr - 1), ((col / cell).floor().max(0.0) as usize).min(gc - 1))
    };

    let tol = 0.005;
    let porosity = |solid_count: usize| 1.0 - solid_count as f64 / total;
    let levels = 24;
    'levels: for level in 0..levels {
        let t = level as f64 / (levels - 1) as f64;
        let r_hi = spec.radius_max_px * (spec.radius_min_px / spec.radius_max_px).powf(t);
        for _ in 0..spec.attempts_per_level {
            if porosity(solid_count) <= spec.target_porosity + tol {
                break 'levels;
            }
            let radius = r_hi * rng.random_range(0.85..=1.0f64).max(spec.radius_min_px / r_hi);
            let disk = Disk { row: rng.random_range(0.0..rows as f64), col: rng.random_range(0.0..cols as f64), radius };
            let (br, bc) = bucket_of(disk.row, disk.col);
            let mut clear = true;
            'scan: for nr in br.saturating_sub(1)..=(br + 1).min(gr - 1) {
                for nc in bc.saturating_sub(1)..=(bc + 1).min(gc - 1) {
                    for &k in &buckets[nr * gc + nc] {
                        let o = grains[k];
                        let d2 = (o.row - disk.row).powi(2) + (o.col - disk.col).powi(2);
                        if d2 < (o.radius + disk.radius).powi(2) {
                            clear = false;
                            break 'scan;
                        }
                    }
                }
            }
            if !clear {
                continue;
            }
            let (r0, r1, c0, c1) = disk.pixel_box(rows, cols);
            let mut added = 0;
            for r in r0..r1 {
                for c in c0..c1 {
                    if disk.contains(r, c) {
                        added += 1;
                    }
                }
            }
            if added == 0 || porosity(solid_count + added) < spec.target_porosity - tol {
                continue;
            }
            for r in r0..r1 {
                for c in c0..c1 {
                    if disk.contains(r, c) {
                        solid[[r, c]] = true;
                    }
                }
            }
            solid_count += added;
            buckets[br * gc + bc].push(grains.len());
            grains.push(disk);
        }
    }
    let phi = porosity(solid_count);
    if (phi - spec.target_porosity).abs() > 2.0 * tol {
        return Err(Error::Degenerate(format!(
            "grain packing reached porosity {phi:.4}, target {:.4}",
            spec.target_porosity
        )));
    }

    let indicator = solid.mapv(|s| if s { 0.0 } else { 1.0 });
    let mut noise_rng = stream_rng(spec.seed, 1);
    let mut plane = indicator.mapv(|g| spec.grain_intensity + g * (spec.pore_intensity - spec.grain_intensity));
    add_noise(&mut plane, spec.noise_sigma, &mut noise_rng);
    let mean_radius = grains.iter().map(|d| d.radius).sum::<f64>() / grains.len().max(1) as f64;
    Ok(GrainPack {
        image: PhysicalImage::from_plane(plane, coords, ColorSpace::Gray)?,
        pore_indicator: PhysicalImage::from_plane(indicator, coords, ColorSpace::Binary)?,
        porosity: phi,
        grains,
        pore_length: 2.0 * mean_radius * coords.dx(),
    })
}
