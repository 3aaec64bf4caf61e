use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};

use super::features::FeatureMatcher;
use crate::correlate::{argmax, ncc_surface, refine_peak};
use crate::registry::Registry;

/// Fidelity and search parameters shared by all matchers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Minimum match strength (NCC peak, or inlier fraction for features).
    pub threshold: f64,
    /// Largest non-translational displacement at the patch corners, pixels.
    pub dominance_tol: f64,
    /// Search radius as a fraction of the smaller patch side.
    pub search_fraction: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { threshold: 0.5, dominance_tol: 1.0, search_fraction: 0.25 }
    }
}

/// Outcome of matching one patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchMatch {
    /// Shift `(dcol, drow)` in pixels taking reference content to its
    /// position in the secondary image.
    pub translation: [f64; 2],
    pub score: f64,
    pub accepted: bool,
    /// Why the patch was rejected, if it was.
    pub reason: Option<String>,
    /// Continuous `(col, row)` position the translation refers to when the
    /// matched region is smaller than the block.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
}

impl PatchMatch {
    pub fn rejected(reason: impl Into<String>, translation: [f64; 2], score: f64) -> Self {
        Self { translation, score, accepted: false, reason: Some(reason.into()), center: None }
    }
}

/// Estimates the translation of one reference block within the secondary
/// image.
pub trait PatchMatcher: Send + Sync {
    fn name(&self) -> &str;

    /// `block = (r0, r1, c0, c1)` is a half-open pixel block valid in both
    /// planes, which must have equal shapes.
    fn estimate(&self, reference: &ArrayView2<f64>, secondary: &ArrayView2<f64>, block: (usize, usize, usize, usize), cfg: &MatchConfig) -> PatchMatch;
}

/// The built-in matchers: `ncc` (default) and `feature`.
pub fn matcher_registry() -> Registry<dyn PatchMatcher> {
    let mut reg: Registry<dyn PatchMatcher> = Registry::new();
    reg.register("ncc", || Box::new(NccMatcher));
    reg.register("feature", || Box::new(FeatureMatcher::default()));
    reg
}

/// Windowed normalized cross-correlation over integer shifts with
/// quadratic subpixel refinement. Translation dominance is checked by
/// matching the four quadrants separately and fitting an affine map to
/// their shifts.
#[derive(Clone, Copy, Debug, Default)]
pub struct NccMatcher;

struct Located {
    shift: [f64; 2],
    center: [f64; 2],
    score: f64,
    on_boundary: bool,
}

/// Best placement of `reference[block]` in `secondary` within `radius`
/// pixels of `guess` (integer `(dcol, drow)`). Where the search window would
/// leave the image, the template is cropped instead so that the full range
/// is searched; the result is the shift of the cropped template.
fn locate(reference: &ArrayView2<f64>, secondary: &ArrayView2<f64>, block: (usize, usize, usize, usize), guess: [i64; 2], radius: usize) -> Option<Located> {
    let (r0, r1, c0, c1) = block;
    let (rows, cols) = secondary.dim();
    let rad = radius as i64;
    let crop = |lo: usize, hi: usize, g: i64, n: usize| {
        let (lo, hi) = (lo as i64, hi as i64);
        let tlo = lo + (rad - g - lo).max(0);
        let thi = hi - (hi + g + rad - n as i64).max(0);
        let min_len = ((hi - lo) / 2).max(8);
        (thi - tlo >= min_len).then_some((tlo as usize, thi as usize))
    };
    let (tr0, tr1) = crop(r0, r1, guess[1], rows)?;
    let (tc0, tc1) = crop(c0, c1, guess[0], cols)?;
    let template = reference.slice(s![tr0..tr1, tc0..tc1]);
    let wr0 = (tr0 as i64 + guess[1] - rad) as usize;
    let wc0 = (tc0 as i64 + guess[0] - rad) as usize;
    let wr1 = (tr1 as i64 + guess[1] + rad) as usize;
    let wc1 = (tc1 as i64 + guess[0] + rad) as usize;
    let window = secondary.slice(s![wr0..wr1, wc0..wc1]);
    let surface = ncc_surface(&template, &window);
    let (peak, score) = argmax(&surface.view());
    let (sr, sc) = surface.dim();
    let on_boundary = peak.0 == 0 || peak.1 == 0 || peak.0 + 1 == sr || peak.1 + 1 == sc;
    let (pr, pc) = refine_peak(&surface.view(), peak);
    let center = [(tc0 + tc1) as f64 / 2.0 - 0.5, (tr0 + tr1) as f64 / 2.0 - 0.5];
    Some(Located { shift: [wc0 as f64 + pc - tc0 as f64, wr0 as f64 + pr - tr0 as f64], center, score, on_boundary })
}

/// Largest displacement at the block corners of the affine part of the
/// least-squares affine fit to `(center, shift)` pairs, relative to the
/// block center.
pub(crate) fn non_translational_residual(points: &[[f64; 2]], shifts: &[[f64; 2]], corners: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p[0] - mx, p[1] - my);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() < 1e-12 {
        return f64::INFINITY;
    }
    let mut jac = [[0.0; 2]; 2];
    for a in 0..2 {
        let mean = shifts.iter().map(|s| s[a]).sum::<f64>() / n;
        let (mut bx, mut by) = (0.0, 0.0);
        for (p, sh) in points.iter().zip(shifts) {
            bx += (p[0] - mx) * (sh[a] - mean);
            by += (p[1] - my) * (sh[a] - mean);
        }
        jac[a] = [(syy * bx - sxy * by) / det, (sxx * by - sxy * bx) / det];
    }
    corners
        .iter()
        .map(|c| {
            let (x, y) = (c[0] - mx, c[1] - my);
            let dx = jac[0][0] * x + jac[0][1] * y;
            let dy = jac[1][0] * x + jac[1][1] * y;
            dx.hypot(dy)
        })
        .fold(0.0, f64::max)
}

impl PatchMatcher for NccMatcher {
    fn name(&self) -> &str {
        "ncc"
    }

    fn estimate(&self, reference: &ArrayView2<f64>, secondary: &ArrayView2<f64>, block: (usize, usize, usize, usize), cfg: &MatchConfig) -> PatchMatch {
        let (r0, r1, c0, c1) = block;
        let (h, w) = (r1 - r0, c1 - c0);
        let radius = ((cfg.search_fraction * h.min(w) as f64).floor() as usize).max(1);
        let Some(best) = locate(reference, secondary, block, [0, 0], radius) else {
            return PatchMatch::rejected("search window does not fit", [0.0; 2], 0.0);
        };
        if best.on_boundary {
            return PatchMatch::rejected("peak on search boundary", best.shift, best.score);
        }
        if best.score < cfg.threshold {
            return PatchMatch::rejected("weak correlation", best.shift, best.score);
        }

        let guess = [best.shift[0].round() as i64, best.shift[1].round() as i64];
        let qr = (cfg.dominance_tol.ceil() as usize + 2).max(2);
        let (hm, wm) = (r0 + h / 2, c0 + w / 2);
        let quads = [(r0, hm, c0, wm), (r0, hm, wm, c1), (hm, r1, c0, wm), (hm, r1, wm, c1)];
        let mut centers = Vec::with_capacity(4);
        let mut shifts = Vec::with_capacity(4);
        for q in quads {
            match locate(reference, secondary, q, guess, qr) {
                Some(l) if l.score >= cfg.threshold && !l.on_boundary => {
                    centers.push([(q.2 + q.3) as f64 / 2.0, (q.0 + q.1) as f64 / 2.0]);
                    shifts.push(l.shift);
                }
                _ => return PatchMatch::rejected("quadrant not matched", best.shift, best.score),
            }
        }
        let corners = [[c0 as f64, r0 as f64], [c1 as f64, r0 as f64], [c1 as f64, r1 as f64], [c0 as f64, r1 as f64]];
        let residual = non_translational_residual(&centers, &shifts, &corners);
        if residual > cfg.dominance_tol {
            return PatchMatch::rejected(format!("not translation dominated ({residual:.2} px)"), best.shift, best.score);
        }
        PatchMatch { translation: best.shift, score: best.score, accepted: true, reason: None, center: Some(best.center) }
    }
}

/// Translation of `secondary` content relative to `reference` for two
/// equally sized patches. The central part of the reference patch (a margin
/// of `search_fraction` of the smaller side removed) is searched for.
pub fn estimate_patch_translation(reference: &ArrayView2<f64>, secondary: &ArrayView2<f64>, matcher: &dyn PatchMatcher, cfg: &MatchConfig) -> PatchMatch {
    let (h, w) = reference.dim();
    if secondary.dim() != (h, w) || h < 8 || w < 8 {
        return PatchMatch::rejected("patch shapes differ or are too small", [0.0; 2], 0.0);
    }
    let m = ((cfg.search_fraction * h.min(w) as f64).floor() as usize).max(1);
    let inner = MatchConfig { search_fraction: m as f64 / (h.min(w) - 2 * m) as f64, ..cfg.clone() };
    matcher.estimate(reference, secondary, (m, h - m, m, w - m), &inner)
}
