use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-width histogram over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
}

impl Histogram {
    pub fn new(counts: Vec<u64>, lo: f64, hi: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad histogram range [{lo}, {hi}]")));
        }
        Ok(Self { counts, lo, hi })
    }

    /// Bins `values` over `range`, or over the observed range when `None`.
    /// Values outside the range fall into the end bins.
    pub fn from_values(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        let (lo, mut hi) = match range {
            Some(r) => r,
            None => values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        };
        if values.is_empty() && range.is_none() {
            return Err(Error::invalid("cannot infer a histogram range from no values"));
        }
        if hi <= lo {
            hi = lo + 1e-12_f64.max(lo.abs() * 1e-12);
        }
        let mut counts = vec![0u64; bins];
        let w = (hi - lo) / bins as f64;
        for &v in values {
            let k = (((v - lo) / w).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self::new(counts, lo, hi)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.bin_width()
    }

    /// Upper edge of bin `k`.
    pub fn edge(&self, k: usize) -> f64 {
        self.lo + (k + 1) as f64 * self.bin_width()
    }

    pub fn bin_of(&self, v: f64) -> usize {
        (((v - self.lo) / self.bin_width()).floor().max(0.0) as usize).min(self.bins() - 1)
    }

    pub fn nonempty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Relative slack under which two between-class variances count as tied.
pub const OTSU_TIE: f64 = 1e-12;

/// Index `k` of the last background bin: splitting after `k` maximizes the
/// between-class variance `w0 w1 (m0 - m1)^2`. Ties go to the lowest `k`.
pub fn otsu_bin(hist: &Histogram) -> Result<usize> {
    if hist.nonempty_bins() < 2 {
        return Err(Error::Degenerate("Otsu threshold needs at least two nonempty bins".into()));
    }
    let n = hist.bins();
    let total: f64 = hist.counts.iter().map(|&c| c as f64).sum();
    let total_mass: f64 = hist.counts.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut m0) = (0.0, 0.0);
    let mut scores = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        w0 += hist.counts[k] as f64;
        m0 += k as f64 * hist.counts[k] as f64;
        let w1 = total - w0;
        let score = if w0 == 0.0 || w1 == 0.0 {
            0.0
        } else {
            let d = m0 / w0 - (total_mass - m0) / w1;
            w0 * w1 * d * d
        };
        scores.push(score);
    }
    Ok(first_max(&scores))
}

pub(crate) fn first_max(scores: &[f64]) -> usize {
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s >= best - OTSU_TIE * best.abs()).expect("non-empty scores")
}

/// Otsu threshold in signal units: the upper edge of the last background
/// bin, so foreground is `value >= threshold`.
pub fn otsu_threshold(hist: &Histogram) -> Result<f64> {
    Ok(hist.edge(otsu_bin(hist)?))
}

/// Peaks of the 3-bin moving average: plateaus count once, at their first
/// bin. Returns `(bin, height)` pairs.
fn peaks(smooth: &[f64]) -> Vec<(usize, f64)> {
    let n = smooth.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && smooth[e + 1] == smooth[k] {
            e += 1;
        }
        let left_lower = k == 0 || smooth[k - 1] < smooth[k];
        let right_lower = e + 1 == n || smooth[e + 1] < smooth[k];
        if left_lower && right_lower && smooth[k] > 0.0 {
            out.push((k, smooth[k]));
        }
        k = e + 1;
    }
    out
}

/// Settings of the bimodality test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    /// Minimum distance between the two peaks, in bins.
    pub min_separation: usize,
    /// Largest valley height as a fraction of the lower peak.
    pub max_valley: f64,
}

impl Default for Bimodality {
    fn default() -> Self {
        Self { min_separation: 10, max_valley: 0.5 }
    }
}

/// Whether the smoothed histogram has two peaks at least `min_separation`
/// bins apart with a valley no higher than `max_valley` times the lower one.
pub fn is_bimodal(hist: &Histogram, test: &Bimodality) -> bool {
    let c: Vec<f64> = hist.counts.iter().map(|&v| v as f64).collect();
    let n = c.len();
    let smooth: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            c[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut p = peaks(&smooth);
    if p.len() < 2 {
        return false;
    }
    // the two highest peaks that are far enough apart
    p.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (first, rest) = (p[0], &p[1..]);
    let Some(second) = rest.iter().find(|q| q.0.abs_diff(first.0) >= test.min_separation) else {
        return false;
    };
    let (a, b) = (first.0.min(second.0), first.0.max(second.0));
    let valley = smooth[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
    valley <= test.max_valley * first.1.min(second.1)
}

/// Otsu threshold clamped to `prior +- band` when the histogram is bimodal,
/// otherwise `prior`.
pub fn dynamic_threshold(hist: &Histogram, prior: f64, band: f64, test: &Bimodality) -> f64 {
    if is_bimodal(hist, test) {
        if let Ok(t) = otsu_threshold(hist) {
            return t.clamp(prior - band, prior + band);
        }
    }
    prior
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Between-class variance from the class definitions, every split.
    fn exhaustive(counts: &[u64]) -> usize {
        let n = counts.len();
        let scores: Vec<f64> = (0..n - 1)
            .map(|k| {
                let (a, b) = counts.split_at(k + 1);
                let w0: f64 = a.iter().map(|&c| c as f64).sum();
                let w1: f64 = b.iter().map(|&c| c as f64).sum();
                if w0 == 0.0 || w1 == 0.0 {
                    return 0.0;
                }
                let m0 = a.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum::<f64>() / w0;
                let m1 = b.iter().enumerate().map(|(i, &c)| (i + k + 1) as f64 * c as f64).sum::<f64>() / w1;
                w0 * w1 * (m0 - m1).powi(2)
            })
            .collect();
        first_max(&scores)
    }

    #[test]
    fn two_deltas() {
        let mut counts = vec![0u64; 256];
        let h = Histogram::new(counts.clone(), 0.0, 1.0).unwrap();
        let (a, b) = (h.bin_of(0.2), h.bin_of(0.8));
        counts[a] = 500;
        counts[b] = 500;
        let h = Histogram::new(counts.clone(), 0.0, 1.0).unwrap();
        let t = otsu_threshold(&h).unwrap();
        assert!(t > 0.2 && t < 0.8);
        assert_eq!(otsu_bin(&h).unwrap(), exhaustive(&counts));
    }

    #[test]
    fn single_bin_is_an_error() {
        let mut counts = vec![0u64; 16];
        counts[3] = 10;
        assert!(otsu_threshold(&Histogram::new(counts, 0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn symmetric_bimodal_splits_in_the_middle() {
        let counts: Vec<u64> = (0..64)
            .map(|i| {
                let g = |m: f64| (-((i as f64 - m).powi(2)) / 18.0).exp();
                (1000.0 * (g(20.0) + g(43.0))).round() as u64
            })
            .collect();
        let k = otsu_bin(&Histogram::new(counts, 0.0, 1.0).unwrap()).unwrap();
        // classes 0..=31 and 32..=63
        assert_eq!(k, 31);
    }

    #[test]
    fn dynamic_modes() {
        let bimodal: Vec<u64> = (0..256).map(|i| if (40..60).contains(&i) || (180..200).contains(&i) { 100 } else { 1 }).collect();
        let h = Histogram::new(bimodal, 0.0, 1.0).unwrap();
        let otsu = otsu_threshold(&h).unwrap();
        let t = dynamic_threshold(&h, otsu + 0.01, 0.05, &Bimodality::default());
        assert!((t - otsu).abs() <= h.bin_width());
        assert_eq!(dynamic_threshold(&h, otsu + 0.2, 0.05, &Bimodality::default()), otsu + 0.2 - 0.05);

        let unimodal: Vec<u64> = (0..256).map(|i| (1000.0 * (-((i as f64 - 100.0).powi(2)) / 400.0).exp()) as u64).collect();
        let h = Histogram::new(unimodal, 0.0, 1.0).unwrap();
        assert_eq!(dynamic_threshold(&h, 0.3, 0.05, &Bimodality::default()), 0.3);
    }

    proptest! {
        #[test]
        fn matches_exhaustive(counts in proptest::collection::vec(0u64..1000, 64)) {
            prop_assume!(counts.iter().filter(|&&c| c > 0).count() >= 2);
            let h = Histogram::new(counts.clone(), 0.0, 1.0).unwrap();
            prop_assert_eq!(otsu_bin(&h).unwrap(), exhaustive(&counts));
        }
    }
}
