use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::histogram::{dynamic_threshold, otsu_threshold, Bimodality, Histogram};
use super::labels::LabelMap;
use crate::error::{Error, Result};
use crate::registry::Registry;

/// Closed signal interval; `upper = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl Interval {
    pub fn above(lower: f64) -> Self {
        Self { lower, upper: None }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && self.upper.is_none_or(|u| v <= u)
    }
}

/// Per-label thresholds. The intervals' lower bounds are the priors for the
/// adaptive modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdModel {
    /// `static`, `otsu` or `dynamic`.
    pub mode: String,
    /// One interval per label, or a single interval for all labels.
    pub intervals: Vec<Interval>,
    /// Allowed drift of the dynamic lower bound around its prior.
    pub drift_band: f64,
    pub bins: usize,
    pub bimodality: Bimodality,
}

impl Default for ThresholdModel {
    fn default() -> Self {
        Self { mode: "static".into(), intervals: vec![Interval::above(0.1)], drift_band: 0.05, bins: 256, bimodality: Bimodality::default() }
    }
}

impl ThresholdModel {
    pub fn fixed(lower: f64) -> Self {
        Self { intervals: vec![Interval::above(lower)], ..Self::default() }
    }

    pub fn interval(&self, label: usize) -> Result<Interval> {
        match self.intervals.len() {
            1 => Ok(self.intervals[0]),
            n if label < n => Ok(self.intervals[label]),
            _ => Err(Error::invalid(format!("no threshold for label {label}"))),
        }
    }

    pub fn validate(&self, label_count: usize) -> Result<()> {
        if self.intervals.is_empty() || (self.intervals.len() > 1 && self.intervals.len() < label_count) {
            return Err(Error::invalid(format!("{} threshold intervals for {label_count} labels", self.intervals.len())));
        }
        for i in &self.intervals {
            if i.upper.is_some_and(|u| !(i.lower < u)) || !i.lower.is_finite() {
                return Err(Error::invalid(format!("bad threshold interval {i:?}")));
            }
        }
        if !(self.drift_band >= 0.0) || self.bins < 2 {
            return Err(Error::invalid("drift band must be non-negative and bins at least 2"));
        }
        Ok(())
    }
}

/// Chooses a label's lower bound from its signal values.
pub trait ThresholdStrategy: Send + Sync {
    fn name(&self) -> &str;
    fn lower_bound(&self, values: &[f64], prior: f64, model: &ThresholdModel) -> f64;
}

struct Static;
struct Otsu;
struct Dynamic;

impl ThresholdStrategy for Static {
    fn name(&self) -> &str {
        "static"
    }

    fn lower_bound(&self, _: &[f64], prior: f64, _: &ThresholdModel) -> f64 {
        prior
    }
}

impl ThresholdStrategy for Otsu {
    fn name(&self) -> &str {
        "otsu"
    }

    fn lower_bound(&self, values: &[f64], prior: f64, model: &ThresholdModel) -> f64 {
        Histogram::from_values(values, model.bins, None).and_then(|h| otsu_threshold(&h)).unwrap_or(prior)
    }
}

impl ThresholdStrategy for Dynamic {
    fn name(&self) -> &str {
        "dynamic"
    }

    fn lower_bound(&self, values: &[f64], prior: f64, model: &ThresholdModel) -> f64 {
        match Histogram::from_values(values, model.bins, None) {
            Ok(h) => dynamic_threshold(&h, prior, model.drift_band, &model.bimodality),
            Err(_) => prior,
        }
    }
}

pub fn threshold_registry() -> Registry<dyn ThresholdStrategy> {
    let mut reg: Registry<dyn ThresholdStrategy> = Registry::new();
    reg.register("static", || Box::new(Static));
    reg.register("otsu", || Box::new(Otsu));
    reg.register("dynamic", || Box::new(Dynamic));
    reg
}

/// Thresholds `signal` label by label. Returns the mask and the intervals
/// actually used.
pub fn apply_thresholds(signal: &Array2<f64>, labels: &LabelMap, model: &ThresholdModel) -> Result<(Array2<bool>, Vec<Interval>)> {
    if signal.dim() != labels.labels().dim() {
        return Err(Error::mismatch("signal and label map differ in shape"));
    }
    model.validate(labels.label_count())?;
    let strategy = threshold_registry().create(&model.mode)?;
    let mut values = vec![Vec::new(); labels.label_count()];
    for (&l, &v) in labels.labels().iter().zip(signal.iter()) {
        values[l as usize].push(v);
    }
    let used = values
        .iter()
        .enumerate()
        .map(|(k, vals)| {
            let prior = model.interval(k)?;
            Ok(Interval { lower: strategy.lower_bound(vals, prior.lower, model), upper: prior.upper })
        })
        .collect::<Result<Vec<_>>>()?;
    let mask = ndarray::Zip::from(signal).and(labels.labels()).map_collect(|&v, &l| used[l as usize].contains(v));
    Ok((mask, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::CoordinateSystem;

    #[test]
    fn per_label_static_and_monotone() {
        let cs = CoordinateSystem::new(4, 4, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let labels = LabelMap::new(Array2::from_shape_fn((4, 4), |(_, c)| (c >= 2) as u32), cs).unwrap();
        let signal = Array2::from_shape_fn((4, 4), |(r, c)| 0.1 * (r + c) as f64);
        let model = ThresholdModel { intervals: vec![Interval::above(0.2), Interval::above(0.5)], ..Default::default() };
        let (mask, _) = apply_thresholds(&signal, &labels, &model).unwrap();
        assert!(mask[[3, 0]] && !mask[[1, 0]] && mask[[3, 2]] && !mask[[2, 2]]);
        let higher = ThresholdModel { intervals: vec![Interval::above(0.3), Interval::above(0.5)], ..Default::default() };
        let (m2, _) = apply_thresholds(&signal, &labels, &higher).unwrap();
        assert!(m2.iter().zip(mask.iter()).all(|(&a, &b)| !a || b));
    }

    #[test]
    fn missing_interval_and_unknown_mode() {
        let cs = CoordinateSystem::new(4, 4, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let labels = LabelMap::new(Array2::from_shape_fn((4, 4), |(r, _)| r as u32 % 3), cs).unwrap();
        let signal = Array2::zeros((4, 4));
        let two = ThresholdModel { intervals: vec![Interval::above(0.2); 2], ..Default::default() };
        assert!(apply_thresholds(&signal, &labels, &two).is_err());
        let bad = ThresholdModel { mode: "adaptive".into(), ..Default::default() };
        assert!(matches!(apply_thresholds(&signal, &labels, &bad), Err(Error::UnknownStrategy { .. })));
    }
}
