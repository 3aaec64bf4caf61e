use ndarray::Array2;
use physimg::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage};
use physimg::segment::*;
use physimg::synthlab::{gen_plume_sequence, stream_rng, texture, PlumeSpec, TextureSpec};

/// Chebyshev dilation by `k` pixels.
fn dilate(m: &Array2<bool>, k: usize) -> Array2<bool> {
    let (rows, cols) = m.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        (r.saturating_sub(k)..(r + k + 1).min(rows)).any(|i| (c.saturating_sub(k)..(c + k + 1).min(cols)).any(|j| m[[i, j]]))
    })
}

fn erode(m: &Array2<bool>, k: usize) -> Array2<bool> {
    dilate(&m.mapv(|v| !v), k).mapv(|v| !v)
}

fn band_labels(cs: CoordinateSystem, bands: usize) -> LabelMap {
    LabelMap::new(Array2::from_shape_fn((cs.rows, cs.cols), |(_, c)| (c * bands / cs.cols) as u32), cs).unwrap()
}

#[test]
fn dynamic_threshold_stays_within_three_pixels_of_static() {
    let spec = PlumeSpec { rows: 100, cols: 160, width: 0.64, height: 0.4, rim_px: 4.0, times: vec![3000.0], ..Default::default() };
    let seq = gen_plume_sequence(&spec).unwrap();
    let stack = ReferenceStack::new(seq.references.clone()).unwrap();
    let frame = &seq.frames[0];
    // the outer bands lie outside the plume, so their histograms are unimodal
    let labels = band_labels(*frame.coords(), 5);
    let cfg = PhaseConfig::default();
    let run = |mode: &str| {
        let model = ThresholdModel { mode: mode.into(), intervals: vec![Interval::above(0.1)], ..Default::default() };
        binary_concentration(frame, &stack, &labels, &model, &cfg).unwrap().mask().unwrap()
    };
    let fixed = run("static");
    let dynamic = run("dynamic");
    let (outer, inner) = (dilate(&fixed, 3), erode(&fixed, 3));
    for ((d, o), i) in dynamic.iter().zip(outer.iter()).zip(inner.iter()) {
        assert!(!*d || *o);
        assert!(!*i || *d);
    }
    assert!(iou(&fixed, &seq.masks[0]) > 0.9);
}

#[test]
fn per_label_shifts_above_threshold_recover_the_plume() {
    let cs = CoordinateSystem::new(80, 120, 0.12, 0.08, [0.0, 0.0]).unwrap();
    let base = texture(80, 120, &TextureSpec { correlation_px: 2.0, contrast: 0.03, mean: 0.3 }, &mut stream_rng(41, 0));
    let labels = LabelMap::new(Array2::from_shape_fn((80, 120), |(r, _)| (r >= 40) as u32), cs).unwrap();
    let truth = Array2::from_shape_fn((80, 120), |(r, c)| ((r as f64 - 79.0).powi(2) + (c as f64 - 60.0).powi(2)).sqrt() < 50.0);
    let shift = [0.2, 0.35];
    let secondary = Array2::from_shape_fn((80, 120), |(r, c)| base[[r, c]] + if truth[[r, c]] { shift[labels.get(r, c)] } else { 0.0 });
    let stack = ReferenceStack::new(vec![PhysicalImage::from_plane(base, cs, ColorSpace::Gray).unwrap()]).unwrap();
    let image = PhysicalImage::from_plane(secondary, cs, ColorSpace::Gray).unwrap();
    let model = ThresholdModel { intervals: vec![Interval::above(0.1), Interval::above(0.2)], ..Default::default() };
    let mask = binary_concentration(&image, &stack, &labels, &model, &PhaseConfig::default()).unwrap().mask().unwrap();
    assert!(iou(&mask, &truth) >= 0.95);
}

#[test]
fn ripple_floor_peaks_at_the_ripple_amplitude() {
    let cs = CoordinateSystem::new(40, 200, 0.2, 0.04, [0.0, 0.0]).unwrap();
    let base = texture(40, 200, &TextureSpec { correlation_px: 2.0, contrast: 0.03, mean: 0.4 }, &mut stream_rng(42, 0));
    let amplitude = 0.025;
    let wave = |c: usize, phase: f64| amplitude * (std::f64::consts::TAU * c as f64 / 50.0 + phase).sin();
    let mut refs = vec![PhysicalImage::from_plane(base.clone(), cs, ColorSpace::Gray).unwrap()];
    for phase in [0.0, 1.3, 2.9] {
        let plane = Array2::from_shape_fn((40, 200), |(r, c)| base[[r, c]] + wave(c, phase));
        refs.push(PhysicalImage::from_plane(plane, cs, ColorSpace::Gray).unwrap());
    }
    let floor = fuse_references(&ReferenceStack::new(refs.clone()).unwrap(), SignalChannel::Negkey, DifferenceSign::Positive).unwrap();
    // column 12.5 is a maximum of the zero-phase ripple; take the nearest pixel
    let peak = floor.column(12).iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((peak - amplitude).abs() < 2e-3 && peak <= amplitude + 1e-12, "{peak}");
    assert!(floor.iter().all(|&v| v <= amplitude + 1e-12));

    refs[1..].reverse();
    let swapped = fuse_references(&ReferenceStack::new(refs).unwrap(), SignalChannel::Negkey, DifferenceSign::Positive).unwrap();
    assert_eq!(swapped, floor);
}

#[test]
fn watershed_labels_round_trip_through_png() {
    let cs = CoordinateSystem::new(60, 90, 0.09, 0.06, [0.0, 0.0]).unwrap();
    let plane = Array2::from_shape_fn((60, 90), |(r, c)| if r < 20 { 0.2 } else if c < 45 { 0.5 } else { 0.8 });
    let image = PhysicalImage::from_plane(plane, cs, ColorSpace::Gray).unwrap();
    let labels = watershed_labels(&image, &WatershedConfig::default()).unwrap();
    assert_eq!(labels.label_count(), 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.png");
    labels.save(&path).unwrap();
    assert_eq!(LabelMap::load(&path).unwrap(), labels);
}
