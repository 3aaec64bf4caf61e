use ndarray::Array2;
use physimg::imgcore::{CoordinateSystem, PhysicalImage};
use physimg::quantify::*;
use physimg::segment::ReferenceStack;
use physimg::synthlab::{gen_plume_sequence, stream_rng, PlumeSpec};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn reference_against_itself_has_zero_concentration() {
    let seq = gen_plume_sequence(&PlumeSpec { rows: 40, cols: 64, times: vec![], ..Default::default() }).unwrap();
    let stack = ReferenceStack::new(seq.references.clone()).unwrap();
    let model = LinearConcentrationModel::new(2.0, 0.0).unwrap();
    let c = concentration(&seq.references[0], &stack, Some(&model), &ConcentrationConfig::default()).unwrap();
    assert!(c.data().iter().all(|&v| v == 0.0));
    assert!(concentration(&seq.references[0], &stack, None, &ConcentrationConfig::default()).is_err());
}

#[test]
fn generator_model_reconstructs_the_concentration_field() {
    let spec = PlumeSpec { rows: 200, cols: 320, times: vec![2500.0], ..Default::default() };
    let seq = gen_plume_sequence(&spec).unwrap();
    let stack = ReferenceStack::new(seq.references.clone()).unwrap();
    let c = concentration(&seq.frames[0], &stack, Some(&seq.model), &ConcentrationConfig::default()).unwrap();
    let got = c.plane().unwrap();
    let truth = &seq.concentrations[0];
    // skip the rim ramp and a 3 px band around it
    let near_rim = |r: usize, c: usize| {
        let (r0, r1) = (r.saturating_sub(3), (r + 4).min(spec.rows));
        let (c0, c1) = (c.saturating_sub(3), (c + 4).min(spec.cols));
        let win = truth.slice(ndarray::s![r0..r1, c0..c1]);
        win.iter().any(|&v| v > 0.0 && v < spec.core_concentration) || win.iter().any(|&v| v == 0.0) && win.iter().any(|&v| v > 0.0)
    };
    let (mut s, mut n) = (0.0, 0.0);
    for ((r, k), &t) in truth.indexed_iter() {
        if !near_rim(r, k) {
            s += (got[[r, k]] - t).powi(2);
            n += 1.0;
        }
    }
    let rms = (s / n).sqrt();
    assert!(rms <= 0.02, "{rms}");
}

#[test]
fn total_volume_matches_independent_summation() {
    let cs = CoordinateSystem::new(37, 53, 0.53, 0.37, [0.0, 0.0]).unwrap();
    let mut rng = stream_rng(51, 0);
    let conc = Array2::from_shape_simple_fn((37, 53), || rng.random::<f64>());
    let phi = Array2::from_shape_simple_fn((37, 53), || rng.random_range(0.2..0.5));
    let depth = Array2::from_shape_simple_fn((37, 53), || rng.random_range(0.01..0.03));
    let geometry = Geometry::new(&cs, phi.clone(), depth.clone()).unwrap();
    let v = total_volume(&conc.view(), &geometry).unwrap();
    // column-major, pairwise-free accumulation
    let mut want = 0.0;
    for c in (0..53).rev() {
        for r in 0..37 {
            want += conc[[r, c]] * phi[[r, c]] * depth[[r, c]] * cs.pixel_area();
        }
    }
    assert!((v - want).abs() <= 1e-12 * want);
    assert_eq!(total_volume(&Array2::zeros((37, 53)).view(), &geometry).unwrap(), 0.0);
}

fn mask_image(m: &Array2<bool>, cs: CoordinateSystem) -> PhysicalImage {
    PhysicalImage::from_mask(m, cs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fractions_partition_the_weighted_union(seed in 0u64..1000, n in 1usize..5) {
        let cs = CoordinateSystem::new(12, 15, 0.15, 0.12, [0.0, 0.0]).unwrap();
        let mut rng = stream_rng(seed, 0);
        let bools: Vec<Array2<bool>> = (0..n).map(|_| Array2::from_shape_simple_fn((12, 15), || rng.random::<f64>() < 0.4)).collect();
        let weights = Array2::from_shape_simple_fn((12, 15), || rng.random_range(0.0..2.0));
        let masks: Vec<PhysicalImage> = bools.iter().map(|b| mask_image(b, cs)).collect();
        let f = compare_segmentations(&masks, Some(&weights)).unwrap().fractions;

        let mut unique = vec![0.0; n];
        let mut exactly = vec![0.0; n + 1];
        for ((r, c), &w) in weights.indexed_iter() {
            let hits: Vec<usize> = (0..n).filter(|&i| bools[i][[r, c]]).collect();
            exactly[hits.len()] += w;
            if hits.len() == 1 {
                unique[hits[0]] += w;
            }
        }
        let union: f64 = exactly[1..].iter().sum();
        prop_assert!((f.union - union).abs() <= 1e-12 * union.max(1.0));
        if union > 0.0 {
            let total: f64 = f.unique.iter().chain(f.overlap.iter()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for i in 0..n {
                prop_assert!((f.unique[i] - unique[i] / union).abs() < 1e-12);
            }
            for k in 2..=n {
                prop_assert!((f.overlap[k - 2] - exactly[k] / union).abs() < 1e-12);
            }
        }
    }
}

fn front(cs: &CoordinateSystem, depth: impl Fn(usize) -> f64) -> PhysicalImage {
    let m = Array2::from_shape_fn((cs.rows, cs.cols), |(r, c)| (r as f64) <= depth(c));
    mask_image(&m, *cs)
}

#[test]
fn flat_front_has_no_tips() {
    let cs = CoordinateSystem::new(60, 80, 0.08, 0.06, [0.0, 0.0]).unwrap();
    let tips = detect_finger_tips(&front(&cs, |_| 20.0), None, GrowthDirection::Down, &TipConfig::default()).unwrap();
    assert!(tips.is_empty());
}

#[test]
fn half_disk_bulge_tip_is_at_the_apex() {
    let cs = CoordinateSystem::new(80, 100, 0.1, 0.08, [0.0, 0.0]).unwrap();
    let (cx, base, radius) = (47.3, 20.0, 15.0);
    let mask = front(&cs, |c| {
        let dc = c as f64 - cx;
        base + (radius * radius - dc * dc).max(0.0).sqrt()
    });
    let tips = detect_finger_tips(&mask, None, GrowthDirection::Down, &TipConfig::default()).unwrap();
    assert_eq!(tips.len(), 1);
    let (r, c) = cs.phys_to_continuous(tips[0]);
    assert!((r - (base + radius)).abs() <= 1.0 && (c - cx).abs() <= 1.0, "({r}, {c})");

    // the same bulge seen growing upwards
    let flipped = Array2::from_shape_fn((80, 100), |(r, c)| mask.mask().unwrap()[[79 - r, c]]);
    let tips = detect_finger_tips(&mask_image(&flipped, cs), None, GrowthDirection::Up, &TipConfig::default()).unwrap();
    let (r, c) = cs.phys_to_continuous(tips[0]);
    assert!((r - (79.0 - base - radius)).abs() <= 1.0 && (c - cx).abs() <= 1.0);
}

#[test]
fn three_fingers_give_three_tips() {
    let cs = CoordinateSystem::new(80, 150, 0.15, 0.08, [0.0, 0.0]).unwrap();
    let fingers = [(30.0, 40.0), (75.0, 55.0), (120.0, 33.0)];
    let mask = front(&cs, |c| {
        fingers.iter().fold(10.0, |d, &(x, tip)| {
            let dc = (c as f64 - x).abs();
            if dc <= 4.0 {
                f64::max(d, tip - 4.0 + (16.0 - dc * dc).sqrt())
            } else {
                d
            }
        })
    });
    let mut tips = detect_finger_tips(&mask, None, GrowthDirection::Down, &TipConfig::default()).unwrap();
    assert_eq!(tips.len(), 3);
    tips.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for (t, &(x, d)) in tips.iter().zip(&fingers) {
        let (r, c) = cs.phys_to_continuous(*t);
        assert!((r - d).hypot(c - x) <= 2.0, "({r}, {c}) vs ({d}, {x})");
    }
}

#[test]
fn stationary_and_moving_tips() {
    let dx = 1e-3;
    let still: Vec<TipFrame> = (0..5).map(|k| TipFrame { time: k as f64, tips: vec![[0.01, 0.05], [0.04, 0.05]] }).collect();
    let tracks = track_fingers(&still, 10.0 * dx).unwrap();
    assert_eq!(tracks.len(), 2);
    assert!(tracks.iter().all(|t| t.points.len() == 5 && t.length == 0.0));

    // a tip moving down 2 px per frame; y points up
    let moving: Vec<TipFrame> = (0..10).map(|k| TipFrame { time: k as f64, tips: vec![[0.02, 0.05 - 2.0 * dx * k as f64]] }).collect();
    let tracks = track_fingers(&moving, 10.0 * dx).unwrap();
    assert_eq!(tracks.len(), 1);
    for w in tracks[0].points.windows(2) {
        let step = [(w[1].position[0] - w[0].position[0]) / dx, (w[1].position[1] - w[0].position[1]) / dx];
        assert!(step[0].abs() <= 0.5 && (step[1] + 2.0).abs() <= 0.5);
    }
    assert_eq!(tracks[0].weight, 1.0);
}
