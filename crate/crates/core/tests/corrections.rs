use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use physimg::corrections::*;
use physimg::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage, Roi};
use physimg::synthlab::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

fn checker_image(observed: &[[f64; 3]], rows: usize, cols: usize) -> PhysicalImage {
    let mut data = Array3::zeros((rows, cols, 3));
    for r in 0..rows {
        for c in 0..cols {
            let k = (r * 4 / rows) * 6 + c * 6 / cols;
            for ch in 0..3 {
                data[[r, c, ch]] = observed[k][ch];
            }
        }
    }
    PhysicalImage::new(data, 0.6, 0.4, [0.0, 0.0], None).unwrap()
}

/// Per-channel least squares through the normal equations.
fn normal_equations(obs: &[[f64; 3]], targets: &[[f64; 3]]) -> ([[f64; 3]; 3], [f64; 3]) {
    let n = obs.len();
    let a = DMatrix::from_fn(n, 4, |k, j| if j < 3 { obs[k][j] } else { 1.0 });
    let ata = a.transpose() * &a;
    let lu = ata.lu();
    let mut m = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        let t = DVector::from_fn(n, |k, _| targets[k][i]);
        let x = lu.solve(&(a.transpose() * t)).unwrap();
        m[i] = [x[0], x[1], x[2]];
        b[i] = x[3];
    }
    (m, b)
}

#[test]
fn noisy_swatches_fit_matches_normal_equations() {
    let targets: Vec<[f64; 3]> = classic_checker_targets().into_iter().map(|(_, t)| t).collect();
    let mut rng = stream_rng(21, 0);
    let sigma = 0.01;
    let observed: Vec<[f64; 3]> =
        targets.iter().map(|t| t.map(|v| (v + sigma * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))).collect();
    let image = checker_image(&observed, 240, 360);
    let swatches = classic_checker_layout(Roi::new([0.0, 0.0], [0.6, 0.4]));
    let cc = fit_color_correction(&image, &swatches).unwrap();

    let (m, b) = normal_equations(&observed, &targets);
    for i in 0..3 {
        assert!((cc.offset[i] - b[i]).abs() < 1e-8);
        for j in 0..3 {
            assert!((cc.matrix[i][j] - m[i][j]).abs() < 1e-8, "{:?} vs {m:?}", cc.matrix);
        }
    }
    // residual of a 4-parameter fit to noise of size sigma per channel
    assert!(cc.residual_rms <= 3.0 * sigma * 3f64.sqrt(), "{}", cc.residual_rms);

    let corrected = apply_color_correction(&cc, &image).unwrap();
    for s in &swatches {
        let got = swatch_mean(&corrected, &s.roi).unwrap();
        let e = (0..3).map(|k| (got[k] - s.target[k]).powi(2)).sum::<f64>().sqrt();
        assert!(e <= cc.residual_max + 1e-12, "{e} > {}", cc.residual_max);
    }
}

fn checkerboard(rows: usize, cols: usize, cell: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| ((r / cell + c / cell) % 2) as f64)
}

#[test]
fn warp_then_correct_restores_checkerboard() {
    let (rows, cols, cell) = (200, 300, 25);
    let truth = checkerboard(rows, cols, cell);
    let corners = [[12.0, 9.0], [291.0, 3.0], [286.0, 194.0], [5.0, 188.0]];
    let h = unit_square_homography(&corners).unwrap();
    let hinv = h.try_inverse().unwrap();
    // render the target as seen through the homography
    let distorted = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let q = apply_homography(&hinv, [c as f64 + 0.5, r as f64 + 0.5]);
        let (tc, tr) = (q[0] * cols as f64, q[1] * rows as f64);
        if tc < 0.0 || tr < 0.0 || tc >= cols as f64 || tr >= rows as f64 {
            0.5
        } else {
            truth[[tr as usize, tc as usize]]
        }
    });
    let cs = CoordinateSystem::new(rows, cols, 0.3, 0.2, [0.0, 0.0]).unwrap();
    let image = PhysicalImage::from_plane(distorted, cs, ColorSpace::Gray).unwrap();
    let spec = GeometrySpec { corners, width: 0.3, height: 0.2, shape: Some([rows, cols]), ..Default::default() };
    let corrected = apply_geometric_correction(&build_geometric_correction(&spec).unwrap(), &image).unwrap();
    let out = corrected.plane().unwrap();

    let (mut agree, mut total) = (0, 0);
    for r in 2..rows - 2 {
        for c in 2..cols - 2 {
            total += 1;
            agree += ((out[[r, c]] >= 0.5) == (truth[[r, c]] >= 0.5)) as usize;
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "{rate}");
}

#[test]
fn full_frame_chain_is_identity() {
    let cs = CoordinateSystem::new(40, 60, 0.06, 0.04, [0.0, 0.0]).unwrap();
    let plane = Array2::from_shape_fn((40, 60), |(r, c)| ((r * 13 + c * 7) % 17) as f64 / 16.0);
    let rgb = Array3::from_shape_fn((40, 60, 3), |(r, c, k)| (plane[[r, c]] * (1.0 - 0.2 * k as f64)).clamp(0.0, 1.0));
    let image = PhysicalImage::from_parts(rgb, cs, None, ColorSpace::Rgb).unwrap();
    let geometry = build_geometric_correction(&GeometrySpec::full_frame(40, 60, 0.06, 0.04)).unwrap();
    let chain = CorrectionChain::new().push(Box::new(geometry.clone()));
    assert_eq!(chain.names(), vec!["geometry"]);
    let once = chain.apply(&image).unwrap();
    let direct = apply_geometric_correction(&geometry, &image).unwrap();
    assert_eq!(once.data(), direct.data());
    for (a, b) in once.data().iter().zip(image.data().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}
