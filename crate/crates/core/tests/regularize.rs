use ndarray::{s, Array2};
use physimg::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage};
use physimg::regularize::*;
use proptest::prelude::*;

fn plane_image(plane: Array2<f64>, pitch: f64) -> PhysicalImage {
    let (rows, cols) = plane.dim();
    let cs = CoordinateSystem::new(rows, cols, cols as f64 * pitch, rows as f64 * pitch, [0.0, 0.0]).unwrap();
    PhysicalImage::from_plane(plane, cs, ColorSpace::Gray).unwrap()
}

fn stripes(n: usize, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(_, c)| if (c / width) % 2 == 0 { 1.0 } else { 0.0 })
}

fn interior(a: &Array2<f64>, margin: usize) -> Vec<f64> {
    let (rows, cols) = a.dim();
    a.slice(s![margin..rows - margin, margin..cols - margin]).iter().cloned().collect()
}

#[test]
fn pore_phase_on_all_pore_indicator_equals_full() {
    let f = Array2::from_shape_fn((32, 40), |(r, c)| ((r * 3 + c * 5) % 11) as f64 / 10.0);
    let image = plane_image(f, 1e-3);
    let ones = plane_image(Array2::ones((32, 40)), 1e-3);
    let cfg = RegularizationConfig::with_mu(2e-3);
    let full = upscale(&image, &ones, Phase::Full, &cfg).unwrap().image;
    let pore = upscale(&image, &ones, Phase::Pore, &cfg).unwrap().image;
    assert_eq!(full.data(), pore.data());
    assert!(upscale(&image, &ones, Phase::Solid, &cfg).is_err());
}

#[test]
fn tracer_in_pores_upscales_to_one_on_pores_and_porosity_overall() {
    let g0 = stripes(96, 4);
    let pitch = 1e-3;
    let indicator = plane_image(g0.clone(), pitch);
    let tracer = plane_image(g0, pitch);
    let cfg = RegularizationConfig::with_mu(40.0 * pitch);
    let pore = upscale(&tracer, &indicator, Phase::Pore, &cfg).unwrap().image;
    let full = upscale(&tracer, &indicator, Phase::Full, &cfg).unwrap().image;
    let p = interior(&pore.plane().unwrap().to_owned(), 12);
    let f = interior(&full.plane().unwrap().to_owned(), 12);
    assert!(p.iter().all(|v| (v - 1.0).abs() <= 0.05));
    assert!(f.iter().all(|v| (v - 0.5).abs() <= 0.05), "{:?}", f.iter().cloned().fold((1.0f64, 0.0f64), |a, v| (a.0.min(v), a.1.max(v))));
}

#[test]
fn porosity_of_trivial_and_striped_indicators() {
    let cfg = RegularizationConfig::with_mu(0.02);
    let all_pore = porosity(&plane_image(Array2::ones((24, 24)), 1e-3), &cfg).unwrap();
    assert!(all_pore.data().iter().all(|&v| v == 1.0));
    let all_solid = porosity(&plane_image(Array2::zeros((24, 24)), 1e-3), &cfg).unwrap();
    assert!(all_solid.data().iter().all(|&v| v == 0.0));

    let striped = porosity(&plane_image(stripes(96, 3), 1e-3), &RegularizationConfig::with_mu(0.03)).unwrap();
    let inner = interior(&striped.plane().unwrap().to_owned(), 12);
    assert!(inner.iter().all(|v| (v - 0.5).abs() <= 0.02));
}

#[test]
fn scale_set_views_share_the_grid() {
    let g0 = stripes(32, 4);
    let image = plane_image(g0.mapv(|v| 0.2 + 0.6 * v), 1e-3);
    let indicator = plane_image(g0, 1e-3);
    let set = scale_set(&image, &indicator, &RegularizationConfig::with_mu(1e-4), &RegularizationConfig::with_mu(0.01)).unwrap();
    for img in [&set.g, &set.big_g, &set.gp, &set.gs, &set.g0] {
        assert_eq!(img.coords(), image.coords());
    }
    // pore and solid averages sit at the two intensities
    let gp = interior(&set.gp.plane().unwrap().to_owned(), 6);
    let gs = interior(&set.gs.plane().unwrap().to_owned(), 6);
    assert!(gp.iter().all(|v| (v - 0.8).abs() < 0.02));
    assert!(gs.iter().all(|v| (v - 0.2).abs() < 0.02));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unit_weight_preserves_the_mean(vals in proptest::collection::vec(0.0f64..1.0, 48), mu in 0.0f64..0.01) {
        let f = Array2::from_shape_vec((6, 8), vals).unwrap();
        let mean = f.mean().unwrap();
        let out = tv_denoise(&plane_image(f, 1e-3), &RegularizationConfig::with_mu(mu).iterations(5000, 1e-10)).unwrap();
        prop_assert!((out.image.plane().unwrap().mean().unwrap() - mean).abs() < 1e-6);
    }

    #[test]
    fn physical_mu_is_pitch_invariant_on_refinement(vals in proptest::collection::vec(0.0f64..1.0, 16), mu in 0.0f64..0.004) {
        // a 4x4 image and its 2x nearest upsampling over the same domain
        let f = Array2::from_shape_vec((4, 4), vals).unwrap();
        let up = Array2::from_shape_fn((8, 8), |(r, c)| f[[r / 2, c / 2]]);
        let cfg = RegularizationConfig::with_mu(mu).iterations(20_000, 1e-12);
        let coarse = tv_denoise(&plane_image(f, 1e-3), &cfg).unwrap().image;
        let fine = tv_denoise(&plane_image(up, 0.5e-3), &cfg).unwrap().image;
        let (c, fp) = (coarse.plane().unwrap(), fine.plane().unwrap());
        for r in 0..4 {
            for k in 0..4 {
                let m = (fp[[2 * r, 2 * k]] + fp[[2 * r + 1, 2 * k]] + fp[[2 * r, 2 * k + 1]] + fp[[2 * r + 1, 2 * k + 1]]) / 4.0;
                prop_assert!((m - c[[r, k]]).abs() < 1e-4, "{} vs {}", m, c[[r, k]]);
            }
        }
    }
}
