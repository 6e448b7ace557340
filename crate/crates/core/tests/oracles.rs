mod common;

use common::*;
use maskfx_core::filters::kernels;
use maskfx_core::morphology::{self, StructuringElement};
use maskfx_core::{apply_filter, decode_rle, encode_rle, BinaryMask, FilterSpec, RasterImage};
use rand::Rng;

fn elements() -> Vec<(StructuringElement, bool, usize)> {
    let mut v = Vec::new();
    for r in 1..=3 {
        v.push((StructuringElement::square(r).unwrap(), true, r));
        v.push((StructuringElement::disk(r).unwrap(), false, r));
    }
    v
}

#[test]
fn erode_and_dilate_match_neighbourhood_scan() {
    let mut rng = rng(11);
    for _ in 0..120 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let density = rng.random_range(0.2..0.9);
        let m = random_mask(&mut rng, w, h, density);
        for (se, square, r) in elements() {
            assert_eq!(morphology::erode(&m, &se), erode(&m, square, r), "{se:?} {w}x{h}");
            assert_eq!(morphology::dilate(&m, &se), dilate(&m, square, r), "{se:?} {w}x{h}");
        }
    }
}

#[test]
fn open_and_close_match_composed_scans() {
    let mut rng = rng(12);
    for _ in 0..80 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let m = blob_mask(&mut rng, w, h);
        for (se, square, r) in elements() {
            let open = dilate(&erode(&m, square, r), square, r);
            let close = erode(&dilate(&m, square, r), square, r);
            assert_eq!(morphology::open(&m, &se), open);
            assert_eq!(morphology::close(&m, &se), close);
        }
    }
}

#[test]
fn component_filter_matches_union_find() {
    let mut rng = rng(13);
    for _ in 0..150 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let density = rng.random_range(0.1..0.6);
        let m = random_mask(&mut rng, w, h, density);
        let min_area = rng.random_range(0..12);
        assert_eq!(morphology::remove_small_components(&m, min_area), remove_small(&m, min_area));
    }
}

#[test]
fn component_areas_three_and_fifty() {
    let mut m = BinaryMask::empty(20, 20).unwrap();
    for (x, y) in [(1, 1), (2, 1), (1, 2)] {
        m.set(x, y, true);
    }
    for i in 0..50 {
        m.set(8 + i % 10, 10 + i / 10, true);
    }
    let out = morphology::remove_small_components(&m, 10);
    assert_eq!(out.area(), 50);
    assert!(!out.get(1, 1));
    assert_eq!(out, remove_small(&m, 10));
}

#[test]
fn disk_radius_two_on_random_32() {
    let mut rng = rng(14);
    let m = random_mask(&mut rng, 32, 32, 0.6);
    let se = StructuringElement::disk(2).unwrap();
    assert_eq!(morphology::erode(&m, &se), erode(&m, false, 2));
}

#[test]
fn median_matches_sort() {
    let mut rng = rng(21);
    for _ in 0..20 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let img = random_image(&mut rng, w, h);
        for r in 1..=3 {
            assert_eq!(kernels::median_blur(&img, r).unwrap(), median_sort(&img, r), "r={r} {w}x{h}");
        }
    }
}

#[test]
fn gaussian_within_one_of_dense_convolution() {
    let mut rng = rng(22);
    for sigma in [0.5, 1.0, 2.3] {
        for _ in 0..8 {
            let img = random_image(&mut rng, 16, 16);
            let out = kernels::gaussian_blur(&img, sigma).unwrap();
            assert!(max_deviation(&out, &gaussian_dense(&img, sigma)) <= 1.0, "sigma {sigma}");
        }
    }
}

#[test]
fn gaussian_impulse_is_the_sampled_kernel() {
    let mut img = RasterImage::filled(21, 21, [0, 0, 0]).unwrap();
    img.put_pixel(10, 10, [255, 255, 255]);
    let sigma = 1.5;
    let out = kernels::gaussian_blur(&img, sigma).unwrap();
    assert!(max_deviation(&out, &gaussian_dense(&img, sigma)) <= 1.0);
    let g = |d: f64| (-d * d / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-5..=5).map(|d| g(d as f64)).sum();
    for dy in -5i32..=5 {
        for dx in -5i32..=5 {
            let want = 255.0 * g(dx as f64) * g(dy as f64) / (norm * norm);
            let got = out.pixel((10 + dx) as usize, (10 + dy) as usize)[0] as f64;
            assert!((got - want).abs() <= 1.0, "({dx},{dy}) {got} vs {want}");
        }
    }
}

#[test]
fn bilateral_within_one_of_double_loop() {
    let mut rng = rng(23);
    for (ss, sr) in [(2.0, 30.0), (1.0, 10.0), (1.5, 80.0)] {
        for _ in 0..6 {
            let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
            let img = random_image(&mut rng, w, h);
            let out = kernels::bilateral(&img, ss, sr).unwrap();
            let dev = max_deviation(&out, &bilateral_loop(&img, ss, sr));
            assert!(dev <= 1.0, "ss {ss} sr {sr} {w}x{h}: {dev}");
        }
    }
}

#[test]
fn bilateral_with_huge_range_sigma_is_gaussian() {
    let mut rng = rng(24);
    let img = random_image(&mut rng, 8, 8);
    let a = kernels::bilateral(&img, 2.0, 1e6).unwrap();
    let b = kernels::gaussian_blur(&img, 2.0).unwrap();
    for (x, y) in a.as_raw().iter().zip(b.as_raw()) {
        assert!(x.abs_diff(*y) <= 1);
    }
}

#[test]
fn edge_preserve_within_one_of_window_formula() {
    let mut rng = rng(25);
    for (r, eps) in [(1, 400.0), (2, 100.0), (3, 2500.0)] {
        for _ in 0..5 {
            let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
            let img = random_image(&mut rng, w, h);
            let out = kernels::edge_preserve(&img, r, eps).unwrap();
            let dev = max_deviation(&out, &guided_window(&img, r, eps));
            assert!(dev <= 1.0, "r {r} eps {eps} {w}x{h}: {dev}");
        }
    }
}

#[test]
fn edge_preserve_with_huge_epsilon_is_double_box() {
    let mut rng = rng(26);
    let img = random_image(&mut rng, 8, 8);
    let out = kernels::edge_preserve(&img, 1, 1e12).unwrap();
    assert!(max_deviation(&out, &double_box(&img, 1)) <= 1.0);
}

#[test]
fn detail_amount_two_is_direct_formula() {
    let mut rng = rng(27);
    let img = random_image(&mut rng, 8, 8);
    let base = kernels::edge_preserve(&img, 2, 400.0).unwrap();
    let out = kernels::detail_enhance(&img, 2.0, 2, 400.0).unwrap();
    for ((&o, &i), &b) in out.as_raw().iter().zip(img.as_raw()).zip(base.as_raw()) {
        let want = (2 * i as i32 - b as i32).clamp(0, 255) as u8;
        assert_eq!(o, want);
    }
}

#[test]
fn pencil_matches_per_pixel_dodge() {
    let mut rng = rng(28);
    for sigma in [0.8, 2.0] {
        let img = random_image(&mut rng, 8, 8);
        assert_eq!(kernels::pencil_sketch(&img, sigma).unwrap(), pencil_oracle(&img, sigma));
    }
}

#[test]
fn pencil_checkerboard_flat_white_edges_dark() {
    let img = RasterImage::from_fn(24, 24, |x, y| {
        if (x / 8 + y / 8) % 2 == 0 {
            [255; 3]
        } else {
            [0; 3]
        }
    })
    .unwrap();
    let out = kernels::pencil_sketch(&img, 0.7).unwrap();
    assert_eq!(out, pencil_oracle(&img, 0.7));
    // flat cells of either colour come out white
    assert_eq!(out.pixel(4, 4)[0], 255);
    assert_eq!(out.pixel(12, 4)[0], 255);
    // the dark side of every transition stays dark
    assert_eq!(out.pixel(8, 4)[0], 0);
    assert_eq!(out.pixel(4, 15)[0], 0);
    assert_eq!(out.pixel(4, 16)[0], 255);
}

#[test]
fn gray_and_gray_blur_match_composition() {
    let mut rng = rng(29);
    let img = random_image(&mut rng, 16, 12);
    let gray = gray_oracle(&img);
    assert_eq!(kernels::to_gray(&img), gray);
    let blurred = kernels::gray_blur(&img, 1.3).unwrap();
    assert_eq!(blurred, kernels::gaussian_blur(&gray, 1.3).unwrap());
    assert!(blurred.as_raw().chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));
}

#[test]
fn dispatch_equals_direct_call() {
    let mut rng = rng(30);
    let img = random_image(&mut rng, 16, 16);
    let spec: FilterSpec = "gaussian-blur:sigma=2".parse().unwrap();
    assert_eq!(apply_filter(&spec, &img).unwrap(), kernels::gaussian_blur(&img, 2.0).unwrap());
    assert_eq!(apply_filter(&FilterSpec::preserve(), &img).unwrap(), img);
}

#[test]
fn rle_decode_matches_expansion_oracle() {
    let mut rng = rng(31);
    for _ in 0..300 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let density = rng.random_range(0.0..1.0);
        let m = random_mask(&mut rng, w, h, density);
        let counts = encode_rle(&m);
        assert_eq!(rle_decode(&counts, w, h), m);
        assert_eq!(decode_rle(&counts, w, h).unwrap(), m);
        let odd: i64 = counts.iter().skip(1).step_by(2).sum();
        assert_eq!(odd as usize, m.area());
    }
}

#[test]
fn rle_hand_examples() {
    assert_eq!(decode_rle(&[4], 2, 2).unwrap(), BinaryMask::empty(2, 2).unwrap());
    assert_eq!(decode_rle(&[0, 4], 2, 2).unwrap(), BinaryMask::full(2, 2).unwrap());
    let m = decode_rle(&[1, 2, 1], 2, 2).unwrap();
    let want = BinaryMask::from_fn(2, 2, |x, y| (x, y) == (0, 1) || (x, y) == (1, 0)).unwrap();
    assert_eq!(m, want);
    assert_eq!(encode_rle(&BinaryMask::empty(3, 3).unwrap()), vec![9]);
    assert_eq!(encode_rle(&BinaryMask::full(3, 3).unwrap()), vec![0, 9]);
}

#[test]
fn feather_half_plane_follows_erf_profile() {
    let sigma = 2.0;
    let m = BinaryMask::from_fn(40, 40, |x, _| x >= 20).unwrap();
    let alpha = maskfx_core::compositor::feather(&m, sigma).unwrap();
    // a sampled unit step blurred by a Gaussian: the boundary sits half a
    // pixel left of column 20
    for x in 14..26 {
        let t = x as f64 - 19.5;
        let want = 0.5 * (1.0 + erf(t / (sigma * std::f64::consts::SQRT_2)));
        let got = alpha.get(x, 20);
        assert!((got - want).abs() <= 0.02, "x {x}: {got} vs {want}");
    }
    let mid = 0.5 * (alpha.get(19, 20) + alpha.get(20, 20));
    assert!((mid - 0.5).abs() <= 0.02);
}
