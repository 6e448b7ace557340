//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! None of these call into the optimized kernels: each is written directly
//! from the defining formula so that agreement means something.

#![allow(dead_code)]

use maskfx_core::{BinaryMask, RasterImage};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut StdRng, w: usize, h: usize) -> RasterImage {
    let data = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
    RasterImage::new(w, h, data).unwrap()
}

/// Mask with roughly `density` of its pixels set.
pub fn random_mask(rng: &mut StdRng, w: usize, h: usize, density: f64) -> BinaryMask {
    let bits = (0..w * h).map(|_| rng.random_bool(density)).collect();
    BinaryMask::new(w, h, bits).unwrap()
}

/// Blobby mask: a few random rectangles plus noise, closer to real
/// segmentation output than uniform noise.
pub fn blob_mask(rng: &mut StdRng, w: usize, h: usize) -> BinaryMask {
    let mut m = random_mask(rng, w, h, 0.08);
    for _ in 0..rng.random_range(1..4) {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..w), rng.random_range(y0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// Mirror index without edge repetition, by walking back and forth.
pub fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

fn round_clamp(v: f64) -> u8 {
    let r = if v >= 0.0 { (v + 0.5).floor() } else { (v - 0.5).ceil() };
    r.clamp(0.0, 255.0) as u8
}

fn luma(p: [u8; 3]) -> u8 {
    round_clamp(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
}

// ---------------------------------------------------------------- morphology

pub fn disk_member(dx: isize, dy: isize, r: usize) -> bool {
    dx * dx + dy * dy <= (r * r) as isize
}

fn in_se(square: bool, r: usize, dx: isize, dy: isize) -> bool {
    dx.unsigned_abs() <= r && dy.unsigned_abs() <= r && (square || disk_member(dx, dy, r))
}

fn probe(m: &BinaryMask, x: usize, y: usize, square: bool, r: usize, all: bool) -> bool {
    let (w, h) = (m.width() as isize, m.height() as isize);
    let r_i = r as isize;
    for dy in -r_i..=r_i {
        for dx in -r_i..=r_i {
            if !in_se(square, r, dx, dy) {
                continue;
            }
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            let v = xx >= 0 && yy >= 0 && xx < w && yy < h && m.get(xx as usize, yy as usize);
            if all && !v {
                return false;
            }
            if !all && v {
                return true;
            }
        }
    }
    all
}

pub fn erode(m: &BinaryMask, square: bool, r: usize) -> BinaryMask {
    BinaryMask::from_fn(m.width(), m.height(), |x, y| probe(m, x, y, square, r, true)).unwrap()
}

pub fn dilate(m: &BinaryMask, square: bool, r: usize) -> BinaryMask {
    BinaryMask::from_fn(m.width(), m.height(), |x, y| probe(m, x, y, square, r, false)).unwrap()
}

/// Component labels via union-find over 8-neighbours.
pub fn component_labels(m: &BinaryMask) -> Vec<usize> {
    let (w, h) = (m.width(), m.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            for (dx, dy) in [(-1isize, -1isize), (0, -1), (1, -1), (-1, 0)] {
                let (xx, yy) = (x as isize + dx, y as isize + dy);
                if xx < 0 || yy < 0 || xx >= w as isize {
                    continue;
                }
                let (xx, yy) = (xx as usize, yy as usize);
                if m.get(xx, yy) {
                    let a = find(&mut parent, y * w + x);
                    let b = find(&mut parent, yy * w + xx);
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..w * h).map(|i| find(&mut parent, i)).collect()
}

pub fn remove_small(m: &BinaryMask, min_area: usize) -> BinaryMask {
    let labels = component_labels(m);
    let mut sizes = std::collections::HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if m.as_slice()[i] {
            *sizes.entry(l).or_insert(0usize) += 1;
        }
    }
    let w = m.width();
    BinaryMask::from_fn(w, m.height(), |x, y| {
        m.get(x, y) && sizes[&labels[y * w + x]] >= min_area
    })
    .unwrap()
}

// ------------------------------------------------------------------- filters

fn channel_at(img: &RasterImage, x: isize, y: isize, c: usize) -> f64 {
    let (w, h) = img.dimensions();
    img.pixel(mirror(x, w), mirror(y, h))[c] as f64
}

/// Dense 2-D Gaussian convolution with the outer-product kernel.
pub fn gaussian_dense(img: &RasterImage, sigma: f64) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let r = (3.0 * sigma).ceil() as isize;
    let g = |d: isize| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-r..=r).map(g).sum::<f64>().powi(2);
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h as isize {
        for x in 0..w as isize {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        acc += g(dx) * g(dy) * channel_at(img, x + dx, y + dy, c);
                    }
                }
                out.push(acc / norm);
            }
        }
    }
    out
}

pub fn median_sort(img: &RasterImage, r: usize) -> RasterImage {
    let r = r as isize;
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let mut px = [0u8; 3];
        for (c, v) in px.iter_mut().enumerate() {
            let mut win = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    win.push(channel_at(img, x as isize + dx, y as isize + dy, c) as u8);
                }
            }
            win.sort_unstable();
            *v = win[win.len() / 2];
        }
        px
    })
    .unwrap()
}

pub fn bilateral_loop(img: &RasterImage, ss: f64, sr: f64) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let r = (3.0 * ss).ceil() as isize;
    let gray = |x: isize, y: isize| luma(img.pixel(mirror(x, w), mirror(y, h))) as f64;
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gc = gray(x, y);
            let mut num = [0.0; 3];
            let mut den = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let dg = gray(x + dx, y + dy) - gc;
                    let wt = (-((dx * dx + dy * dy) as f64) / (2.0 * ss * ss)).exp()
                        * (-(dg * dg) / (2.0 * sr * sr)).exp();
                    den += wt;
                    for (c, n) in num.iter_mut().enumerate() {
                        *n += wt * channel_at(img, x + dx, y + dy, c);
                    }
                }
            }
            out.extend(num.iter().map(|n| n / den));
        }
    }
    out
}

/// Mean of one channel over the square window centred at a (mirrored) pixel.
fn window_stats(img: &RasterImage, cx: usize, cy: usize, c: usize, r: isize) -> (f64, f64) {
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let v = channel_at(img, cx as isize + dx, cy as isize + dy, c);
            s += v;
            s2 += v * v;
            n += 1.0;
        }
    }
    let mean = s / n;
    (mean, (s2 / n - mean * mean).max(0.0))
}

/// Self-guided filter evaluated window by window.
pub fn guided_window(img: &RasterImage, r: usize, eps: f64) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let r = r as isize;
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let i = img.pixel(x, y)[c] as f64;
                let (mut acc, mut n) = (0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let kx = mirror(x as isize + dx, w);
                        let ky = mirror(y as isize + dy, h);
                        let (mu, var) = window_stats(img, kx, ky, c, r);
                        let a = var / (var + eps);
                        acc += a * i + (1.0 - a) * mu;
                        n += 1.0;
                    }
                }
                out.push(acc / n);
            }
        }
    }
    out
}

/// Box mean of the box mean (the a = 0 limit of the guided filter).
pub fn double_box(img: &RasterImage, r: usize) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let r = r as isize;
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let (mut acc, mut n) = (0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let kx = mirror(x as isize + dx, w);
                        let ky = mirror(y as isize + dy, h);
                        acc += window_stats(img, kx, ky, c, r).0;
                        n += 1.0;
                    }
                }
                out.push(acc / n);
            }
        }
    }
    out
}

pub fn gray_oracle(img: &RasterImage) -> RasterImage {
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let g = luma(img.pixel(x, y));
        [g, g, g]
    })
    .unwrap()
}

pub fn dodge(base: u8, blend: u8) -> u8 {
    if blend == 255 {
        255
    } else {
        round_clamp((base as f64 * 255.0 / (255 - blend) as f64).min(255.0))
    }
}

/// Pencil sketch from its per-pixel definition on top of the dense blur.
pub fn pencil_oracle(img: &RasterImage, sigma: f64) -> RasterImage {
    let (w, h) = img.dimensions();
    let gray = gray_oracle(img);
    let negative =
        RasterImage::from_fn(w, h, |x, y| [255 - gray.pixel(x, y)[0]; 3]).unwrap();
    let blurred = gaussian_dense(&negative, sigma);
    RasterImage::from_fn(w, h, |x, y| {
        let b = round_clamp(blurred[(y * w + x) * 3]);
        [dodge(gray.pixel(x, y)[0], b); 3]
    })
    .unwrap()
}

/// Largest per-sample distance between an 8-bit image and real values.
pub fn max_deviation(img: &RasterImage, reference: &[f64]) -> f64 {
    img.as_raw()
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max)
}

// ----------------------------------------------------------------------- rle

/// Expands counts into a column-major bit list, then transposes.
pub fn rle_decode(counts: &[i64], w: usize, h: usize) -> BinaryMask {
    let mut column_major = Vec::with_capacity(w * h);
    for (k, &n) in counts.iter().enumerate() {
        column_major.extend(std::iter::repeat_n(k % 2 == 1, n as usize));
    }
    assert_eq!(column_major.len(), w * h);
    BinaryMask::from_fn(w, h, |x, y| column_major[x * h + y]).unwrap()
}

// ------------------------------------------------------------------- feather

/// Abramowitz-Stegun 7.1.26 approximation, |error| < 1.5e-7.
pub fn erf(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    s * (1.0 - poly * (-x * x).exp())
}
