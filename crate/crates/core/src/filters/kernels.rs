//! Pixel kernels behind the builtin filters.
//!
//! Windowed filters read past the frame by mirror reflection without
//! repeating the edge sample (`... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...`).
//! Arithmetic is carried in `f64` and rounded half away from zero once, at
//! the end of each filter.

use crate::raster::{GrayImage, RasterImage};

use super::FilterError;

/// Folds an arbitrary index into `0..n` by repeated mirror reflection about
/// the first and last samples.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Rounds half away from zero and saturates to 8 bits.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn require_positive(name: &'static str, value: f64) -> Result<(), FilterError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(FilterError::InvalidArgument {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// Row-major `f64` planes, one per channel.
struct Planes {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl Planes {
    fn from_image(image: &RasterImage) -> Self {
        let to_f = |c: usize| image.channel(c).into_iter().map(f64::from).collect();
        Self {
            width: image.width(),
            height: image.height(),
            channels: [to_f(0), to_f(1), to_f(2)],
        }
    }

    fn quantize(&self) -> RasterImage {
        let q = |c: usize| -> Vec<u8> { self.channels[c].iter().map(|&v| quantize(v)).collect() };
        let (r, g, b) = (q(0), q(1), q(2));
        RasterImage::from_planes(self.width, self.height, [&r, &g, &b]).expect("plane sizes")
    }
}

/// Luma as real value.
#[inline]
fn luma(rgb: [u8; 3]) -> f64 {
    0.299 * f64::from(rgb[0]) + 0.587 * f64::from(rgb[1]) + 0.114 * f64::from(rgb[2])
}

/// Rounded luma plane.
pub fn gray_plane(image: &RasterImage) -> GrayImage {
    let data = image
        .as_raw()
        .chunks_exact(3)
        .map(|p| quantize(luma([p[0], p[1], p[2]])))
        .collect();
    GrayImage::new(image.width(), image.height(), data).expect("same dimensions")
}

/// `round(0.299 R + 0.587 G + 0.114 B)` replicated into all three channels.
pub fn to_gray(image: &RasterImage) -> RasterImage {
    gray_plane(image).to_rgb()
}

/// Normalized sampled Gaussian, radius `ceil(3 sigma)`. Index `k` holds the
/// weight for offset `k - radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Mirror-padded copy of one line: `len + 2 * pad` samples.
fn pad_line(src: impl Fn(usize) -> f64, len: usize, pad: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((-(pad as isize)..(len + pad) as isize).map(|i| src(reflect(i, len))));
}

/// Separable convolution with a symmetric odd-length kernel: rows first,
/// then columns.
pub(crate) fn convolve_separable(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let mut tmp = vec![0.0; width * height];
    let mut line = Vec::with_capacity(width.max(height) + 2 * r);
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        pad_line(|i| row[i], width, r, &mut line);
        let dst = &mut tmp[y * width..(y + 1) * width];
        for (x, d) in dst.iter_mut().enumerate() {
            *d = kernel
                .iter()
                .zip(&line[x..x + kernel.len()])
                .map(|(w, v)| w * v)
                .sum();
        }
    }
    let mut out = vec![0.0; width * height];
    // column pass, processed row-wise over a mirrored row index for locality
    let rows: Vec<usize> = (-(r as isize)..(height + r) as isize)
        .map(|i| reflect(i, height))
        .collect();
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, &w) in kernel.iter().enumerate() {
            let src = &tmp[rows[y + k] * width..(rows[y + k] + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Real-valued Gaussian blur of a single plane.
pub fn gaussian_blur_plane(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    convolve_separable(plane, width, height, &gaussian_kernel(sigma))
}

/// Separable Gaussian blur of each channel.
pub fn gaussian_blur(image: &RasterImage, sigma: f64) -> Result<RasterImage, FilterError> {
    require_positive("sigma", sigma)?;
    let mut planes = Planes::from_image(image);
    let (w, h) = (planes.width, planes.height);
    for c in planes.channels.iter_mut() {
        *c = gaussian_blur_plane(c, w, h, sigma);
    }
    Ok(planes.quantize())
}

/// Exact per-channel median over a `(2r+1)^2` window, via a sliding
/// histogram per row with an incrementally tracked median.
pub fn median_blur(image: &RasterImage, radius: usize) -> Result<RasterImage, FilterError> {
    if radius == 0 {
        return Err(FilterError::InvalidArgument {
            name: "radius",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let (w, h) = image.dimensions();
    let r = radius as isize;
    let win = (2 * radius + 1) * (2 * radius + 1);
    // 0-based rank of the median within the sorted window
    let rank = (win - 1) / 2;
    let cols: Vec<usize> = (-r..w as isize + r).map(|i| reflect(i, w)).collect();
    let rows: Vec<usize> = (-r..h as isize + r).map(|i| reflect(i, h)).collect();
    let mut out_planes: [Vec<u8>; 3] = [vec![0; w * h], vec![0; w * h], vec![0; w * h]];
    for (c, out) in out_planes.iter_mut().enumerate() {
        let plane = image.channel(c);
        for y in 0..h {
            let window_rows = &rows[y..y + 2 * radius + 1];
            let mut hist = [0u32; 256];
            for &yy in window_rows {
                for &xx in &cols[0..2 * radius + 1] {
                    hist[plane[yy * w + xx] as usize] += 1;
                }
            }
            // smallest m with count(<= m) > rank
            let mut med = 0usize;
            let mut below = 0u32;
            while below + hist[med] <= rank as u32 {
                below += hist[med];
                med += 1;
            }
            out[y * w] = med as u8;
            for x in 1..w {
                let (gone, added) = (cols[x - 1], cols[x + 2 * radius]);
                for &yy in window_rows {
                    let v = plane[yy * w + gone] as usize;
                    hist[v] -= 1;
                    if v < med {
                        below -= 1;
                    }
                    let v = plane[yy * w + added] as usize;
                    hist[v] += 1;
                    if v < med {
                        below += 1;
                    }
                }
                while below > rank as u32 {
                    med -= 1;
                    below -= hist[med];
                }
                while below + hist[med] <= rank as u32 {
                    below += hist[med];
                    med += 1;
                }
                out[y * w + x] = med as u8;
            }
        }
    }
    let [r0, g0, b0] = &out_planes;
    Ok(RasterImage::from_planes(w, h, [r0, g0, b0]).expect("plane sizes"))
}

/// Bilateral filter with range weights taken on the rounded luma, so all
/// three channels share one weight per neighbor.
pub fn bilateral(
    image: &RasterImage,
    sigma_space: f64,
    sigma_range: f64,
) -> Result<RasterImage, FilterError> {
    require_positive("sigma_space", sigma_space)?;
    require_positive("sigma_range", sigma_range)?;
    let rows = BilateralRows::new(image, sigma_space, sigma_range);
    let (w, h) = image.dimensions();
    let mut out = RasterImage::filled(w, h, [0, 0, 0]).expect("valid dimensions");
    let mut acc = [vec![0f32; w], vec![0f32; w], vec![0f32; w], vec![0f32; w]];
    for y in 0..h {
        rows.accumulate_dispatch(y, &mut acc);
        let [ar, ag, ab, aw] = &acc;
        for x in 0..w {
            let norm = f64::from(aw[x]);
            let px = [ar[x], ag[x], ab[x]].map(|v| quantize(f64::from(v) / norm));
            out.put_pixel(x, y, px);
        }
    }
    Ok(out)
}

/// Lookup tables plus horizontally mirror-padded planes (row stride
/// `width + 2 * radius`).
struct BilateralRows {
    width: usize,
    height: usize,
    radius: usize,
    spatial: Vec<f32>,
    range: [f32; 256],
    gray: Vec<u8>,
    color: [Vec<f32>; 3],
}

impl BilateralRows {
    fn new(image: &RasterImage, sigma_space: f64, sigma_range: f64) -> Self {
        let (w, h) = image.dimensions();
        let r = (3.0 * sigma_space).ceil() as usize;
        let ri = r as isize;
        let side = 2 * r + 1;
        // f32 accumulation: at most (2r+1)^2 positive terms, well inside the
        // half-level rounding margin for 8-bit output
        let spatial = (0..side * side)
            .map(|k| {
                let (dx, dy) = ((k % side) as f64 - r as f64, (k / side) as f64 - r as f64);
                (-(dx * dx + dy * dy) / (2.0 * sigma_space * sigma_space)).exp() as f32
            })
            .collect();
        let range = std::array::from_fn(|d| {
            (-((d * d) as f64) / (2.0 * sigma_range * sigma_range)).exp() as f32
        });
        let pw = w + 2 * r;
        let gray = gray_plane(image);
        let cols: Vec<usize> = (-ri..(w + r) as isize).map(|i| reflect(i, w)).collect();
        let mut pg = vec![0u8; pw * h];
        let mut pc = [vec![0f32; pw * h], vec![0f32; pw * h], vec![0f32; pw * h]];
        for y in 0..h {
            for (px, &sx) in cols.iter().enumerate() {
                pg[y * pw + px] = gray.get(sx, y);
                let rgb = image.pixel(sx, y);
                for c in 0..3 {
                    pc[c][y * pw + px] = f32::from(rgb[c]);
                }
            }
        }
        Self {
            width: w,
            height: h,
            radius: r,
            spatial,
            range,
            gray: pg,
            color: pc,
        }
    }

    fn accumulate_dispatch(&self, y: usize, acc: &mut [Vec<f32>; 4]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { self.accumulate_avx2(y, acc) };
            return;
        }
        self.accumulate(y, acc);
    }

    // Eight output pixels at a time with their sums held in registers across
    // the whole window. Each pixel still adds its terms in the baseline
    // order, and without `fma` nothing is contracted, so the result is
    // bit-identical to `accumulate`.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn accumulate_avx2(&self, y: usize, acc: &mut [Vec<f32>; 4]) {
        use std::arch::x86_64::*;
        let (w, r) = (self.width, self.radius);
        let ri = r as isize;
        let side = 2 * r + 1;
        let pw = w + 2 * r;
        let lanes = w / 8 * 8;
        let center = &self.gray[y * pw + r..y * pw + r + w];
        let bases: Vec<usize> = (-ri..=ri)
            .map(|dy| reflect(y as isize + dy, self.height) * pw)
            .collect();
        let [ar, ag, ab, aw] = acc;
        for x0 in (0..lanes).step_by(8) {
            // SAFETY: every load reads 8 samples starting at most at
            // base + 2r + x0 with x0 + 8 <= w, inside a padded row of pw
            // samples; gather indices are below 256.
            unsafe {
                let c = _mm256_cvtepu8_epi32(_mm_loadl_epi64(center.as_ptr().add(x0).cast()));
                let mut sw = _mm256_setzero_ps();
                let mut sr = _mm256_setzero_ps();
                let mut sg = _mm256_setzero_ps();
                let mut sb = _mm256_setzero_ps();
                for (k, &base) in bases.iter().enumerate() {
                    let srow = &self.spatial[k * side..(k + 1) * side];
                    for (dxo, &s) in srow.iter().enumerate() {
                        let at = base + dxo + x0;
                        let q = _mm256_cvtepu8_epi32(_mm_loadl_epi64(self.gray.as_ptr().add(at).cast()));
                        let idx = _mm256_abs_epi32(_mm256_sub_epi32(c, q));
                        let wt = _mm256_mul_ps(
                            _mm256_set1_ps(s),
                            _mm256_i32gather_ps::<4>(self.range.as_ptr(), idx),
                        );
                        sw = _mm256_add_ps(sw, wt);
                        let [pr, pg, pb] = &self.color;
                        sr = _mm256_add_ps(sr, _mm256_mul_ps(wt, _mm256_loadu_ps(pr.as_ptr().add(at))));
                        sg = _mm256_add_ps(sg, _mm256_mul_ps(wt, _mm256_loadu_ps(pg.as_ptr().add(at))));
                        sb = _mm256_add_ps(sb, _mm256_mul_ps(wt, _mm256_loadu_ps(pb.as_ptr().add(at))));
                    }
                }
                _mm256_storeu_ps(aw.as_mut_ptr().add(x0), sw);
                _mm256_storeu_ps(ar.as_mut_ptr().add(x0), sr);
                _mm256_storeu_ps(ag.as_mut_ptr().add(x0), sg);
                _mm256_storeu_ps(ab.as_mut_ptr().add(x0), sb);
            }
        }
        for x in lanes..w {
            let [mut sw, mut sr, mut sg, mut sb] = [0f32; 4];
            for (k, &base) in bases.iter().enumerate() {
                let srow = &self.spatial[k * side..(k + 1) * side];
                for (dxo, &s) in srow.iter().enumerate() {
                    let at = base + dxo + x;
                    let wt = s * self.range[center[x].abs_diff(self.gray[at]) as usize];
                    sw += wt;
                    sr += wt * self.color[0][at];
                    sg += wt * self.color[1][at];
                    sb += wt * self.color[2][at];
                }
            }
            (aw[x], ar[x], ag[x], ab[x]) = (sw, sr, sg, sb);
        }
    }

    /// Weighted sums for output row `y`: RGB numerators and the weight total.
    fn accumulate(&self, y: usize, acc: &mut [Vec<f32>; 4]) {
        let (w, r) = (self.width, self.radius);
        let ri = r as isize;
        let side = 2 * r + 1;
        let pw = w + 2 * r;
        let mut weights = vec![0f32; w];
        acc.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v = 0.0));
        let [ar, ag, ab, aw] = acc;
        let center = &self.gray[y * pw + r..y * pw + r + w];
        for dy in -ri..=ri {
            let base = reflect(y as isize + dy, self.height) * pw;
            let srow = &self.spatial[(dy + ri) as usize * side..][..side];
            for (dxo, &s) in srow.iter().enumerate() {
                let span = base + dxo..base + dxo + w;
                range_weights(&mut weights, center, &self.gray[span.clone()], s, &self.range);
                for (a, &wt) in aw.iter_mut().zip(&weights) {
                    *a += wt;
                }
                for (a, plane) in [&mut *ar, &mut *ag, &mut *ab].into_iter().zip(&self.color) {
                    for ((a, &wt), &v) in a.iter_mut().zip(&weights).zip(&plane[span.clone()]) {
                        *a += wt * v;
                    }
                }
            }
        }
    }
}

/// `out[i] = s * range[|center[i] - neighbor[i]|]`.
#[inline(always)]
fn range_weights(out: &mut [f32], center: &[u8], neighbor: &[u8], s: f32, range: &[f32; 256]) {
    for ((wt, &c), &n) in out.iter_mut().zip(center).zip(neighbor) {
        *wt = s * range[c.abs_diff(n) as usize];
    }
}

/// Mean over the `(2r+1)^2` mirrored window around every pixel.
pub(crate) fn box_mean(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let side = 2 * radius + 1;
    let mut tmp = vec![0.0; width * height];
    let mut line = Vec::with_capacity(width.max(height) + 2 * radius);
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        pad_line(|i| row[i], width, radius, &mut line);
        let mut sum: f64 = line[..side].iter().sum();
        tmp[y * width] = sum;
        for x in 1..width {
            sum += line[x + side - 1] - line[x - 1];
            tmp[y * width + x] = sum;
        }
    }
    let mut out = vec![0.0; width * height];
    let norm = (side * side) as f64;
    for x in 0..width {
        pad_line(|i| tmp[i * width + x], height, radius, &mut line);
        let mut sum: f64 = line[..side].iter().sum();
        out[x] = sum / norm;
        for y in 1..height {
            sum += line[y + side - 1] - line[y - 1];
            out[y * width + x] = sum / norm;
        }
    }
    out
}

/// Self-guided filter on one plane, real-valued.
pub(crate) fn guided_plane(plane: &[f64], width: usize, height: usize, radius: usize, epsilon: f64) -> Vec<f64> {
    let mean = box_mean(plane, width, height, radius);
    let sq: Vec<f64> = plane.iter().map(|v| v * v).collect();
    let mean_sq = box_mean(&sq, width, height, radius);
    let mut a = vec![0.0; plane.len()];
    let mut b = vec![0.0; plane.len()];
    for i in 0..plane.len() {
        let var = (mean_sq[i] - mean[i] * mean[i]).max(0.0);
        a[i] = var / (var + epsilon);
        b[i] = (1.0 - a[i]) * mean[i];
    }
    let mean_a = box_mean(&a, width, height, radius);
    let mean_b = box_mean(&b, width, height, radius);
    (0..plane.len())
        .map(|i| mean_a[i] * plane[i] + mean_b[i])
        .collect()
}

/// Edge-preserving smoothing: the guided filter with each channel as its own
/// guide. `epsilon` is in squared 8-bit intensity units.
pub fn edge_preserve(
    image: &RasterImage,
    radius: usize,
    epsilon: f64,
) -> Result<RasterImage, FilterError> {
    if radius == 0 {
        return Err(FilterError::InvalidArgument {
            name: "radius",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    require_positive("epsilon", epsilon)?;
    let mut planes = Planes::from_image(image);
    let (w, h) = (planes.width, planes.height);
    for c in planes.channels.iter_mut() {
        *c = guided_plane(c, w, h, radius, epsilon);
    }
    Ok(planes.quantize())
}

/// Boosts the residual over an edge-preserving base:
/// `base + amount * (image - base)`.
pub fn detail_enhance(
    image: &RasterImage,
    amount: f64,
    radius: usize,
    epsilon: f64,
) -> Result<RasterImage, FilterError> {
    if !(amount >= 0.0 && amount.is_finite()) {
        return Err(FilterError::InvalidArgument {
            name: "amount",
            value: amount,
            reason: "must be non-negative and finite",
        });
    }
    let base = edge_preserve(image, radius, epsilon)?;
    let data = image
        .as_raw()
        .iter()
        .zip(base.as_raw())
        .map(|(&i, &b)| {
            let (i, b) = (f64::from(i), f64::from(b));
            quantize(b + amount * (i - b))
        })
        .collect();
    Ok(RasterImage::new(image.width(), image.height(), data).expect("same dimensions"))
}

/// Pencil drawing: color-dodge of the luma with its blurred negative.
pub fn pencil_sketch(image: &RasterImage, sigma: f64) -> Result<RasterImage, FilterError> {
    require_positive("sigma", sigma)?;
    let (w, h) = image.dimensions();
    let gray = gray_plane(image);
    let negative: Vec<f64> = gray.as_raw().iter().map(|&g| f64::from(255 - g)).collect();
    let blurred = gaussian_blur_plane(&negative, w, h, sigma);
    let data: Vec<u8> = gray
        .as_raw()
        .iter()
        .zip(&blurred)
        .map(|(&g, &b)| color_dodge(g, quantize(b)))
        .collect();
    Ok(GrayImage::new(w, h, data).expect("same dimensions").to_rgb())
}

/// `base * 255 / (255 - blend)`, saturating; 255 when `blend` is 255.
#[inline]
pub fn color_dodge(base: u8, blend: u8) -> u8 {
    if blend == 255 {
        return 255;
    }
    let v = f64::from(base) * 255.0 / f64::from(255 - blend);
    quantize(v.min(255.0))
}

/// Gray conversion followed by Gaussian blur.
pub fn gray_blur(image: &RasterImage, sigma: f64) -> Result<RasterImage, FilterError> {
    gaussian_blur(&to_gray(image), sigma)
}

/// Identity copy.
pub fn preserve(image: &RasterImage) -> RasterImage {
    image.clone()
}
