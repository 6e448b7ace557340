//! Binary morphology used to clean the selected object mask.
//!
//! Pixels outside the frame count as background for every operator, so
//! erosion shrinks masks that touch the border and dilation never grows
//! anything from beyond it. Square elements run as two 1-D passes with
//! running counts; disks are decomposed into one horizontal run per row
//! offset and evaluated with per-row prefix sums.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum MorphologyError {
    #[error("structuring element radius must be at least 1")]
    ZeroRadius,
    #[error("unknown structuring element shape {0:?} (expected square or disk)")]
    UnknownShape(String),
    #[error("minimum component area fraction {0} outside [0, 1]")]
    AreaFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Disk,
}

impl FromStr for Shape {
    type Err = MorphologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(Shape::Square),
            "disk" => Ok(Shape::Disk),
            other => Err(MorphologyError::UnknownShape(other.to_string())),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Square => "square",
            Shape::Disk => "disk",
        })
    }
}

/// Centered, point-symmetric neighborhood. A square of radius `r` has side
/// `2r + 1`; a disk holds the offsets within Euclidean distance `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    shape: Shape,
    radius: usize,
}

impl StructuringElement {
    pub fn new(shape: Shape, radius: usize) -> Result<Self, MorphologyError> {
        if radius == 0 {
            return Err(MorphologyError::ZeroRadius);
        }
        Ok(Self { shape, radius })
    }

    pub fn square(radius: usize) -> Result<Self, MorphologyError> {
        Self::new(Shape::Square, radius)
    }

    pub fn disk(radius: usize) -> Result<Self, MorphologyError> {
        Self::new(Shape::Disk, radius)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Half-width of the element's row at vertical offset `dy`.
    fn half_width(&self, dy: isize) -> usize {
        let r = self.radius as isize;
        match self.shape {
            Shape::Square => self.radius,
            Shape::Disk => {
                let rem = r * r - dy * dy;
                // integer floor(sqrt(rem))
                let mut w = (rem as f64).sqrt() as isize;
                while w * w > rem {
                    w -= 1;
                }
                while (w + 1) * (w + 1) <= rem {
                    w += 1;
                }
                w as usize
            }
        }
    }

    /// Every `(dx, dy)` offset in the element.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            let hw = self.half_width(dy) as isize;
            for dx in -hw..=hw {
                out.push((dx, dy));
            }
        }
        out
    }
}

/// Per-row prefix sums of set pixels; `prefix[y * (w + 1) + x]` counts
/// pixels `0..x` of row `y`.
fn row_prefix(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = mask.dimensions();
    let bits = mask.as_slice();
    let mut prefix = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let row = &bits[y * w..(y + 1) * w];
        let base = y * (w + 1);
        for x in 0..w {
            prefix[base + x + 1] = prefix[base + x] + row[x] as u32;
        }
    }
    prefix
}

/// 1-D erosion/dilation with a centered segment of half-width `r` over
/// `len` samples at `stride`, outside samples = 0.
fn line_pass(src: &[bool], dst: &mut [bool], start: usize, stride: usize, len: usize, r: usize, erode: bool) {
    // running count of set samples in the window [i - r, i + r] clipped to the line
    let mut count = 0usize;
    for i in 0..r.min(len) {
        count += src[start + i * stride] as usize;
    }
    for i in 0..len {
        if i + r < len {
            count += src[start + (i + r) * stride] as usize;
        }
        if i > r {
            count -= src[start + (i - r - 1) * stride] as usize;
        }
        dst[start + i * stride] = if erode {
            i >= r && i + r < len && count == 2 * r + 1
        } else {
            count > 0
        };
    }
}

fn separable_square(mask: &BinaryMask, r: usize, erode: bool) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let src = mask.as_slice();
    let mut tmp = vec![false; w * h];
    for y in 0..h {
        line_pass(src, &mut tmp, y * w, 1, w, r, erode);
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        line_pass(&tmp, &mut out, x, w, h, r, erode);
    }
    BinaryMask::new(w, h, out).expect("same dimensions")
}

fn row_runs(mask: &BinaryMask, se: &StructuringElement, erode: bool) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let prefix = row_prefix(mask);
    let r = se.radius as isize;
    let half: Vec<usize> = (-r..=r).map(|dy| se.half_width(dy)).collect();
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut hit = erode;
            for dy in -r..=r {
                let yy = y + dy;
                let hw = half[(dy + r) as usize] as isize;
                if yy < 0 || yy >= h as isize {
                    if erode {
                        hit = false;
                        break;
                    }
                    continue;
                }
                let base = yy as usize * (w + 1);
                if erode {
                    if x - hw < 0 || x + hw >= w as isize {
                        hit = false;
                        break;
                    }
                    let lo = (x - hw) as usize;
                    let hi = (x + hw) as usize + 1;
                    if (prefix[base + hi] - prefix[base + lo]) as usize != hi - lo {
                        hit = false;
                        break;
                    }
                } else {
                    let lo = (x - hw).max(0) as usize;
                    let hi = ((x + hw).min(w as isize - 1) + 1) as usize;
                    if prefix[base + hi] > prefix[base + lo] {
                        hit = true;
                        break;
                    }
                }
            }
            out[y as usize * w + x as usize] = hit;
        }
    }
    BinaryMask::new(w, h, out).expect("same dimensions")
}

/// Pixel kept iff every element offset lands on a set pixel.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    match se.shape {
        Shape::Square => separable_square(mask, se.radius, true),
        Shape::Disk => row_runs(mask, se, true),
    }
}

/// Pixel set iff any element offset lands on a set pixel.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    match se.shape {
        Shape::Square => separable_square(mask, se.radius, false),
        Shape::Disk => row_runs(mask, se, false),
    }
}

/// Erosion followed by dilation.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Dilation followed by erosion.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Clears 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    if min_area == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dimensions();
    let bits = mask.as_slice();
    let mut out = bits.to_vec();
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if !bits[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if bits[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() < min_area {
            for &i in &component {
                out[i] = false;
            }
        }
    }
    BinaryMask::new(w, h, out).expect("same dimensions")
}

/// Settings for [`smooth_mask`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphologyConfig {
    pub enabled: bool,
    pub opening: StructuringElement,
    pub closing: StructuringElement,
    /// Components smaller than this fraction of the frame are removed.
    pub min_area_fraction: f64,
}

impl Default for MorphologyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            opening: StructuringElement::disk(2).expect("nonzero"),
            closing: StructuringElement::disk(2).expect("nonzero"),
            min_area_fraction: 0.0025,
        }
    }
}

impl MorphologyConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MorphologyError> {
        if !(0.0..=1.0).contains(&self.min_area_fraction) {
            return Err(MorphologyError::AreaFraction(self.min_area_fraction));
        }
        Ok(())
    }

    /// Minimum component size in pixels for a `width` x `height` frame.
    pub fn min_component_area(&self, width: usize, height: usize) -> usize {
        (self.min_area_fraction * (width * height) as f64).ceil() as usize
    }
}

/// Speck removal, then opening, then closing. Identity when disabled.
pub fn smooth_mask(mask: &BinaryMask, config: &MorphologyConfig) -> BinaryMask {
    if !config.enabled {
        return mask.clone();
    }
    let (w, h) = mask.dimensions();
    let cleaned = remove_small_components(mask, config.min_component_area(w, h));
    let opened = open(&cleaned, &config.opening);
    close(&opened, &config.closing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(mask: &BinaryMask, se: &StructuringElement, erode: bool) -> BinaryMask {
        let (w, h) = mask.dimensions();
        let offs = se.offsets();
        BinaryMask::from_fn(w, h, |x, y| {
            let probe = |&(dx, dy): &(isize, isize)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0
                    && ny >= 0
                    && nx < w as isize
                    && ny < h as isize
                    && mask.get(nx as usize, ny as usize)
            };
            if erode {
                offs.iter().all(probe)
            } else {
                offs.iter().any(probe)
            }
        })
        .unwrap()
    }

    fn from_rows(rows: &[&str]) -> BinaryMask {
        let w = rows[0].len();
        BinaryMask::from_fn(w, rows.len(), |x, y| rows[y].as_bytes()[x] == b'#').unwrap()
    }

    #[test]
    fn disk_offsets() {
        assert_eq!(StructuringElement::disk(1).unwrap().offsets().len(), 5);
        assert_eq!(StructuringElement::disk(2).unwrap().offsets().len(), 13);
        assert_eq!(StructuringElement::square(2).unwrap().offsets().len(), 25);
        assert!(StructuringElement::disk(0).is_err());
    }

    #[test]
    fn erode_full_square_leaves_interior() {
        let m = BinaryMask::full(5, 5).unwrap();
        let e = erode(&m, &StructuringElement::square(1).unwrap());
        let expect = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y))
            .unwrap();
        assert_eq!(e, expect);
    }

    #[test]
    fn dilate_point_gives_block() {
        let mut m = BinaryMask::empty(5, 5).unwrap();
        m.set(2, 2, true);
        let d = dilate(&m, &StructuringElement::square(1).unwrap());
        assert_eq!(d, from_rows(&[".....", ".###.", ".###.", ".###.", "....."]));
    }

    #[test]
    fn empty_is_absorbing() {
        let m = BinaryMask::empty(7, 4).unwrap();
        for se in [StructuringElement::square(2).unwrap(), StructuringElement::disk(2).unwrap()] {
            assert_eq!(erode(&m, &se), m);
            assert_eq!(dilate(&m, &se), m);
        }
    }

    #[test]
    fn opening_full_frame_by_shape() {
        let m = BinaryMask::full(5, 5).unwrap();
        // a square restores the whole frame from the 3x3 interior
        assert_eq!(open(&m, &StructuringElement::square(1).unwrap()), m);
        // the radius-1 disk is a cross and cannot reach the corners
        assert_eq!(
            open(&m, &StructuringElement::disk(1).unwrap()),
            from_rows(&[".###.", "#####", "#####", "#####", ".###."])
        );
    }

    #[test]
    fn closing_with_zero_border_shrinks_to_interior() {
        let mut m = BinaryMask::full(5, 5).unwrap();
        m.set(2, 2, false);
        let se = StructuringElement::square(1).unwrap();
        let c = close(&m, &se);
        assert_eq!(c, brute(&brute(&m, &se, false), &se, true));
        assert_eq!(c, from_rows(&[".....", ".###.", ".###.", ".###.", "....."]));
        // away from the border the hole is filled
        let mut big = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y))
            .unwrap();
        big.set(4, 4, false);
        let filled = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y))
            .unwrap();
        assert_eq!(close(&big, &se), filled);
    }

    #[test]
    fn components_below_threshold_removed() {
        let m = BinaryMask::from_fn(20, 20, |x, y| {
            (x < 3 && y == 0) || ((10..15).contains(&x) && (10..20).contains(&y))
        })
        .unwrap();
        let out = remove_small_components(&m, 10);
        assert_eq!(out.area(), 50);
        assert!(!out.get(0, 0));
        assert_eq!(remove_small_components(&m, 0), m);
        let full = BinaryMask::full(6, 6).unwrap();
        assert_eq!(remove_small_components(&full, 36), full);
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let m = from_rows(&["#..", ".#.", "..#"]);
        assert_eq!(remove_small_components(&m, 3), m);
        assert_eq!(remove_small_components(&m, 4).area(), 0);
    }

    #[test]
    fn smooth_disabled_is_identity() {
        let m = from_rows(&["#.#", ".#.", "##."]);
        assert_eq!(smooth_mask(&m, &MorphologyConfig::disabled()), m);
        let empty = BinaryMask::empty(10, 10).unwrap();
        assert_eq!(smooth_mask(&empty, &MorphologyConfig::default()), empty);
    }

    #[test]
    fn smooth_removes_speck_and_fills_pinhole() {
        // 40x40 frame, 20x20 blob with a one-pixel hole, plus a 2-pixel speck
        let blob = |x: usize, y: usize| (10..30).contains(&x) && (10..30).contains(&y);
        let mut m = BinaryMask::from_fn(40, 40, blob).unwrap();
        m.set(20, 20, false);
        m.set(2, 2, true);
        m.set(3, 2, true);
        let out = smooth_mask(&m, &MorphologyConfig::default());
        assert!(!out.get(2, 2) && !out.get(3, 2));
        assert!(out.get(20, 20));
        assert!(out.get(15, 10));
        // oracle: composition of brute-force operators
        let cfg = MorphologyConfig::default();
        let cleaned = remove_small_components(&m, cfg.min_component_area(40, 40));
        let opened = brute(&brute(&cleaned, &cfg.opening, true), &cfg.opening, false);
        let closed = brute(&brute(&opened, &cfg.closing, false), &cfg.closing, true);
        assert_eq!(out, closed);
    }

    #[test]
    fn shape_parsing() {
        assert_eq!("Disk".parse::<Shape>(), Ok(Shape::Disk));
        assert!("hexagon".parse::<Shape>().is_err());
    }
}
