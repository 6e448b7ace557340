//! Image and mask containers plus lossless file I/O.
//!
//! Binary PPM (`P6`, maxval 255) is the byte-exact interchange format; PNG is
//! accepted on input and produced for files ending in `.png`. Single-channel
//! masks may additionally be read from `P5` PGM files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors raised while constructing rasters.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer length {actual} does not match {width}x{height} (expected {expected})")]
    BufferLength {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
}

/// Errors raised by image file readers and writers.
#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{}: file not found", path.display())]
    NotFound { path: PathBuf },
    #[error("{}: malformed header: {reason}", path.display())]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{}: truncated pixel data: expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{}: unsupported image format: {reason}", path.display())]
    Unsupported { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

fn check_dims(width: usize, height: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions { width, height });
    }
    Ok(())
}

/// 8-bit RGB image, row-major, three interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Copies one channel out as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    /// Interleaves three equally sized planes.
    pub fn from_planes(
        width: usize,
        height: usize,
        planes: [&[u8]; 3],
    ) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let n = width * height;
        for p in planes {
            if p.len() != n {
                return Err(RasterError::BufferLength {
                    width,
                    height,
                    expected: n,
                    actual: p.len(),
                });
            }
        }
        let mut data = Vec::with_capacity(n * 3);
        for ((r, g), b) in planes[0].iter().zip(planes[1]).zip(planes[2]) {
            data.extend_from_slice(&[*r, *g, *b]);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn same_dimensions(&self, width: usize, height: usize) -> Result<(), RasterError> {
        if (self.width, self.height) != (width, height) {
            return Err(RasterError::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: width,
                right_h: height,
            });
        }
        Ok(())
    }
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// Replicates the gray channel into an RGB image.
    pub fn to_rgb(&self) -> RasterImage {
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Row-major membership grid; `true` marks a pixel belonging to the object.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        if self.width * self.height <= 64 * 64 {
            for row in self.bits.chunks(self.width) {
                let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        mask_area(self)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// In-place per-pixel OR.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), RasterError> {
        self.check_same(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dimensions() == other.dimensions()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn check_same(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.dimensions() != other.dimensions() {
            return Err(RasterError::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }
}

/// Exact population count of a mask.
pub fn mask_area(mask: &BinaryMask) -> usize {
    mask.bits.iter().filter(|&&b| b).count()
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_offset: usize,
}

/// Parses a binary PNM header: magic, width, height, maxval, then exactly one
/// whitespace byte before the raster. `#` comments are allowed between tokens.
fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader, String> {
    if bytes.len() < 2 {
        return Err("file too short for magic number".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if i == 0 && pos == 2 {
            return Err("missing whitespace after magic number".into());
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format!(
                "expected {} as decimal integer",
                ["width", "height", "maxval"][i]
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|e| format!("bad {}: {e}", ["width", "height", "maxval"][i]))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("expected single whitespace byte after maxval".into()),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("zero dimension {width}x{height}"));
    }
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported (only 255)"));
    }
    Ok(PnmHeader {
        magic,
        width,
        height,
        data_offset: pos,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, ImageIoError> {
    fs::read(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            ImageIoError::NotFound {
                path: path.to_path_buf(),
            }
        } else {
            ImageIoError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn pnm_payload<'a>(
    bytes: &'a [u8],
    path: &Path,
    expect_magic: &[u8; 2],
    channels: usize,
) -> Result<(usize, usize, &'a [u8]), ImageIoError> {
    let header = parse_pnm_header(bytes).map_err(|reason| ImageIoError::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    })?;
    if &header.magic != expect_magic {
        return Err(ImageIoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!(
                "expected magic {}",
                String::from_utf8_lossy(expect_magic)
            ),
        });
    }
    let expected = header.width * header.height * channels;
    let payload = &bytes[header.data_offset..];
    if payload.len() < expected {
        return Err(ImageIoError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    Ok((header.width, header.height, &payload[..expected]))
}

/// Decodes an in-memory PPM (P6) or PNG image. `origin` only labels errors.
pub fn decode_image(bytes: &[u8], origin: &Path) -> Result<RasterImage, ImageIoError> {
    if bytes.starts_with(b"P6") {
        let (w, h, payload) = pnm_payload(bytes, origin, b"P6", 3)?;
        return Ok(RasterImage::new(w, h, payload.to_vec()).expect("validated dimensions"));
    }
    if bytes.starts_with(PNG_SIGNATURE) {
        let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|source| ImageIoError::Codec {
                path: origin.to_path_buf(),
                source,
            })?;
        // alpha, if any, is dropped here
        let rgb = decoded.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        return RasterImage::new(w, h, rgb.into_raw()).map_err(|e| ImageIoError::Unsupported {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        });
    }
    Err(ImageIoError::Unsupported {
        path: origin.to_path_buf(),
        reason: "expected binary PPM (P6) or PNG".into(),
    })
}

/// Reads a P6 PPM or PNG file into an RGB image.
pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage, ImageIoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    decode_image(&bytes, path)
}

/// Reads a single-channel mask from P5 PGM or PNG; any nonzero sample is set.
/// Color PNGs are reduced to luma first.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask, ImageIoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (w, h, samples) = if bytes.starts_with(b"P5") {
        let (w, h, payload) = pnm_payload(&bytes, path, b"P5", 1)?;
        (w, h, payload.to_vec())
    } else if bytes.starts_with(PNG_SIGNATURE) {
        let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|source| ImageIoError::Codec {
                path: path.to_path_buf(),
                source,
            })?;
        let luma = decoded.to_luma8();
        (luma.width() as usize, luma.height() as usize, luma.into_raw())
    } else {
        return Err(ImageIoError::Unsupported {
            path: path.to_path_buf(),
            reason: "expected binary PGM (P5) or PNG mask".into(),
        });
    };
    BinaryMask::new(w, h, samples.iter().map(|&v| v != 0).collect()).map_err(|e| {
        ImageIoError::Unsupported {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    })
}

/// Serializes an image as binary PPM (P6).
pub fn encode_ppm(image: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

/// Serializes an image as 8-bit RGB PNG.
pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>, image::ImageError> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(
        &image.data,
        image.width as u32,
        image.height as u32,
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

/// Writes `image` to `path`: PNG when the extension is `.png`, P6 otherwise.
///
/// The file is staged in the destination directory and renamed into place, so
/// a failed write never leaves a partial file behind.
pub fn write_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<(), ImageIoError> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(image).map_err(|source| ImageIoError::Codec {
            path: path.to_path_buf(),
            source,
        })?
    } else {
        encode_ppm(image)
    };
    let io_err = |source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut staged = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    staged.write_all(&bytes).map_err(io_err)?;
    // temp files are created owner-only; outputs should look like any other file
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(staged.path(), std::fs::Permissions::from_mode(0o644))
            .map_err(io_err)?;
    }
    staged.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
