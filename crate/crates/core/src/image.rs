//! Grayscale rasters, binary masks, and PGM/PNG codecs.
//!
//! PGM (P2 ASCII and P5 binary, maxval ≤ 255) is the canonical on-disk
//! format and is decoded bit-exactly. 8-bit grayscale PNG is accepted on
//! read only.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value domain of a [`GrayImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelDomain {
    /// Integers in `[0, 255]`, straight from an 8-bit file.
    Raw8,
    /// Reals in `[0, 1]`.
    Unit,
}

/// Row-major grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    domain: PixelDomain,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, domain: PixelDomain, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        let ok = match domain {
            PixelDomain::Raw8 => pixels
                .iter()
                .all(|&p| (0.0..=255.0).contains(&p) && p.fract() == 0.0),
            PixelDomain::Unit => pixels.iter().all(|&p| (0.0..=1.0).contains(&p)),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "pixel values outside the {domain:?} domain"
            )));
        }
        Ok(Self {
            width,
            height,
            domain,
            pixels,
        })
    }

    /// Unit-interval image; values are clamped into `[0, 1]`.
    pub fn from_unit(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        let pixels = pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Self::new(width, height, PixelDomain::Unit, pixels)
    }

    pub fn from_raw8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            PixelDomain::Raw8,
            bytes.iter().map(|&b| f64::from(b)).collect(),
        )
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_unit(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn domain(&self) -> PixelDomain {
        self.domain
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            })
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Quantizes to 8 bits: raw images verbatim, unit images as `round(v·255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self.domain {
            PixelDomain::Raw8 => self.pixels.iter().map(|&p| p as u8).collect(),
            PixelDomain::Unit => self
                .pixels
                .iter()
                .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }

    /// Raw-domain copy of this image as it would be stored on disk.
    pub fn to_raw8(&self) -> GrayImage {
        let bytes = self.to_bytes();
        GrayImage {
            width: self.width,
            height: self.height,
            domain: PixelDomain::Raw8,
            pixels: bytes.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    /// Reinterprets a raw image in the unit domain by dividing by 255.
    pub fn to_unit(&self) -> GrayImage {
        match self.domain {
            PixelDomain::Unit => self.clone(),
            PixelDomain::Raw8 => GrayImage {
                width: self.width,
                height: self.height,
                domain: PixelDomain::Unit,
                pixels: self.pixels.iter().map(|p| p / 255.0).collect(),
            },
        }
    }

    /// Mirrors left-right.
    pub fn flip_horizontal(&self) -> GrayImage {
        let mut out = self.clone();
        for y in 0..self.height {
            let row = &mut out.pixels[y * self.width..(y + 1) * self.width];
            row.reverse();
        }
        out
    }

    /// Mirrors top-bottom.
    pub fn flip_vertical(&self) -> GrayImage {
        let mut out = Vec::with_capacity(self.pixels.len());
        for y in (0..self.height).rev() {
            out.extend_from_slice(&self.pixels[y * self.width..(y + 1) * self.width]);
        }
        GrayImage {
            pixels: out,
            ..self.clone()
        }
    }

    pub(crate) fn with_pixels_unchecked(&self, pixels: Vec<f64>) -> GrayImage {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        GrayImage {
            pixels,
            ..self.clone()
        }
    }
}

/// Row-major lesion mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }

    /// Any nonzero pixel is foreground.
    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().iter().map(|&p| p > 0.0).collect(),
        }
    }

    /// Foreground as 255, background as 0.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            domain: PixelDomain::Raw8,
            pixels: self.bits.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect(),
        }
    }

    /// Nearest-neighbour resampling, matching the align-corners grid used for images.
    pub fn resize_nearest(&self, out_w: usize, out_h: usize) -> BinaryMask {
        let map = |d: usize, src: usize, dst: usize| -> usize {
            if dst == 1 {
                0
            } else {
                let s = d as f64 * (src - 1) as f64 / (dst - 1) as f64;
                (s.round() as usize).min(src - 1)
            }
        };
        let mut bits = Vec::with_capacity(out_w * out_h);
        for y in 0..out_h {
            let sy = map(y, self.height, out_h);
            for x in 0..out_w {
                bits.push(self.get(map(x, self.width, out_w), sy));
            }
        }
        BinaryMask {
            width: out_w,
            height: out_h,
            bits,
        }
    }
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::UnexpectedEof);
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::Format(format!(
                    "bad {what} `{}`",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes a PGM byte buffer (P2 or P5, maxval ≤ 255).
pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut r = HeaderReader { data, pos: 0 };
    let magic = r.token().map_err(|_| Error::Format("missing magic".into()))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("maxval {maxval} not in 1..=255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("zero dimension {width}x{height}")));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if r.pos >= data.len() {
            return Err(Error::UnexpectedEof);
        }
        let start = r.pos + 1;
        let payload = data.get(start..start + n).ok_or(Error::UnexpectedEof)?;
        for &b in payload {
            if usize::from(b) > maxval {
                return Err(Error::Format(format!("sample {b} exceeds maxval {maxval}")));
            }
            pixels.push(f64::from(b));
        }
    } else {
        for _ in 0..n {
            let v = r.number("sample")?;
            if v > maxval {
                return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64);
        }
    }
    GrayImage::new(width, height, PixelDomain::Raw8, pixels)
}

/// Binary (P5) encoding with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(&img.to_bytes());
    out
}

fn decode_png(data: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(data);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "non-grayscale PNG ({color:?}, {depth:?})"
        )));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let mut bytes = Vec::with_capacity(w * h);
    for row in buf[..info.buffer_size()].chunks(info.line_size) {
        bytes.extend_from_slice(&row[..w]);
    }
    GrayImage::from_raw8(w, h, &bytes)
}

/// Loads a PGM, or an 8-bit grayscale PNG when the file carries the PNG signature.
pub fn load_grayscale_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.starts_with(b"\x89PNG") {
        decode_png(&data)
    } else {
        decode_pgm(&data)
    }
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Ok(BinaryMask::from_image(&load_grayscale_image(path)?))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    save_pgm(&mask.to_image(), path)
}
