//! Domain types shared by every stage of the registration pipeline.
//!
//! Coordinates are full-resolution pixel coordinates with the origin at the
//! top-left pixel center, `x` along columns and `y` along rows. Nothing in
//! this crate rescales coordinates implicitly.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use crate::error::{Error, Result};

/// A point in an image frame, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        let p = Self { x, y };
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn offset(&self, d: DisplacementVector) -> Point2 {
        Point2::new(self.x + d.dx, self.y + d.dy)
    }
}

impl Sub for Point2 {
    type Output = DisplacementVector;

    fn sub(self, rhs: Point2) -> DisplacementVector {
        DisplacementVector::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add<DisplacementVector> for Point2 {
    type Output = Point2;

    fn add(self, rhs: DisplacementVector) -> Point2 {
        self.offset(rhs)
    }
}

/// A displacement `(dx, dy)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisplacementVector {
    pub dx: f64,
    pub dy: f64,
}

impl DisplacementVector {
    pub const ZERO: Self = Self { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.dx, self.dy)
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

/// A candidate correspondence: `src` in the moving image, `dst` in the fixed image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatchPair {
    pub src: Point2,
    pub dst: Point2,
}

impl MatchPair {
    pub const fn new(src: Point2, dst: Point2) -> Self {
        Self { src, dst }
    }

    /// `dst - src`.
    pub fn displacement(&self) -> DisplacementVector {
        self.dst - self.src
    }

    pub fn is_finite(&self) -> bool {
        self.src.is_finite() && self.dst.is_finite()
    }
}

/// Provenance tag used when a source does not say which matcher produced a pair.
pub const UNKNOWN_PROVENANCE: &str = "unknown";

/// Ordered list of matches, each carrying the tag of the matcher that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    pairs: Vec<MatchPair>,
    provenance: Vec<String>,
}

impl MatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            pairs: Vec::with_capacity(n),
            provenance: Vec::with_capacity(n),
        }
    }

    /// Builds a set where every pair carries the same tag.
    pub fn from_pairs(pairs: Vec<MatchPair>, tag: &str) -> Self {
        let provenance = pairs.iter().map(|_| String::from(tag)).collect();
        Self { pairs, provenance }
    }

    pub fn push(&mut self, pair: MatchPair, tag: impl Into<String>) {
        self.pairs.push(pair);
        self.provenance.push(tag.into());
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[MatchPair] {
        &self.pairs
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn get(&self, i: usize) -> Option<(&MatchPair, &str)> {
        Some((self.pairs.get(i)?, self.provenance.get(i)?.as_str()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MatchPair, &str)> + '_ {
        self.pairs
            .iter()
            .zip(self.provenance.iter().map(String::as_str))
    }

    /// Keeps the entries whose flag is `false`, in order.
    pub fn without_flagged(&self, flags: &[bool]) -> MatchSet {
        debug_assert_eq!(flags.len(), self.len());
        let mut out = MatchSet::with_capacity(self.len());
        for ((pair, tag), &flagged) in self.iter().zip(flags) {
            if !flagged {
                out.push(*pair, tag);
            }
        }
        out
    }

    /// Subset by index, in the order given.
    pub fn select(&self, indices: &[usize]) -> MatchSet {
        let mut out = MatchSet::with_capacity(indices.len());
        for &i in indices {
            out.push(self.pairs[i], self.provenance[i].clone());
        }
        out
    }
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageMeta {
    pub width: u32,
    pub height: u32,
}

impl ImageMeta {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        Ok(Self { width, height })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Length of the image diagonal, `sqrt(w^2 + h^2)`.
    pub fn diagonal(&self) -> f64 {
        libm::hypot(self.width as f64, self.height as f64)
    }
}

/// 8-bit raster with one (gray) or three (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    meta: ImageMeta,
    channels: u8,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(meta: ImageMeta, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if pixels.len() != meta.pixel_count() * channels as usize {
            return Err(Error::SizeMismatch);
        }
        Ok(Self {
            meta,
            channels,
            pixels,
        })
    }

    pub fn filled(meta: ImageMeta, channels: u8, value: u8) -> Result<Self> {
        Self::new(
            meta,
            channels,
            alloc::vec![value; meta.pixel_count() * channels as usize],
        )
    }

    pub fn meta(&self) -> ImageMeta {
        self.meta
    }

    pub fn width(&self) -> u32 {
        self.meta.width
    }

    pub fn height(&self) -> u32 {
        self.meta.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Channel samples of the pixel at column `x`, row `y`.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.meta.width as usize + x as usize) * c;
        &self.pixels[i..i + c]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.meta.width as usize + x as usize) * c;
        &mut self.pixels[i..i + c]
    }

    /// Expands a gray image to RGB; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            meta: self.meta,
            channels: 3,
            pixels,
        }
    }
}

/// Dense displacement field over an image grid.
///
/// Pull convention: a warped image samples its input at `p + field(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DvfRaster {
    meta: ImageMeta,
    field: Vec<[f32; 2]>,
}

impl DvfRaster {
    pub fn new(meta: ImageMeta, field: Vec<[f32; 2]>) -> Result<Self> {
        if field.len() != meta.pixel_count() {
            return Err(Error::SizeMismatch);
        }
        if field.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { meta, field })
    }

    pub fn zeros(meta: ImageMeta) -> Self {
        Self {
            meta,
            field: alloc::vec![[0.0; 2]; meta.pixel_count()],
        }
    }

    pub fn constant(meta: ImageMeta, d: DisplacementVector) -> Self {
        Self {
            meta,
            field: alloc::vec![[d.dx as f32, d.dy as f32]; meta.pixel_count()],
        }
    }

    pub fn meta(&self) -> ImageMeta {
        self.meta
    }

    pub fn values(&self) -> &[[f32; 2]] {
        &self.field
    }

    pub fn at(&self, x: u32, y: u32) -> DisplacementVector {
        let v = self.field[y as usize * self.meta.width as usize + x as usize];
        DisplacementVector::new(v[0] as f64, v[1] as f64)
    }

    /// Bilinear interpolation of the field; positions outside the grid clamp to the border.
    pub fn sample(&self, p: Point2) -> DisplacementVector {
        let w = self.meta.width;
        let h = self.meta.height;
        let (x0, x1, fx) = bilinear_axis(p.x, w);
        let (y0, y1, fy) = bilinear_axis(p.y, h);
        let a = self.at(x0, y0);
        let b = self.at(x1, y0);
        let c = self.at(x0, y1);
        let d = self.at(x1, y1);
        let lerp = |u: f64, v: f64, t: f64| u + (v - u) * t;
        DisplacementVector::new(
            lerp(lerp(a.dx, b.dx, fx), lerp(c.dx, d.dx, fx), fy),
            lerp(lerp(a.dy, b.dy, fx), lerp(c.dy, d.dy, fx), fy),
        )
    }
}

/// Splits a coordinate into the two clamped neighbor indices and the fractional weight.
pub(crate) fn bilinear_axis(v: f64, len: u32) -> (u32, u32, f64) {
    let max = (len - 1) as f64;
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
    let lo = libm::floor(v);
    let i0 = lo as u32;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, v - lo)
}

/// Landmarks indexed contiguously from zero, in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    points: Vec<Point2>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<LandmarkSet> for Vec<Point2> {
    fn from(set: LandmarkSet) -> Self {
        set.points
    }
}

/// Per-match outcome of an outlier filter.
///
/// `scores` holds the filter's own statistic: the anomaly score in `(0, 1]`
/// for the isolation forest, the mean per-round deviation in pixels for the
/// local affine filter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutlierMask {
    pub flags: Vec<bool>,
    pub scores: Vec<f64>,
}

impl OutlierMask {
    pub fn clean(n: usize) -> Self {
        Self {
            flags: alloc::vec![false; n],
            scores: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}
