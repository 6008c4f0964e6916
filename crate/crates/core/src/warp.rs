//! Image resampling through a displacement field, and comparison renders.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{bilinear_axis, DvfRaster, ImageBuffer, LandmarkSet, Point2};
use crate::par::map_range;

/// Disc radius (pixels) used by [`overlay_landmarks`].
pub const MARKER_RADIUS: i64 = 3;
pub const RED: [u8; 3] = [255, 0, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];

/// Rounds half away from zero and saturates to `0..=255`.
pub fn to_u8(v: f64) -> u8 {
    libm::round(v).clamp(0.0, 255.0) as u8
}

/// Bilinear interpolation of channel `c` at `p`, clamped to the border.
pub fn bilinear_value(img: &ImageBuffer, p: Point2, c: usize) -> f64 {
    let (x0, x1, fx) = bilinear_axis(p.x, img.width());
    let (y0, y1, fy) = bilinear_axis(p.y, img.height());
    let v = |x: u32, y: u32| img.pixel(x, y)[c] as f64;
    let top = v(x0, y0) + (v(x1, y0) - v(x0, y0)) * fx;
    let bottom = v(x0, y1) + (v(x1, y1) - v(x0, y1)) * fx;
    top + (bottom - top) * fy
}

/// One 8-bit sample per channel at `p`.
pub fn bilinear_sample(img: &ImageBuffer, p: Point2) -> Vec<u8> {
    (0..img.channels() as usize)
        .map(|c| to_u8(bilinear_value(img, p, c)))
        .collect()
}

/// `out(x, y) = moving(x + dx, y + dy)`; the output takes the field's size.
pub fn warp(moving: &ImageBuffer, field: &DvfRaster) -> Result<ImageBuffer> {
    let meta = field.meta();
    if field.values().is_empty() {
        return Err(Error::SizeMismatch);
    }
    let ch = moving.channels() as usize;
    let w = meta.width;
    let rows = map_range(meta.height as usize, |y| {
        let y = y as u32;
        let mut row = Vec::with_capacity(w as usize * ch);
        for x in 0..w {
            let d = field.at(x, y);
            let p = Point2::new(x as f64 + d.dx, y as f64 + d.dy);
            for c in 0..ch {
                row.push(to_u8(bilinear_value(moving, p, c)));
            }
        }
        row
    });
    ImageBuffer::new(meta, moving.channels(), rows.concat())
}

/// Alternating `tile`-sized squares of `a` (even parity) and `b`.
pub fn checkerboard(a: &ImageBuffer, b: &ImageBuffer, tile: u32) -> Result<ImageBuffer> {
    if a.meta() != b.meta() || a.channels() != b.channels() {
        return Err(Error::SizeMismatch);
    }
    if tile == 0 {
        return Err(Error::InvalidConfig("tile must be >= 1"));
    }
    let mut out = a.clone();
    for y in 0..a.height() {
        for x in 0..a.width() {
            if (x / tile + y / tile) % 2 == 1 {
                out.pixel_mut(x, y).copy_from_slice(b.pixel(x, y));
            }
        }
    }
    Ok(out)
}

/// Draws `truth` as blue discs, then `predicted` as red discs on top.
/// Grayscale input is expanded to RGB first.
pub fn overlay_landmarks(
    img: &ImageBuffer,
    predicted: &LandmarkSet,
    truth: &LandmarkSet,
) -> ImageBuffer {
    let mut out = img.to_rgb();
    for p in truth.points() {
        draw_disc(&mut out, *p, BLUE);
    }
    for p in predicted.points() {
        draw_disc(&mut out, *p, RED);
    }
    out
}

/// Fills pixels within [`MARKER_RADIUS`] of `center` rounded to the nearest pixel.
fn draw_disc(img: &mut ImageBuffer, center: Point2, color: [u8; 3]) {
    let cx = libm::round(center.x) as i64;
    let cy = libm::round(center.y) as i64;
    let r = MARKER_RADIUS;
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let inside = (x - cx).pow(2) + (y - cy).pow(2) <= r * r;
            if inside && x >= 0 && y >= 0 && x < img.width() as i64 && y < img.height() as i64 {
                img.pixel_mut(x as u32, y as u32).copy_from_slice(&color);
            }
        }
    }
}
