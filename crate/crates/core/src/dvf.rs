//! Dense displacement fields from a fitted spline, and a fold-over diagnostic.

use alloc::vec::Vec;

use crate::model::{DvfRaster, ImageMeta, Point2};
use crate::par::map_range;
use crate::tps::TpsModel;

/// Evaluates `model` at every pixel `(x, y)` of `meta`, row-major.
pub fn rasterize(model: &TpsModel, meta: ImageMeta) -> DvfRaster {
    let w = meta.width as usize;
    let rows = map_range(meta.height as usize, |y| {
        (0..w)
            .map(|x| {
                let d = model.eval(Point2::new(x as f64, y as f64));
                [d.dx as f32, d.dy as f32]
            })
            .collect::<Vec<_>>()
    });
    let field: Vec<[f32; 2]> = rows.into_iter().flatten().collect();
    DvfRaster::new(meta, field).unwrap_or_else(|_| DvfRaster::zeros(meta))
}

/// Summary of `det(I + grad field)` over the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianStats {
    pub min: f64,
    pub mean: f64,
    /// Fraction of pixels where the mapping folds over (`det <= 0`).
    pub negative_fraction: f64,
}

/// Jacobian determinant of `p -> p + field(p)` by finite differences
/// (central inside the grid, one-sided at the border, zero on a 1-pixel axis).
pub fn jacobian_stats(field: &DvfRaster) -> JacobianStats {
    let meta = field.meta();
    let (w, h) = (meta.width, meta.height);
    let diff = |lo: u32, hi: u32, a: [f64; 2], b: [f64; 2]| -> [f64; 2] {
        if hi == lo {
            [0.0, 0.0]
        } else {
            let s = (hi - lo) as f64;
            [(b[0] - a[0]) / s, (b[1] - a[1]) / s]
        }
    };
    let get = |x: u32, y: u32| {
        let d = field.at(x, y);
        [d.dx, d.dy]
    };
    let dets = map_range(h as usize, |y| {
        let y = y as u32;
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (0..w)
            .map(|x| {
                let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let gx = diff(x0, x1, get(x0, y), get(x1, y));
                let gy = diff(y0, y1, get(x, y0), get(x, y1));
                (1.0 + gx[0]) * (1.0 + gy[1]) - gy[0] * gx[1]
            })
            .collect::<Vec<f64>>()
    });
    let n = meta.pixel_count() as f64;
    let (mut min, mut sum, mut neg) = (f64::INFINITY, 0.0, 0usize);
    for d in dets.iter().flatten() {
        min = min.min(*d);
        sum += d;
        if *d <= 0.0 {
            neg += 1;
        }
    }
    JacobianStats {
        min,
        mean: sum / n,
        negative_fraction: neg as f64 / n,
    }
}
