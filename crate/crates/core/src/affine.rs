//! 2-D affine transforms and their least-squares estimation.

use crate::error::{Error, Result};
use crate::model::Point2;

/// `p -> A p + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform2D {
    /// Row-major 2x2 linear part.
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl Default for AffineTransform2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineTransform2D {
    pub const IDENTITY: Self = Self {
        linear: [[1.0, 0.0], [0.0, 1.0]],
        translation: [0.0, 0.0],
    };

    pub const fn new(linear: [[f64; 2]; 2], translation: [f64; 2]) -> Self {
        Self {
            linear,
            translation,
        }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let [[a, b], [c, d]] = self.linear;
        Point2::new(
            a * p.x + b * p.y + self.translation[0],
            c * p.x + d * p.y + self.translation[1],
        )
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b], [c, d]] = self.linear;
        a * d - b * c
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().flatten().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// `self` after `first`: `p -> self(first(p))`.
    pub fn compose(&self, first: &AffineTransform2D) -> AffineTransform2D {
        let [[a, b], [c, d]] = self.linear;
        let [[e, f], [g, h]] = first.linear;
        let t = self.apply(Point2::new(first.translation[0], first.translation[1]));
        AffineTransform2D::new(
            [[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]],
            [t.x, t.y],
        )
    }
}

/// Relative tolerance on the centered scatter determinant below which the
/// source points count as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

/// Least-squares affine map taking each `src[i]` to `dst[i]`.
///
/// Solved on centered coordinates, which decouples the translation and
/// leaves one 2x2 normal system per output coordinate.
pub fn fit_affine(src: &[Point2], dst: &[Point2]) -> Result<AffineTransform2D> {
    if src.len() != dst.len() {
        return Err(Error::SizeMismatch);
    }
    if src.len() < 3 {
        return Err(Error::TooFewMatches {
            needed: 3,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let mean = |pts: &[Point2]| {
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Point2::new(sx / n, sy / n)
    };
    let ms = mean(src);
    let md = mean(dst);

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (x, y) = (s.x - ms.x, s.y - ms.y);
        let (u, v) = (d.x - md.x, d.y - md.y);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxu += x * u;
        syu += y * u;
        sxv += x * v;
        syv += y * v;
    }
    let det = sxx * syy - sxy * sxy;
    let scale = sxx + syy;
    if det.is_nan() || det <= COLLINEAR_TOL * scale * scale {
        return Err(Error::DegenerateGeometry);
    }
    let a = (sxu * syy - syu * sxy) / det;
    let b = (syu * sxx - sxu * sxy) / det;
    let c = (sxv * syy - syv * sxy) / det;
    let d = (syv * sxx - sxv * sxy) / det;
    let linear = [[a, b], [c, d]];
    let tx = md.x - (a * ms.x + b * ms.y);
    let ty = md.y - (c * ms.x + d * ms.y);
    Ok(AffineTransform2D::new(linear, [tx, ty]))
}
