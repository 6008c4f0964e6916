//! Ground-truth generators: analytic displacement fields, labelled
//! contaminated match sets, landmark sets and textured image pairs.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::affine::AffineTransform2D;
use crate::error::{Error, Result};
use crate::model::{
    DisplacementVector, DvfRaster, ImageBuffer, ImageMeta, LandmarkSet, MatchPair, MatchSet,
    Point2,
};
use crate::par::map_range;
use crate::rng::{stream, DOMAIN_SYNTH};

const STREAM_MATCHES: u64 = 0;
const STREAM_LANDMARKS: u64 = 1;
const STREAM_TEXTURE: u64 = 2;
const STREAM_FIELD: u64 = 3;

/// Analytic displacement field in the fixed-image frame (pull convention).
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticField {
    Translation(DisplacementVector),
    /// Field `T(p) - p` of an affine map `T`.
    Affine(AffineTransform2D),
    /// `dx = A sin(2 pi y / L + phase)`, `dy = A sin(2 pi x / L + phase)`.
    Sinusoidal {
        amplitude: f64,
        wavelength: f64,
        phase: f64,
    },
    /// `amplitude * exp(-|p - center|^2 / (2 sigma^2))`.
    GaussianBump {
        center: Point2,
        amplitude: DisplacementVector,
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Translation,
    Affine,
    Sinusoidal,
    GaussianBump,
}

impl SyntheticField {
    pub fn eval(&self, p: Point2) -> DisplacementVector {
        match *self {
            SyntheticField::Translation(d) => d,
            SyntheticField::Affine(t) => t.apply(p) - p,
            SyntheticField::Sinusoidal {
                amplitude,
                wavelength,
                phase,
            } => DisplacementVector::new(
                amplitude * libm::sin(2.0 * PI * p.y / wavelength + phase),
                amplitude * libm::sin(2.0 * PI * p.x / wavelength + phase),
            ),
            SyntheticField::GaussianBump {
                center,
                amplitude,
                sigma,
            } => {
                let g = libm::exp(-p.distance_sq(&center) / (2.0 * sigma * sigma));
                DisplacementVector::new(amplitude.dx * g, amplitude.dy * g)
            }
        }
    }

    /// Field of the given kind with seeded parameters scaled to `meta`, with
    /// displacements up to `magnitude` pixels.
    pub fn random(kind: FieldKind, meta: ImageMeta, magnitude: f64, seed: u64) -> Self {
        let mut rng = stream(seed, DOMAIN_SYNTH, STREAM_FIELD);
        let w = meta.width as f64;
        let h = meta.height as f64;
        let angle = rng.random_range(0.0..2.0 * PI);
        match kind {
            FieldKind::Translation => SyntheticField::Translation(DisplacementVector::new(
                magnitude * libm::cos(angle),
                magnitude * libm::sin(angle),
            )),
            FieldKind::Affine => {
                // small rotation + anisotropic scale about the image center
                let extent = w.max(h);
                let rot = rng.random_range(-0.5..0.5) * magnitude / extent;
                let sx = 1.0 + rng.random_range(-0.5..0.5) * magnitude / extent;
                let sy = 1.0 + rng.random_range(-0.5..0.5) * magnitude / extent;
                let (s, c) = (libm::sin(rot), libm::cos(rot));
                let linear = [[c * sx, -s * sy], [s * sx, c * sy]];
                let center = Point2::new(w / 2.0, h / 2.0);
                let moved = AffineTransform2D::new(linear, [0.0, 0.0]).apply(center);
                SyntheticField::Affine(AffineTransform2D::new(
                    linear,
                    [center.x - moved.x, center.y - moved.y],
                ))
            }
            FieldKind::Sinusoidal => SyntheticField::Sinusoidal {
                amplitude: magnitude.min(0.1 * w.min(h)),
                wavelength: w.max(h),
                phase: angle,
            },
            FieldKind::GaussianBump => SyntheticField::GaussianBump {
                center: Point2::new(rng.random_range(0.25..0.75) * w, rng.random_range(0.25..0.75) * h),
                amplitude: DisplacementVector::new(
                    magnitude * libm::cos(angle),
                    magnitude * libm::sin(angle),
                ),
                sigma: 0.2 * w.min(h),
            },
        }
    }
}

/// Rasterizes `field` at every pixel center of `meta`.
pub fn make_field(meta: ImageMeta, field: &SyntheticField) -> Result<DvfRaster> {
    if let SyntheticField::Sinusoidal {
        amplitude,
        wavelength,
        ..
    } = *field
    {
        let cap = 0.1 * meta.width.min(meta.height) as f64;
        if amplitude.abs() > cap {
            return Err(Error::InvalidConfig(
                "sinusoidal amplitude exceeds a tenth of the smaller image side",
            ));
        }
        if wavelength.is_nan() || wavelength <= 0.0 {
            return Err(Error::InvalidConfig("wavelength must be positive"));
        }
    }
    let w = meta.width as usize;
    let rows = map_range(meta.height as usize, |y| {
        (0..w)
            .map(|x| {
                let d = field.eval(Point2::new(x as f64, y as f64));
                [d.dx as f32, d.dy as f32]
            })
            .collect::<Vec<_>>()
    });
    DvfRaster::new(meta, rows.concat())
}

/// Parameters for [`make_matches`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchSpec {
    pub count: usize,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_magnitude: f64,
}

/// Labelled matches consistent with `field`.
///
/// `dst` is uniform over the image, `src = dst + field(dst) + N(0, sigma^2)`.
/// `round(fraction * count)` matches, chosen at random, have their `src`
/// pushed by an extra offset of length uniform in `[m, 2m]` and uniform
/// direction; their labels are `true`.
pub fn make_matches(
    field: &SyntheticField,
    meta: ImageMeta,
    spec: &MatchSpec,
    seed: u64,
) -> Result<(MatchSet, Vec<bool>)> {
    if !(0.0..1.0).contains(&spec.outlier_fraction) {
        return Err(Error::InvalidConfig("outlier fraction must lie in [0, 1)"));
    }
    if spec.noise_sigma.is_nan()
        || spec.noise_sigma < 0.0
        || spec.outlier_magnitude.is_nan()
        || spec.outlier_magnitude < 0.0
    {
        return Err(Error::InvalidConfig("noise and outlier magnitude must be non-negative"));
    }
    let mut rng = stream(seed, DOMAIN_SYNTH, STREAM_MATCHES);
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|_| Error::InvalidConfig("invalid noise sigma"))?;
    let n_out = libm::round(spec.outlier_fraction * spec.count as f64) as usize;
    let mut labels = alloc::vec![false; spec.count];
    for i in index::sample(&mut rng, spec.count, n_out) {
        labels[i] = true;
    }
    let (wmax, hmax) = ((meta.width - 1) as f64, (meta.height - 1) as f64);
    let mut set = MatchSet::with_capacity(spec.count);
    for &outlier in &labels {
        let dst = Point2::new(uniform(&mut rng, wmax), uniform(&mut rng, hmax));
        let d = field.eval(dst);
        let mut src = Point2::new(
            dst.x + d.dx + noise.sample(&mut rng),
            dst.y + d.dy + noise.sample(&mut rng),
        );
        if outlier {
            let m = rng.random_range(spec.outlier_magnitude..=2.0 * spec.outlier_magnitude);
            let a = rng.random_range(0.0..2.0 * PI);
            src = Point2::new(src.x + m * libm::cos(a), src.y + m * libm::sin(a));
        }
        set.push(MatchPair::new(src, dst), "synthetic");
    }
    Ok((set, labels))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    if max > 0.0 {
        rng.random_range(0.0..=max)
    } else {
        0.0
    }
}

/// Landmarks uniform over the image, at least `margin` pixels from the border.
pub fn make_landmarks(meta: ImageMeta, count: usize, margin: f64, seed: u64) -> LandmarkSet {
    let mut rng = stream(seed, DOMAIN_SYNTH, STREAM_LANDMARKS);
    let span = |len: u32| {
        let max = (len - 1) as f64;
        let m = margin.clamp(0.0, max / 2.0);
        (m, max - m)
    };
    let (x0, x1) = span(meta.width);
    let (y0, y1) = span(meta.height);
    let points = (0..count)
        .map(|_| {
            let x = if x1 > x0 { rng.random_range(x0..=x1) } else { x0 };
            let y = if y1 > y0 { rng.random_range(y0..=y1) } else { y0 };
            Point2::new(x, y)
        })
        .collect();
    LandmarkSet::new(points).expect("generated landmarks are finite")
}

/// Moves fixed-frame landmarks into the moving frame, `p + field(p)`.
pub fn displace_landmarks(landmarks: &LandmarkSet, field: &SyntheticField) -> LandmarkSet {
    let points = landmarks
        .points()
        .iter()
        .map(|&p| p + field.eval(p))
        .collect();
    LandmarkSet::new(points).expect("finite field keeps landmarks finite")
}

/// Smooth band-limited test pattern: a seeded sum of plane waves per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    waves: Vec<[f64; 4]>,
}

impl Texture {
    pub fn new(seed: u64) -> Self {
        let mut rng = stream(seed, DOMAIN_SYNTH, STREAM_TEXTURE);
        let waves = (0..12)
            .map(|_| {
                let period = rng.random_range(24.0..160.0);
                let theta = rng.random_range(0.0..PI);
                let k = 2.0 * PI / period;
                [
                    k * libm::cos(theta),
                    k * libm::sin(theta),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.5..1.0),
                ]
            })
            .collect();
        Self { waves }
    }

    /// Intensity in `[0, 255]` at `p` for channel `c`.
    pub fn value(&self, p: Point2, channel: usize) -> f64 {
        let mut sum = 0.0;
        let mut norm = 0.0;
        for (i, [kx, ky, phase, amp]) in self.waves.iter().enumerate() {
            let shift = (channel as f64) * (1.0 + i as f64) * 0.7;
            sum += amp * libm::sin(kx * p.x + ky * p.y + phase + shift);
            norm += amp;
        }
        127.5 + 127.5 * sum / norm
    }

    /// Renders the pattern sampled at `p + field(p)` (or `p` when `field` is `None`).
    pub fn render(
        &self,
        meta: ImageMeta,
        channels: u8,
        field: Option<&SyntheticField>,
    ) -> Result<ImageBuffer> {
        let w = meta.width as usize;
        let c = channels as usize;
        let rows = map_range(meta.height as usize, |y| {
            let mut row = Vec::with_capacity(w * c);
            for x in 0..w {
                let p = Point2::new(x as f64, y as f64);
                let q = field.map_or(p, |f| p + f.eval(p));
                for ch in 0..c {
                    row.push(libm::round(self.value(q, ch)).clamp(0.0, 255.0) as u8);
                }
            }
            row
        });
        ImageBuffer::new(meta, channels, rows.concat())
    }
}
