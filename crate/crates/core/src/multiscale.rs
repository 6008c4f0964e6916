//! Coarse-to-fine matching with fixed-size crops.
//!
//! Level 0 shows the matcher each whole image resampled into a
//! `crop_size`-pixel square. Every further level halves the scale and crops
//! around the current match estimates, until a level reaches native
//! resolution (scale <= 1). Matches from each level are mapped back to
//! full-resolution coordinates, merged with the carried matches and refined.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Display;

use crate::error::{Error, Result};
use crate::model::{ImageBuffer, ImageMeta, MatchPair, MatchSet, Point2};
use crate::refinery::{refine, RefineConfig, RefineReport};
use crate::warp::{bilinear_value, to_u8};

pub const CROP_SIZE: u32 = 256;

/// A square window into a full-resolution image.
///
/// `origin` is the top-left corner in full-resolution pixels and `scale`
/// the number of full-resolution pixels per crop pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    pub origin: Point2,
    pub scale: f64,
    pub size: u32,
}

impl CropWindow {
    pub fn to_local(&self, p: Point2) -> Point2 {
        to_local(p, self)
    }

    pub fn to_global(&self, p: Point2) -> Point2 {
        to_global(p, self)
    }

    /// Crop dimensions for an image of size `meta`: `size` on each axis,
    /// or less when the image is narrower than the window.
    pub fn extent(&self, meta: ImageMeta) -> (u32, u32) {
        let fit = |len: u32| {
            let n = libm::ceil((len as f64 - 1e-9) / self.scale) as u32;
            n.clamp(1, self.size)
        };
        (fit(meta.width), fit(meta.height))
    }

    /// Whether `p` lies inside the window, at least `margin` crop pixels from its edges.
    pub fn contains(&self, p: Point2, meta: ImageMeta, margin: f64) -> bool {
        let q = self.to_local(p);
        let (w, h) = self.extent(meta);
        q.x >= margin && q.y >= margin && q.x <= w as f64 - margin && q.y <= h as f64 - margin
    }
}

pub fn to_local(p: Point2, win: &CropWindow) -> Point2 {
    Point2::new(
        (p.x - win.origin.x) / win.scale,
        (p.y - win.origin.y) / win.scale,
    )
}

pub fn to_global(p: Point2, win: &CropWindow) -> Point2 {
    Point2::new(
        win.origin.x + p.x * win.scale,
        win.origin.y + p.y * win.scale,
    )
}

/// Full-image window at level 0.
pub fn base_scale(meta: ImageMeta, size: u32) -> f64 {
    meta.width.max(meta.height) as f64 / size as f64
}

fn window_around(center: Point2, meta: ImageMeta, level: u32, size: u32) -> CropWindow {
    let scale = base_scale(meta, size) / libm::pow(2.0, level as f64);
    if level == 0 {
        return CropWindow {
            origin: Point2::new(0.0, 0.0),
            scale,
            size,
        };
    }
    let span = size as f64 * scale;
    let clamp = |c: f64, len: u32| (c - span / 2.0).clamp(0.0, (len as f64 - span).max(0.0));
    CropWindow {
        origin: Point2::new(clamp(center.x, meta.width), clamp(center.y, meta.height)),
        scale,
        size,
    }
}

/// Windows for `level` around `estimate` (src in image `a`, dst in image `b`).
pub fn schedule(
    estimate: &MatchPair,
    level: u32,
    a: ImageMeta,
    b: ImageMeta,
) -> (CropWindow, CropWindow) {
    schedule_sized(estimate, level, a, b, CROP_SIZE)
}

pub fn schedule_sized(
    estimate: &MatchPair,
    level: u32,
    a: ImageMeta,
    b: ImageMeta,
    size: u32,
) -> (CropWindow, CropWindow) {
    (
        window_around(estimate.src, a, level, size),
        window_around(estimate.dst, b, level, size),
    )
}

/// Number of levels: keep halving until both images reach scale <= 1.
pub fn level_count(a: ImageMeta, b: ImageMeta, size: u32) -> u32 {
    let mut s = base_scale(a, size).max(base_scale(b, size));
    let mut n = 1;
    while s > 1.0 {
        s /= 2.0;
        n += 1;
    }
    n
}

/// Resamples the window's region of `img` into a crop.
pub fn extract_crop(img: &ImageBuffer, win: &CropWindow) -> ImageBuffer {
    let (w, h) = win.extent(img.meta());
    let ch = img.channels() as usize;
    let mut px = Vec::with_capacity(w as usize * h as usize * ch);
    for y in 0..h {
        for x in 0..w {
            let p = win.to_global(Point2::new(x as f64, y as f64));
            for c in 0..ch {
                px.push(to_u8(bilinear_value(img, p, c)));
            }
        }
    }
    let meta = ImageMeta::new(w, h).expect("extent is at least 1x1");
    ImageBuffer::new(meta, img.channels(), px).expect("buffer sized from extent")
}

/// One matcher invocation: two crops and the windows they came from.
#[derive(Debug, Clone)]
pub struct CropRequest {
    pub level: u32,
    pub a: ImageBuffer,
    pub b: ImageBuffer,
    pub window_a: CropWindow,
    pub window_b: CropWindow,
}

/// Produces matches between two crops, in crop pixel coordinates
/// (`src` in crop `a`, `dst` in crop `b`).
pub trait Matcher {
    type Error: Display;
    fn match_crops(&mut self, request: &CropRequest) -> core::result::Result<MatchSet, Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidConfig {
    pub refine: RefineConfig,
    pub crop_size: u32,
    /// Upper bound on the number of levels; `None` runs to native resolution.
    pub max_levels: Option<u32>,
    /// Minimum distance (crop pixels) from an estimate to its window's edge.
    pub margin: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            refine: RefineConfig::default(),
            crop_size: CROP_SIZE,
            max_levels: None,
            margin: CROP_SIZE as f64 / 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelStatus {
    Matched { crops: usize, returned: usize },
    /// A matcher call failed; the previous level's matches were carried forward.
    Skipped { crop: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: u32,
    /// Scale of image `a` at this level.
    pub scale: f64,
    pub status: LevelStatus,
    pub refine: Option<RefineReport>,
    /// Matches carried out of this level.
    pub matches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidOutcome {
    pub matches: MatchSet,
    pub levels: Vec<LevelReport>,
}

/// Runs the matcher level by level and returns full-resolution refined matches.
///
/// A failing matcher at level 0 is fatal ([`Error::MatcherUnavailable`]);
/// at later levels the whole level is skipped.
pub fn run_pyramid<M: Matcher>(
    a: &ImageBuffer,
    b: &ImageBuffer,
    matcher: &mut M,
    cfg: &PyramidConfig,
) -> Result<PyramidOutcome> {
    if cfg.crop_size == 0 {
        return Err(Error::InvalidConfig("crop size must be >= 1"));
    }
    let (ma, mb) = (a.meta(), b.meta());
    let mut refine_cfg = cfg.refine.clone();
    refine_cfg.local.image.get_or_insert(ma);
    let mut levels_total = level_count(ma, mb, cfg.crop_size);
    if let Some(cap) = cfg.max_levels {
        levels_total = levels_total.min(cap.max(1));
    }

    let mut carried = MatchSet::new();
    let mut levels = Vec::new();
    for level in 0..levels_total {
        let windows = plan_windows(&carried, level, ma, mb, cfg);
        let mut found: Vec<MatchSet> = Vec::with_capacity(windows.len());
        let mut failure = None;
        for (i, &(wa, wb)) in windows.iter().enumerate() {
            let request = CropRequest {
                level,
                a: extract_crop(a, &wa),
                b: extract_crop(b, &wb),
                window_a: wa,
                window_b: wb,
            };
            match matcher.match_crops(&request) {
                Ok(set) => found.push(lift(&set, &wa, &wb)),
                Err(e) => {
                    failure = Some((i, e.to_string()));
                    break;
                }
            }
        }
        let scale = base_scale(ma, cfg.crop_size) / libm::pow(2.0, level as f64);
        if let Some((crop, reason)) = failure {
            if level == 0 {
                return Err(Error::MatcherUnavailable);
            }
            levels.push(LevelReport {
                level,
                scale,
                status: LevelStatus::Skipped { crop, reason },
                refine: None,
                matches: carried.len(),
            });
            continue;
        }
        let returned = found.iter().map(MatchSet::len).sum();
        // Finer matches first so deduplication keeps them over carried ones.
        found.push(carried);
        let (refined, report) = refine(&found, &refine_cfg)?;
        carried = refined;
        levels.push(LevelReport {
            level,
            scale,
            status: LevelStatus::Matched {
                crops: windows.len(),
                returned,
            },
            refine: Some(report),
            matches: carried.len(),
        });
    }
    Ok(PyramidOutcome {
        matches: carried,
        levels,
    })
}

/// Level 0: the two full-image windows. Later levels group estimates by the
/// lattice cell (spacing `(size - 2 margin) * scale`) of their src and of
/// their dst, and center one window pair on each occupied cell pair, so every
/// estimate lies at least `margin` crop pixels inside its windows (unless the
/// window was clamped against the image border). Pairs keep first-seen order.
fn plan_windows(
    carried: &MatchSet,
    level: u32,
    a: ImageMeta,
    b: ImageMeta,
    cfg: &PyramidConfig,
) -> Vec<(CropWindow, CropWindow)> {
    let size = cfg.crop_size;
    if level == 0 {
        let origin = MatchPair::new(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0));
        return alloc::vec![schedule_sized(&origin, 0, a, b, size)];
    }
    let inner = (size as f64 - 2.0 * cfg.margin).max(1.0);
    let level_scale = |m: ImageMeta| base_scale(m, size) / libm::pow(2.0, level as f64);
    let (step_a, step_b) = (inner * level_scale(a), inner * level_scale(b));
    let cell = |p: Point2, step: f64| {
        (
            libm::floor(p.x / step) as i64,
            libm::floor(p.y / step) as i64,
        )
    };
    let center = |c: (i64, i64), step: f64| {
        Point2::new((c.0 as f64 + 0.5) * step, (c.1 as f64 + 0.5) * step)
    };
    let mut seen = BTreeSet::new();
    let mut windows = Vec::new();
    for m in carried.pairs() {
        let key = (cell(m.src, step_a), cell(m.dst, step_b));
        if seen.insert(key) {
            let anchor = MatchPair::new(center(key.0, step_a), center(key.1, step_b));
            windows.push(schedule_sized(&anchor, level, a, b, size));
        }
    }
    windows
}

fn lift(set: &MatchSet, wa: &CropWindow, wb: &CropWindow) -> MatchSet {
    let mut out = MatchSet::with_capacity(set.len());
    for (m, tag) in set.iter() {
        out.push(MatchPair::new(wa.to_global(m.src), wb.to_global(m.dst)), tag);
    }
    out
}
