//! Local-consistency filter.
//!
//! Each round draws a spatially even subsample of matches, triangulates their
//! source positions and fits one affine map per triangle from its three
//! vertex correspondences. Every match covered by a triangle is then scored
//! by how far its actual destination lies from that triangle's prediction.
//! A sampled match is scored against the least-squares affine map of its
//! mesh neighbors instead, so it is not exempt in rounds that draw it.
//! Deviations accumulate over rounds; a match whose mean per-round deviation
//! exceeds the threshold is flagged.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::affine::{fit_affine, AffineTransform2D};
use crate::error::{Error, Result};
use crate::model::{ImageMeta, MatchPair, MatchSet, OutlierMask, Point2};
use crate::par::map_range;
use crate::rng::{stream, DOMAIN_LOCAL};
use crate::triangulation::{triangulate, TriangulationMesh};

/// Smallest match set the filter runs on, and the smallest per-round sample.
pub const MIN_MATCHES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviationThreshold {
    /// Absolute tolerance in pixels.
    Pixels(f64),
    /// Fraction of the image diagonal. Without image dimensions the diagonal
    /// of the bounding box of all match endpoints is used.
    DiagonalFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalAffineConfig {
    pub rounds: usize,
    pub sample_fraction: f64,
    pub threshold: DeviationThreshold,
    pub image: Option<ImageMeta>,
    pub seed: u64,
}

impl Default for LocalAffineConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            sample_fraction: 0.25,
            threshold: DeviationThreshold::DiagonalFraction(0.02),
            image: None,
            seed: 0,
        }
    }
}

impl LocalAffineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("local rounds must be at least 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::InvalidConfig("sample fraction must lie in (0, 1]"));
        }
        let t = match self.threshold {
            DeviationThreshold::Pixels(t) | DeviationThreshold::DiagonalFraction(t) => t,
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidConfig("deviation threshold must be positive"));
        }
        Ok(())
    }

    /// Threshold in pixels for this match set.
    pub fn threshold_px(&self, matches: &MatchSet) -> f64 {
        match self.threshold {
            DeviationThreshold::Pixels(px) => px,
            DeviationThreshold::DiagonalFraction(f) => {
                let diag = match self.image {
                    Some(meta) => meta.diagonal(),
                    None => endpoint_diagonal(matches),
                };
                f * diag
            }
        }
    }
}

fn endpoint_diagonal(matches: &MatchSet) -> f64 {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for m in matches.pairs() {
        for p in [m.src, m.dst] {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    if matches.is_empty() {
        return 1.0;
    }
    libm::hypot(hi.x - lo.x, hi.y - lo.y).max(1.0)
}

/// Accumulated deviation of one match over all sampling rounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalScore {
    /// Sum of per-round Euclidean deviations, in pixels.
    pub deviation: f64,
    /// Rounds in which a triangle covered the match.
    pub coverage: usize,
}

impl LocalScore {
    pub fn add_round(&mut self, deviation: Option<f64>) {
        if let Some(d) = deviation {
            self.deviation += d;
            self.coverage += 1;
        }
    }

    pub fn mean_deviation(&self) -> Option<f64> {
        (self.coverage > 0).then(|| self.deviation / self.coverage as f64)
    }
}

/// Spatially stratified sample of match indices.
///
/// The bounding box of the source points is cut into a `g x g` grid with
/// `g = ceil(sqrt(k))`, `k = max(8, ceil(fraction * n))`. Cells are visited in
/// a random order and each visit draws one remaining point uniformly from the
/// cell, until `k` points are chosen. Returned indices are sorted.
pub fn sample_points<R: Rng + ?Sized>(
    matches: &MatchSet,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    sample_points_within(matches, fraction, None, rng)
}

/// [`sample_points`] with the grid laid over the moving image `[0, w-1] x [0, h-1]`
/// instead of the point bounding box; points outside fall into the border cells.
pub fn sample_points_within<R: Rng + ?Sized>(
    matches: &MatchSet,
    fraction: f64,
    image: Option<ImageMeta>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = matches.len();
    if n < MIN_MATCHES {
        return Err(Error::TooFewMatches {
            needed: MIN_MATCHES,
            got: n,
        });
    }
    let target = (libm::ceil(fraction * n as f64) as usize).clamp(MIN_MATCHES, n);
    let grid = libm::ceil(libm::sqrt(target as f64)) as usize;

    let src: Vec<Point2> = matches.pairs().iter().map(|m| m.src).collect();
    let (lo, hi) = match image {
        Some(meta) => (
            Point2::new(0.0, 0.0),
            Point2::new((meta.width - 1) as f64, (meta.height - 1) as f64),
        ),
        None => src.iter().fold((src[0], src[0]), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }),
    };
    let cell_of = |v: f64, lo: f64, hi: f64| -> usize {
        if hi > lo {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            ((t * grid as f64) as usize).min(grid - 1)
        } else {
            0
        }
    };
    let mut cells: Vec<Vec<usize>> = alloc::vec![Vec::new(); grid * grid];
    for (i, p) in src.iter().enumerate() {
        let c = cell_of(p.y, lo.y, hi.y) * grid + cell_of(p.x, lo.x, hi.x);
        cells[c].push(i);
    }
    let mut visit: Vec<usize> = (0..cells.len()).filter(|&c| !cells[c].is_empty()).collect();
    visit.shuffle(rng);

    let mut chosen = Vec::with_capacity(target);
    while chosen.len() < target {
        for &c in &visit {
            if chosen.len() == target {
                break;
            }
            let bucket = &mut cells[c];
            if bucket.is_empty() {
                continue;
            }
            let pick = rng.random_range(0..bucket.len());
            chosen.push(bucket.swap_remove(pick));
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Mesh over sampled source points with one affine map per triangle.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub mesh: TriangulationMesh,
    pub transforms: Vec<AffineTransform2D>,
}

impl LocalModel {
    /// Triangulates `matches[sample].src` and fits each triangle exactly from
    /// its vertices' correspondences.
    pub fn build(matches: &[MatchPair], sample: &[usize]) -> Result<Self> {
        let src: Vec<Point2> = sample.iter().map(|&i| matches[i].src).collect();
        let mesh = triangulate(&src)?;
        let transforms = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let s = tri.map(|v| matches[sample[v]].src);
                let d = tri.map(|v| matches[sample[v]].dst);
                fit_affine(&s, &d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, transforms })
    }

    pub fn predict(&self, pair: &MatchPair) -> Option<Point2> {
        predict(pair, &self.mesh, &self.transforms)
    }
}

/// Destination predicted for `pair.src` by the lowest-indexed covering triangle.
pub fn predict(
    pair: &MatchPair,
    mesh: &TriangulationMesh,
    per_triangle: &[AffineTransform2D],
) -> Option<Point2> {
    mesh.locate(pair.src).map(|t| per_triangle[t].apply(pair.src))
}

/// Deviation of every match from the local affine prediction for one sample.
///
/// Unsampled matches are predicted by their covering triangle (`None` when
/// no triangle covers them). A sampled match is predicted by the
/// least-squares affine map of its Delaunay neighbors, since its own
/// triangles reproduce it exactly; `None` when the neighbors are degenerate.
pub fn round_deviations(matches: &MatchSet, sample: &[usize]) -> Result<Vec<Option<f64>>> {
    let pairs = matches.pairs();
    let model = LocalModel::build(pairs, sample)?;
    let mut devs: Vec<Option<f64>> = pairs
        .iter()
        .map(|m| model.predict(m).map(|p| p.distance(&m.dst)))
        .collect();
    let mut ring: Vec<Vec<usize>> = alloc::vec![Vec::new(); sample.len()];
    for tri in model.mesh.triangles() {
        for k in 0..3 {
            for j in 1..3 {
                ring[tri[k]].push(tri[(k + j) % 3]);
            }
        }
    }
    for (v, neighbors) in ring.iter_mut().enumerate() {
        neighbors.sort_unstable();
        neighbors.dedup();
        let src: Vec<Point2> = neighbors.iter().map(|&u| pairs[sample[u]].src).collect();
        let dst: Vec<Point2> = neighbors.iter().map(|&u| pairs[sample[u]].dst).collect();
        let m = &pairs[sample[v]];
        devs[sample[v]] = fit_affine(&src, &dst)
            .ok()
            .map(|t| t.apply(m.src).distance(&m.dst));
    }
    Ok(devs)
}

/// Accumulated local deviation for every match over `cfg.rounds` rounds.
///
/// Round `r` draws from its own stream `(seed, r)`; a round whose sample is
/// degenerate (collinear) contributes nothing.
pub fn score_matches(matches: &MatchSet, cfg: &LocalAffineConfig) -> Result<Vec<LocalScore>> {
    cfg.validate()?;
    if matches.len() < MIN_MATCHES {
        return Err(Error::TooFewMatches {
            needed: MIN_MATCHES,
            got: matches.len(),
        });
    }
    let rounds = map_range(cfg.rounds, |r| {
        let mut rng = stream(cfg.seed, DOMAIN_LOCAL, r as u64);
        let sample = sample_points_within(matches, cfg.sample_fraction, cfg.image, &mut rng)?;
        match round_deviations(matches, &sample) {
            Ok(d) => Ok(Some(d)),
            Err(Error::DegenerateGeometry) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut scores = alloc::vec![LocalScore::default(); matches.len()];
    for round in rounds {
        if let Some(devs) = round? {
            for (s, d) in scores.iter_mut().zip(devs) {
                s.add_round(d);
            }
        }
    }
    Ok(scores)
}

/// Flags matches whose mean per-round deviation exceeds the threshold.
///
/// Sets smaller than [`MIN_MATCHES`] pass unflagged; uncovered matches are
/// never flagged. Mask scores are mean deviations in pixels (0 if uncovered).
pub fn filter_local(matches: &MatchSet, cfg: &LocalAffineConfig) -> Result<OutlierMask> {
    cfg.validate()?;
    if matches.len() < MIN_MATCHES {
        return Ok(OutlierMask::clean(matches.len()));
    }
    let threshold = cfg.threshold_px(matches);
    let scores = score_matches(matches, cfg)?;
    let means: Vec<f64> = scores
        .iter()
        .map(|s| s.mean_deviation().unwrap_or(0.0))
        .collect();
    let flags = scores
        .iter()
        .map(|s| s.mean_deviation().is_some_and(|m| m > threshold))
        .collect();
    Ok(OutlierMask {
        flags,
        scores: means,
    })
}
