//! Thin-plate spline interpolation of sparse match displacements.
//!
//! Control points are the fixed-image (`dst`) positions and the fitted
//! values are `src - dst`, so evaluating the spline at a fixed-image pixel
//! gives the pull displacement for that pixel.
//!
//! The linear system is assembled in a normalized frame (centered on the
//! control points' mean and divided by their largest absolute centered
//! coordinate) to keep it well scaled; the regularization weight is applied
//! on that frame's kernel diagonal. Accessors report everything in pixels.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::affine::AffineTransform2D;
use crate::error::{Error, Result};
use crate::model::{DisplacementVector, MatchSet, Point2};

/// Control points closer than this (pixels) are merged before fitting.
pub const MERGE_DISTANCE: f64 = 1e-6;
/// Above this many control points the fit uses an evenly strided subset.
pub const MAX_CONTROL_POINTS: usize = 10_000;
/// Pivot-ratio estimate above which the system counts as ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Regularization used when the requested one leaves the system ill-conditioned.
pub const FALLBACK_LAMBDA: f64 = 1e-3;

/// `U(r) = r^2 log r` from a squared distance, with `U(0) = 0`.
#[inline]
pub fn kernel_sq(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * libm::log(r2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpsModel {
    centers: Vec<Point2>,
    /// Normalized-frame control points.
    nodes: Vec<[f64; 2]>,
    /// Normalized-frame kernel weights, one `[wx, wy]` per node.
    weights: Vec<[f64; 2]>,
    /// Normalized-frame affine coefficients `[c, a_x, a_y]` per output component.
    poly: [[f64; 3]; 2],
    mean: [f64; 2],
    scale: f64,
    lambda: f64,
    requested_lambda: f64,
    subsampled: bool,
}

/// Fits a thin-plate spline to the displacements `src - dst` at `dst`.
///
/// Needs at least 3 distinct, non-collinear `dst` points after merging.
pub fn tps_fit(matches: &MatchSet, lambda: f64) -> Result<TpsModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig("lambda must be finite and >= 0"));
    }
    if matches.len() < 3 {
        return Err(Error::TooFewMatches {
            needed: 3,
            got: matches.len(),
        });
    }
    if matches.pairs().iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mut centers, mut values) = merge_controls(matches);
    if centers.len() < 3 {
        return Err(Error::TooFewMatches {
            needed: 3,
            got: centers.len(),
        });
    }
    let subsampled = centers.len() > MAX_CONTROL_POINTS;
    if subsampled {
        let n = centers.len();
        let keep: Vec<usize> = (0..MAX_CONTROL_POINTS)
            .map(|i| i * n / MAX_CONTROL_POINTS)
            .collect();
        centers = keep.iter().map(|&i| centers[i]).collect();
        values = keep.iter().map(|&i| values[i]).collect();
    }

    let n = centers.len() as f64;
    let mean = [
        centers.iter().map(|c| c.x).sum::<f64>() / n,
        centers.iter().map(|c| c.y).sum::<f64>() / n,
    ];
    let scale = centers
        .iter()
        .map(|c| (c.x - mean[0]).abs().max((c.y - mean[1]).abs()))
        .fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    let nodes: Vec<[f64; 2]> = centers
        .iter()
        .map(|c| [(c.x - mean[0]) / scale, (c.y - mean[1]) / scale])
        .collect();
    if collinear(&nodes) {
        return Err(Error::DegenerateGeometry);
    }

    let mut used = lambda;
    let (weights, poly) = match solve(&nodes, &values, lambda) {
        Some((sol, cond)) if cond <= CONDITION_LIMIT => sol,
        _ if lambda < FALLBACK_LAMBDA => {
            used = FALLBACK_LAMBDA;
            solve(&nodes, &values, FALLBACK_LAMBDA)
                .map(|(sol, _)| sol)
                .ok_or(Error::DegenerateGeometry)?
        }
        Some((sol, _)) => sol,
        None => return Err(Error::DegenerateGeometry),
    };

    Ok(TpsModel {
        centers,
        nodes,
        weights,
        poly,
        mean,
        scale,
        lambda: used,
        requested_lambda: lambda,
        subsampled,
    })
}

/// Groups `dst` points closer than [`MERGE_DISTANCE`] (to the group's first
/// member) and averages their displacements. Groups keep first-seen order.
fn merge_controls(matches: &MatchSet) -> (Vec<Point2>, Vec<[f64; 2]>) {
    let pairs = matches.pairs();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].dst.x.total_cmp(&pairs[b].dst.x).then(a.cmp(&b)));

    let mut group = alloc::vec![usize::MAX; pairs.len()];
    for (k, &i) in order.iter().enumerate() {
        if group[i] != usize::MAX {
            continue;
        }
        group[i] = i;
        for &j in &order[k + 1..] {
            if pairs[j].dst.x - pairs[i].dst.x >= MERGE_DISTANCE {
                break;
            }
            if group[j] == usize::MAX && pairs[i].dst.distance(&pairs[j].dst) < MERGE_DISTANCE {
                group[j] = i;
            }
        }
    }

    let mut slot = alloc::vec![usize::MAX; pairs.len()];
    let mut centers = Vec::new();
    let mut sums: Vec<([f64; 2], f64)> = Vec::new();
    for (i, m) in pairs.iter().enumerate() {
        let g = group[i];
        if slot[g] == usize::MAX {
            slot[g] = centers.len();
            centers.push(pairs[g].dst);
            sums.push(([0.0, 0.0], 0.0));
        }
        let s = &mut sums[slot[g]];
        s.0[0] += m.src.x - m.dst.x;
        s.0[1] += m.src.y - m.dst.y;
        s.1 += 1.0;
    }
    let values = sums.iter().map(|(v, c)| [v[0] / c, v[1] / c]).collect();
    (centers, values)
}

fn collinear(nodes: &[[f64; 2]]) -> bool {
    let n = nodes.len() as f64;
    let mx = nodes.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = nodes.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in nodes {
        let (x, y) = (p[0] - mx, p[1] - my);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    sxx * syy - sxy * sxy <= 1e-12 * (sxx + syy) * (sxx + syy)
}

type Solution = (Vec<[f64; 2]>, [[f64; 3]; 2]);

/// Solves `[K + lambda I, P; P^T, 0] [w; a] = [v; 0]` for both components.
/// Also returns the ratio of largest to smallest pivot magnitude.
fn solve(nodes: &[[f64; 2]], values: &[[f64; 2]], lambda: f64) -> Option<(Solution, f64)> {
    let n = nodes.len();
    let m = n + 3;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        for j in i + 1..n {
            let dx = nodes[i][0] - nodes[j][0];
            let dy = nodes[i][1] - nodes[j][1];
            let u = kernel_sq(dx * dx + dy * dy);
            a[(i, j)] = u;
            a[(j, i)] = u;
        }
        a[(i, i)] = lambda;
        let row = [1.0, nodes[i][0], nodes[i][1]];
        for (k, &v) in row.iter().enumerate() {
            a[(i, n + k)] = v;
            a[(n + k, i)] = v;
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(m, 2);
    for (i, v) in values.iter().enumerate() {
        rhs[(i, 0)] = v[0];
        rhs[(i, 1)] = v[1];
    }

    let lu = a.lu();
    let u = lu.u();
    let diag: DVector<f64> = u.diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let x = lu.solve(&rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let weights = (0..n).map(|i| [x[(i, 0)], x[(i, 1)]]).collect();
    let poly = [
        [x[(n, 0)], x[(n + 1, 0)], x[(n + 2, 0)]],
        [x[(n, 1)], x[(n + 1, 1)], x[(n + 2, 1)]],
    ];
    Some(((weights, poly), cond))
}

impl TpsModel {
    /// Displacement at `p` (pixels).
    pub fn eval(&self, p: Point2) -> DisplacementVector {
        let qx = (p.x - self.mean[0]) / self.scale;
        let qy = (p.y - self.mean[1]) / self.scale;
        let [px, py] = self.poly;
        let mut dx = px[0] + px[1] * qx + px[2] * qy;
        let mut dy = py[0] + py[1] * qx + py[2] * qy;
        for (c, w) in self.nodes.iter().zip(&self.weights) {
            let (ex, ey) = (qx - c[0], qy - c[1]);
            let u = kernel_sq(ex * ex + ey * ey);
            dx += w[0] * u;
            dy += w[1] * u;
        }
        DisplacementVector::new(dx, dy)
    }

    /// Control points actually used (fixed-image pixels).
    pub fn control_points(&self) -> &[Point2] {
        &self.centers
    }

    /// Kernel weights for `U(r) = r^2 log r` with `r` in pixels.
    pub fn kernel_weights(&self) -> Vec<[f64; 2]> {
        let s2 = self.scale * self.scale;
        self.weights.iter().map(|w| [w[0] / s2, w[1] / s2]).collect()
    }

    /// Affine part of the displacement in pixels, `d_affine(p) = L p + t`.
    pub fn displacement_affine(&self) -> AffineTransform2D {
        let s = self.scale;
        let [m0, m1] = self.mean;
        // Rescaling r inside U shifts the kernel sum by a constant
        // (side conditions cancel the rest); fold it into the translation.
        let log_s = libm::log(s);
        let shift = |k: usize| -> f64 {
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w[k] * (c[0] * c[0] + c[1] * c[1]))
                .sum::<f64>()
                * log_s
        };
        let row = |k: usize| -> ([f64; 2], f64) {
            let p = self.poly[k];
            let lin = [p[1] / s, p[2] / s];
            (lin, p[0] - lin[0] * m0 - lin[1] * m1 - shift(k))
        };
        let (lx, tx) = row(0);
        let (ly, ty) = row(1);
        AffineTransform2D::new([lx, ly], [tx, ty])
    }

    /// Affine part as the point mapping `p -> p + d_affine(p)`.
    pub fn affine(&self) -> AffineTransform2D {
        let d = self.displacement_affine();
        AffineTransform2D::new(
            [
                [1.0 + d.linear[0][0], d.linear[0][1]],
                [d.linear[1][0], 1.0 + d.linear[1][1]],
            ],
            d.translation,
        )
    }

    /// Regularization actually used.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether the ill-conditioning fallback replaced the requested lambda.
    pub fn used_fallback(&self) -> bool {
        self.lambda != self.requested_lambda
    }

    /// Whether the control points were thinned to [`MAX_CONTROL_POINTS`].
    pub fn subsampled(&self) -> bool {
        self.subsampled
    }

    /// Bending energy `8 pi w^T K w` summed over both components (pixel units).
    pub fn bending_energy(&self) -> f64 {
        let w = self.kernel_weights();
        let c = &self.centers;
        let mut e = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                let u = kernel_sq(c[i].distance_sq(&c[j]));
                e += u * (w[i][0] * w[j][0] + w[i][1] * w[j][1]);
            }
        }
        8.0 * PI * e
    }
}

/// Free-function form of [`TpsModel::eval`].
pub fn tps_eval(model: &TpsModel, p: Point2) -> DisplacementVector {
    model.eval(p)
}
