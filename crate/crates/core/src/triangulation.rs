//! Delaunay meshes over sampled match positions and point location within them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Point2;

/// Triangles with area at or below this (px^2) are dropped.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

/// Triangulated point set. Triangles are counter-clockwise (in the `x` right,
/// `y` up sense) index triples into `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
}

/// Delaunay triangulation of `points`.
///
/// Points are fed to the triangulator in lexicographic `(x, y, index)` order,
/// which fixes how co-circular ties are resolved, and the output triangles are
/// sorted by that same rank so the mesh does not depend on input order.
pub fn triangulate(points: &[Point2]) -> Result<TriangulationMesh> {
    if points.len() < 3 || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateGeometry);
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
            .then(a.cmp(&b))
    });
    let sorted: Vec<delaunator::Point> = order
        .iter()
        .map(|&i| delaunator::Point {
            x: points[i].x,
            y: points[i].y,
        })
        .collect();
    let raw = delaunator::triangulate(&sorted);

    // Triangles in rank space, rotated so the lowest rank comes first.
    let mut ranked: Vec<[usize; 3]> = raw
        .triangles
        .chunks_exact(3)
        .filter_map(|t| {
            let (a, b, c) = (t[0], t[1], t[2]);
            let area2 = cross(points[order[a]], points[order[b]], points[order[c]]);
            if area2.abs() * 0.5 <= MIN_TRIANGLE_AREA {
                return None;
            }
            let tri = if area2 > 0.0 { [a, b, c] } else { [a, c, b] };
            let lo = (0..3).min_by_key(|&k| tri[k]).unwrap_or(0);
            Some([tri[lo], tri[(lo + 1) % 3], tri[(lo + 2) % 3]])
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::DegenerateGeometry);
    }
    ranked.sort_unstable();
    let triangles = ranked
        .into_iter()
        .map(|t| [order[t[0]], order[t[1]], order[t[2]]])
        .collect();
    Ok(TriangulationMesh {
        vertices: points.to_vec(),
        triangles,
    })
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

impl TriangulationMesh {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * cross(a, b, c)
    }

    /// Whether `p` lies inside or on the boundary of triangle `t`.
    pub fn contains(&self, t: usize, p: Point2) -> bool {
        let [a, b, c] = self.corners(t);
        [(a, b), (b, c), (c, a)].into_iter().all(|(u, v)| {
            let side = cross(u, v, p);
            // Relative slack keeps points on a shared edge inside both neighbors.
            side >= -1e-12 * u.distance(&v) * u.distance(&p)
        })
    }

    /// Lowest-indexed triangle covering `p`, if any.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        (0..self.triangles.len()).find(|&t| self.contains(t, p))
    }

    /// Returns `true` when no vertex lies strictly inside any triangle's circumcircle
    /// (up to a relative tolerance).
    pub fn is_delaunay(&self) -> bool {
        self.triangles.iter().all(|&[a, b, c]| {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            self.vertices.iter().enumerate().all(|(i, &p)| {
                i == a || i == b || i == c || !in_circumcircle(pa, pb, pc, p)
            })
        })
    }
}

fn in_circumcircle(a: Point2, b: Point2, c: Point2, p: Point2) -> bool {
    let (adx, ady) = (a.x - p.x, a.y - p.y);
    let (bdx, bdy) = (b.x - p.x, b.y - p.y);
    let (cdx, cdy) = (c.x - p.x, c.y - p.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx);
    let scale = (ad + bd + cd) * (ad + bd + cd).max(1.0);
    det > 1e-10 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn three_points_one_triangle() {
        let m = triangulate(&pts(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)])).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.area(0), 6.0);
    }

    #[test]
    fn square_two_triangles_share_diagonal() {
        let m = triangulate(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(m.triangles().len(), 2);
        let shared = m.triangles()[0]
            .iter()
            .filter(|v| m.triangles()[1].contains(v))
            .count();
        assert_eq!(shared, 2);
        assert!(m.triangles().iter().enumerate().all(|(t, _)| m.area(t) > 0.0));
    }

    #[test]
    fn collinear_is_degenerate() {
        assert_eq!(
            triangulate(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])),
            Err(Error::DegenerateGeometry)
        );
        assert_eq!(
            triangulate(&pts(&[(0.0, 0.0), (1.0, 1.0)])),
            Err(Error::DegenerateGeometry)
        );
    }

    #[test]
    fn locate_inside_boundary_and_outside() {
        let m = triangulate(&pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])).unwrap();
        assert!(m.locate(Point2::new(0.5, 1.5)).is_some());
        // vertex and edge points count as covered
        assert!(m.locate(Point2::new(0.0, 0.0)).is_some());
        assert!(m.locate(Point2::new(1.0, 0.0)).is_some());
        // diagonal point: covered by both, lowest index wins
        let on_diag = Point2::new(1.0, 1.0);
        let hits: Vec<_> = (0..2).filter(|&t| m.contains(t, on_diag)).collect();
        assert_eq!(hits.len(), 2);
        assert_eq!(m.locate(on_diag), Some(0));
        assert_eq!(m.locate(Point2::new(3.0, 1.0)), None);
    }

    #[test]
    fn mesh_independent_of_input_order() {
        let p = pts(&[
            (0.0, 0.0),
            (10.0, 1.0),
            (4.0, 9.0),
            (7.0, 3.0),
            (1.0, 6.0),
            (9.0, 8.0),
        ]);
        let a = triangulate(&p).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let q: Vec<_> = perm.iter().map(|&i| p[i]).collect();
        let b = triangulate(&q).unwrap();
        let as_points = |m: &TriangulationMesh| -> Vec<[(u64, u64); 3]> {
            (0..m.triangles().len())
                .map(|t| m.corners(t).map(|c| (c.x.to_bits(), c.y.to_bits())))
                .collect()
        };
        assert_eq!(as_points(&a), as_points(&b));
        assert!(a.is_delaunay());
    }
}
