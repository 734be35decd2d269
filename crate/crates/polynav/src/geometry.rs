//! Convex polygon representations and Minkowski operations.
//!
//! Everything here works in 2D with counterclockwise vertex order. Half-space
//! rows are always normalized to unit outward normals so that offsets, dual
//! variables and big-M margins all carry consistent length units.

use nalgebra::Vector2;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Tolerance for geometric coincidence (duplicate vertices, unit-norm checks).
pub const COINCIDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: fewer than three distinct non-collinear points")]
    DegenerateInput,
    #[error("half-space set is unbounded")]
    UnboundedSet,
    #[error("half-space set is empty")]
    EmptySet,
    #[error("vertex list is not strictly convex in counterclockwise order")]
    NotConvex,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Convex polygon in vertex representation, counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    vertices: Vec<Vec2>,
}

impl VPolytope {
    /// Validates convexity, orientation and vertex distinctness.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegenerateInput);
        }
        for v in &vertices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(GeometryError::DegenerateInput);
            }
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if (vertices[i] - vertices[j]).norm() <= COINCIDENCE_TOL {
                    return Err(GeometryError::DegenerateInput);
                }
            }
        }
        for i in 0..n {
            let e0 = vertices[(i + 1) % n] - vertices[i];
            let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            if cross(e0, e1) <= 0.0 {
                return Err(GeometryError::NotConvex);
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn translate(&self, t: Vec2) -> VPolytope {
        VPolytope {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
        }
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Largest distance from the origin to a vertex.
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Convex polygon in half-space representation `A y <= b` with unit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
}

impl HPolytope {
    pub fn new(normals: Vec<Vec2>, offsets: Vec<f64>) -> Result<Self, GeometryError> {
        if normals.len() != offsets.len() || normals.is_empty() {
            return Err(GeometryError::DegenerateInput);
        }
        for n in &normals {
            if (n.norm() - 1.0).abs() > COINCIDENCE_TOL {
                return Err(GeometryError::DegenerateInput);
            }
        }
        Ok(Self { normals, offsets })
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Membership test `A y <= b + tol` componentwise.
pub fn contains(p: &HPolytope, y: Vec2, tol: f64) -> bool {
    p.normals
        .iter()
        .zip(&p.offsets)
        .all(|(n, b)| n.dot(&y) <= b + tol)
}

/// Minimal counterclockwise hull via the monotone chain algorithm.
pub fn convex_hull(points: &[Vec2]) -> Result<VPolytope, GeometryError> {
    let mut pts: Vec<Vec2> = Vec::new();
    for &p in points {
        if !pts.iter().any(|q| (q - p).norm() <= COINCIDENCE_TOL) {
            pts.push(p);
        }
    }
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateInput);
    }
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());

    let turn_eps = 1e-12;
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 {
            let a = lower[lower.len() - 2];
            let b = lower[lower.len() - 1];
            if cross(b - a, p - b) <= turn_eps {
                lower.pop();
            } else {
                break;
            }
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 {
            let a = upper[upper.len() - 2];
            let b = upper[upper.len() - 1];
            if cross(b - a, p - b) <= turn_eps {
                upper.pop();
            } else {
                break;
            }
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    VPolytope::new(lower).map_err(|_| GeometryError::DegenerateInput)
}

/// One half-space row per edge, outward unit normals, edge `i` runs from
/// vertex `i` to vertex `i+1`.
pub fn v_to_h(p: &VPolytope) -> HPolytope {
    let vs = p.vertices();
    let n = vs.len();
    let mut normals = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let e = vs[(i + 1) % n] - vs[i];
        let outward = Vec2::new(e.y, -e.x).normalize();
        normals.push(outward);
        offsets.push(outward.dot(&vs[i]));
    }
    HPolytope { normals, offsets }
}

/// Recovers vertices as intersections of constraint pairs feasible for all rows.
pub fn h_to_v(p: &HPolytope) -> Result<VPolytope, GeometryError> {
    // Recession check: a cyclic angular gap of >= pi between outward normals
    // admits an unbounded direction.
    let mut angles: Vec<f64> = p.normals.iter().map(|n| n.y.atan2(n.x)).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = angles.len();
    let mut unbounded = m < 3;
    for i in 0..m {
        let gap = if i + 1 < m {
            angles[i + 1] - angles[i]
        } else {
            angles[0] + 2.0 * std::f64::consts::PI - angles[m - 1]
        };
        if gap >= std::f64::consts::PI - 1e-12 {
            unbounded = true;
        }
    }
    // Near-opposite rows with incompatible offsets give a cheap emptiness
    // certificate even when the recession check trips.
    for i in 0..m {
        for j in (i + 1)..m {
            if (p.normals[i] + p.normals[j]).norm() <= 1e-9
                && p.offsets[i] + p.offsets[j] < -1e-12
            {
                return Err(GeometryError::EmptySet);
            }
        }
    }
    if unbounded {
        return Err(GeometryError::UnboundedSet);
    }

    let ell = p.len();
    let mut candidates: Vec<Vec2> = Vec::new();
    for i in 0..ell {
        for j in (i + 1)..ell {
            let (ni, nj) = (p.normals[i], p.normals[j]);
            let det = cross(ni, nj);
            if det.abs() < 1e-12 {
                continue;
            }
            let (bi, bj) = (p.offsets[i], p.offsets[j]);
            let y = Vec2::new(
                (bi * nj.y - bj * ni.y) / det,
                (bj * ni.x - bi * nj.x) / det,
            );
            if contains(p, y, 1e-7) {
                candidates.push(y);
            }
        }
    }
    if candidates.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    convex_hull(&candidates).map_err(|_| GeometryError::EmptySet)
}

/// Point reflection through the origin; central symmetry preserves CCW order.
pub fn reflect(p: &VPolytope) -> VPolytope {
    VPolytope {
        vertices: p.vertices.iter().map(|v| -v).collect(),
    }
}

/// Hull of all pairwise vertex sums.
pub fn minkowski_sum(p: &VPolytope, q: &VPolytope) -> VPolytope {
    let mut sums = Vec::with_capacity(p.len() * q.len());
    for a in p.vertices() {
        for b in q.vertices() {
            sums.push(a + b);
        }
    }
    convex_hull(&sums).expect("Minkowski sum of valid polygons is a valid polygon")
}

/// Configuration obstacle: the obstacle inflated by the reflected robot,
/// stored at robot position p = 0. Translated offsets are `b0 - A p`.
#[derive(Debug, Clone)]
pub struct ConfigObstacle {
    normals: Vec<Vec2>,
    offsets0: Vec<f64>,
    shape0: VPolytope,
    source: usize,
}

impl ConfigObstacle {
    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets0(&self) -> &[f64] {
        &self.offsets0
    }

    /// Offsets of the CO seen from robot position `p`.
    pub fn offsets_at(&self, p: Vec2) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.offsets0)
            .map(|(a, b0)| b0 - a.dot(&p))
            .collect()
    }

    /// CO polygon at robot position 0; at position `p` the set is this
    /// polygon translated by `-p`.
    pub fn shape0(&self) -> &VPolytope {
        &self.shape0
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn as_hpolytope(&self) -> HPolytope {
        HPolytope {
            normals: self.normals.clone(),
            offsets: self.offsets0.clone(),
        }
    }

    /// True iff the robot placed at `p` overlaps the source obstacle.
    pub fn collides_at(&self, p: Vec2, tol: f64) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets0)
            .all(|(a, b0)| a.dot(&p) <= b0 + tol)
    }
}

/// Wraps an already-inflated polygon as a configuration obstacle. Useful when
/// the CO geometry is known directly, e.g. in tests.
pub fn configuration_obstacle_from_shape(shape: VPolytope, source: usize) -> ConfigObstacle {
    let h = v_to_h(&shape);
    ConfigObstacle {
        normals: h.normals,
        offsets0: h.offsets,
        shape0: shape,
        source,
    }
}

/// Builds the CO of an obstacle for a robot body authored relative to its
/// position reference point.
pub fn configuration_obstacle(
    robot_shape_at_origin: &VPolytope,
    obstacle: &VPolytope,
    source: usize,
) -> ConfigObstacle {
    let shape0 = minkowski_sum(obstacle, &reflect(robot_shape_at_origin));
    let h = v_to_h(&shape0);
    ConfigObstacle {
        normals: h.normals,
        offsets0: h.offsets,
        shape0,
        source,
    }
}

/// Where the closest boundary point of a polygon sits relative to a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosestFeature {
    /// Closest point is vertex `i`; active edges are `i-1` and `i`.
    Vertex(usize),
    /// Closest point lies strictly inside edge `i` (from vertex i to i+1).
    Edge(usize),
    /// Query point is inside the polygon.
    Inside,
}

/// Closest point on the polygon (boundary or interior) to `p`, with the
/// feature that attains it. Inside points return themselves.
pub fn closest_point_on_polygon(poly: &VPolytope, p: Vec2) -> (Vec2, ClosestFeature) {
    let vs = poly.vertices();
    let n = vs.len();
    let inside = (0..n).all(|i| cross(vs[(i + 1) % n] - vs[i], p - vs[i]) >= 0.0);
    if inside {
        return (p, ClosestFeature::Inside);
    }
    let mut best_d2 = f64::INFINITY;
    let mut best_q = vs[0];
    let mut best_edge = 0usize;
    let mut best_t = 0.0f64;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        let e = b - a;
        let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        let q = a + e * t;
        let d2 = (p - q).norm_squared();
        if d2 < best_d2 - 1e-18 {
            best_d2 = d2;
            best_q = q;
            best_edge = i;
            best_t = t;
        }
    }
    let feature_tol = 1e-9;
    let feature = if best_t <= feature_tol {
        ClosestFeature::Vertex(best_edge)
    } else if best_t >= 1.0 - feature_tol {
        ClosestFeature::Vertex((best_edge + 1) % n)
    } else {
        ClosestFeature::Edge(best_edge)
    };
    (best_q, feature)
}

/// Nearest point of the polygon boundary to `p` (any side), with distance.
pub fn closest_boundary_point(poly: &VPolytope, p: Vec2) -> (Vec2, f64) {
    let vs = poly.vertices();
    let n = vs.len();
    let mut best = f64::INFINITY;
    let mut best_q = vs[0];
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        let e = b - a;
        let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        let q = a + e * t;
        let d = (p - q).norm();
        if d < best {
            best = d;
            best_q = q;
        }
    }
    (best_q, best)
}

/// Distance from `p` to the polygon boundary, regardless of side.
pub fn boundary_distance(poly: &VPolytope, p: Vec2) -> f64 {
    closest_boundary_point(poly, p).1
}

fn polygons_intersect(p: &VPolytope, q: &VPolytope) -> bool {
    // Separating axis over both edge-normal sets; exact for convex polygons.
    for (first, second) in [(p, q), (q, p)] {
        let h = v_to_h(first);
        for (n, b) in h.normals.iter().zip(&h.offsets) {
            let min_proj = second
                .vertices()
                .iter()
                .map(|v| n.dot(v))
                .fold(f64::INFINITY, f64::min);
            if min_proj > *b {
                return false;
            }
        }
    }
    true
}

/// Exact minimum distance between two convex polygons by brute force over
/// vertex-to-boundary feature pairs; 0 if the polygons intersect.
pub fn polygon_distance_oracle(p: &VPolytope, q: &VPolytope) -> f64 {
    if polygons_intersect(p, q) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for v in p.vertices() {
        best = best.min(boundary_distance(q, *v));
    }
    for v in q.vertices() {
        best = best.min(boundary_distance(p, *v));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn square(lo: f64, hi: f64) -> VPolytope {
        VPolytope::new(vec![v(lo, lo), v(hi, lo), v(hi, hi), v(lo, hi)]).unwrap()
    }

    fn same_vertex_set(a: &VPolytope, b: &VPolytope, tol: f64) -> bool {
        a.len() == b.len()
            && a.vertices()
                .iter()
                .all(|p| b.vertices().iter().any(|q| (p - q).norm() <= tol))
    }

    #[test]
    fn hull_removes_interior_point() {
        let h = convex_hull(&[v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0), v(0.2, 0.2)]).unwrap();
        assert_eq!(h.len(), 3);
        let tri = VPolytope::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)]).unwrap();
        assert!(same_vertex_set(&h, &tri, 1e-12));
    }

    #[test]
    fn hull_of_shuffled_square() {
        let h = convex_hull(&[v(1.0, 1.0), v(0.0, 0.0), v(0.0, 1.0), v(1.0, 0.0)]).unwrap();
        assert!(same_vertex_set(&h, &square(0.0, 1.0), 1e-12));
    }

    #[test]
    fn hull_rejects_collinear() {
        let r = convex_hull(&[v(0.0, 0.0), v(1.0, 1.0), v(2.0, 2.0), v(3.0, 3.0)]);
        assert_eq!(r.unwrap_err(), GeometryError::DegenerateInput);
    }

    #[test]
    fn v_to_h_unit_square() {
        let h = v_to_h(&square(0.0, 1.0));
        assert_eq!(h.len(), 4);
        for n in h.normals() {
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-12);
        }
        // axis-aligned rows with offsets 0/1
        let mut seen = vec![false; 4];
        for (n, b) in h.normals().iter().zip(h.offsets()) {
            if (n - v(1.0, 0.0)).norm() < 1e-12 {
                assert_abs_diff_eq!(*b, 1.0, epsilon = 1e-12);
                seen[0] = true;
            } else if (n - v(-1.0, 0.0)).norm() < 1e-12 {
                assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-12);
                seen[1] = true;
            } else if (n - v(0.0, 1.0)).norm() < 1e-12 {
                assert_abs_diff_eq!(*b, 1.0, epsilon = 1e-12);
                seen[2] = true;
            } else if (n - v(0.0, -1.0)).norm() < 1e-12 {
                assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-12);
                seen[3] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn v_to_h_triangle_hypotenuse() {
        let tri = VPolytope::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)]).unwrap();
        let h = v_to_h(&tri);
        let s = 1.0 / 2.0_f64.sqrt();
        let found = h
            .normals()
            .iter()
            .zip(h.offsets())
            .any(|(n, b)| (n - v(s, s)).norm() < 1e-12 && (b - s).abs() < 1e-12);
        assert!(found);
    }

    #[test]
    fn h_to_v_round_trip() {
        let p = VPolytope::new(vec![
            v(0.0, 0.0),
            v(2.0, -0.5),
            v(3.0, 1.0),
            v(1.5, 2.5),
            v(0.2, 1.8),
        ])
        .unwrap();
        let back = h_to_v(&v_to_h(&p)).unwrap();
        assert!(same_vertex_set(&p, &back, 1e-9));
    }

    #[test]
    fn h_to_v_unbounded_and_empty() {
        let unb = HPolytope::new(vec![v(1.0, 0.0), v(0.0, 1.0)], vec![1.0, 1.0]).unwrap();
        assert_eq!(h_to_v(&unb).unwrap_err(), GeometryError::UnboundedSet);
        let empty = HPolytope::new(
            vec![v(1.0, 0.0), v(-1.0, 0.0), v(0.0, 1.0), v(0.0, -1.0)],
            vec![0.0, -1.0, 1.0, 0.0],
        )
        .unwrap();
        assert_eq!(h_to_v(&empty).unwrap_err(), GeometryError::EmptySet);
    }

    #[test]
    fn reflect_examples() {
        let tri = VPolytope::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)]).unwrap();
        let r = reflect(&tri);
        let want = VPolytope::new(vec![v(0.0, 0.0), v(-1.0, 0.0), v(0.0, -1.0)]).unwrap();
        assert!(same_vertex_set(&r, &want, 1e-12));
        let sq = square(-1.0, 1.0);
        assert!(same_vertex_set(&reflect(&sq), &sq, 1e-12));
        assert!(same_vertex_set(&reflect(&reflect(&tri)), &tri, 1e-12));
    }

    #[test]
    fn minkowski_boxes_add_intervals() {
        let a = square(-0.5, 0.5);
        let b = square(0.0, 1.0);
        let s = minkowski_sum(&a, &b);
        assert!(same_vertex_set(&s, &square(-0.5, 1.5), 1e-12));
    }

    #[test]
    fn minkowski_square_plus_triangle_pentagon() {
        let sq = square(2.0, 3.0);
        let tri = VPolytope::new(vec![v(0.0, 0.0), v(-1.0, 0.0), v(0.0, -1.0)]).unwrap();
        let s = minkowski_sum(&sq, &tri);
        let want = VPolytope::new(vec![
            v(1.0, 2.0),
            v(2.0, 1.0),
            v(3.0, 1.0),
            v(3.0, 3.0),
            v(1.0, 3.0),
        ])
        .unwrap();
        assert!(same_vertex_set(&s, &want, 1e-12));
    }

    #[test]
    fn minkowski_translation_equivariant() {
        let a = VPolytope::new(vec![v(0.0, 0.0), v(1.0, 0.2), v(0.4, 1.1)]).unwrap();
        let b = square(0.0, 1.0);
        let t = v(0.3, -0.7);
        let left = minkowski_sum(&a.translate(t), &b);
        let right = minkowski_sum(&a, &b).translate(t);
        assert!(same_vertex_set(&left, &right, 1e-9));
        // commutativity
        assert!(same_vertex_set(
            &minkowski_sum(&a, &b),
            &minkowski_sum(&b, &a),
            1e-9
        ));
    }

    #[test]
    fn config_obstacle_box_sum() {
        let robot = square(-0.5, 0.5);
        let obs = square(1.0, 2.0);
        let co = configuration_obstacle(&robot, &obs, 0);
        assert!(same_vertex_set(&co.shape0(), &square(0.5, 2.5), 1e-12));
        assert!(co.collides_at(v(1.5, 1.5), 0.0));
        assert!(!co.collides_at(v(0.0, 0.0), 0.0));
    }

    #[test]
    fn contains_examples() {
        let h = v_to_h(&square(0.0, 1.0));
        assert!(contains(&h, v(0.5, 0.5), 0.0));
        assert!(contains(&h, v(1.0, 1.0), 0.0));
        assert!(!contains(&h, v(1.1, 0.5), 0.0));
    }

    #[test]
    fn polygon_distance_examples() {
        let a = square(0.0, 1.0);
        let b = VPolytope::new(vec![v(2.0, 0.0), v(3.0, 0.0), v(3.0, 1.0), v(2.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(polygon_distance_oracle(&a, &b), 1.0, epsilon = 1e-12);
        let c = square(2.0, 3.0);
        assert_abs_diff_eq!(
            polygon_distance_oracle(&a, &c),
            2.0_f64.sqrt(),
            epsilon = 1e-12
        );
        let d = square(0.5, 1.5);
        assert_abs_diff_eq!(polygon_distance_oracle(&a, &d), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closest_point_features() {
        let sq = square(1.0, 2.0);
        let (q, f) = closest_point_on_polygon(&sq, v(0.0, 0.0));
        assert_abs_diff_eq!((q - v(1.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        assert!(matches!(f, ClosestFeature::Vertex(_)));
        let (q, f) = closest_point_on_polygon(&sq, v(0.0, 1.5));
        assert_abs_diff_eq!((q - v(1.0, 1.5)).norm(), 0.0, epsilon = 1e-12);
        assert!(matches!(f, ClosestFeature::Edge(_)));
        let (_, f) = closest_point_on_polygon(&sq, v(1.5, 1.5));
        assert_eq!(f, ClosestFeature::Inside);
    }
}
