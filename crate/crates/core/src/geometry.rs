//! Convex polygons and exact intersection-over-union.
//!
//! Every [`Polygon`] is a validated convex ring stored counter-clockwise.
//! Clockwise input (the usual ICDAR quadrangle order) is reversed on
//! construction; non-convex or degenerate rings are rejected.
//! Intersections use Sutherland-Hodgman clipping against the convex clip
//! ring, which is exact up to floating-point rounding for convex inputs.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Consecutive vertices closer than this are considered coincident.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Intersections with less area than this are reported as empty.
pub const EMPTY_AREA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotates by `angle` radians (counter-clockwise) around `center`.
    pub fn rotate_about(self, center: Point, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        let d = self.sub(center);
        Point::new(center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box. Convenience constructor for rectangular annotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Aabb {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidBox { x_min, y_min, x_max, y_max });
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn to_polygon(&self) -> Polygon {
        // Already CCW, convex and non-degenerate by construction.
        Polygon {
            vertices: vec![
                Point::new(self.x_min, self.y_min),
                Point::new(self.x_max, self.y_min),
                Point::new(self.x_max, self.y_max),
                Point::new(self.x_min, self.y_max),
            ],
        }
    }
}

/// Convex polygon, counter-clockwise, at least three distinct vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.into_iter().map(Into::into).collect()
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Polygon::new(raw.into_iter().map(Point::from).collect()).map_err(serde::de::Error::custom)
    }
}

impl Polygon {
    /// Validates and normalizes a vertex ring.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].sub(vertices[(i + 1) % n]).norm() <= DEGENERACY_TOL {
                return Err(GeometryError::DuplicateVertex(i));
            }
        }
        let signed = signed_area(&vertices);
        if signed.abs() <= DEGENERACY_TOL {
            return Err(GeometryError::Degenerate);
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        if !is_convex_ccw(&vertices) {
            return Err(GeometryError::NotConvex);
        }
        Ok(Self { vertices })
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(coords.iter().copied().map(Point::from).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
            a2 += c;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in &self.vertices {
            b.x_min = b.x_min.min(p.x);
            b.y_min = b.y_min.min(p.y);
            b.x_max = b.x_max.max(p.x);
            b.y_max = b.y_max.max(p.y);
        }
        b
    }

    /// Point-in-polygon, boundary counted as inside.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            b.sub(a).cross(p.sub(a)) >= 0.0
        })
    }

    /// Applies a rigid motion: rotation by `angle` radians about `center`,
    /// then translation by `shift`. Orientation is preserved so the result
    /// needs no re-validation.
    pub fn transformed(&self, center: Point, angle: f64, shift: Point) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| p.rotate_about(center, angle).add(shift))
                .collect(),
        }
    }

    pub fn translated(&self, shift: Point) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|p| p.add(shift)).collect() }
    }

    /// Minimum-area enclosing rectangle as `(long_side, short_side, angle)`,
    /// with the angle of the long side in radians folded into (-pi/2, pi/2].
    /// Exact for rectangles; one of the hull edges is always flush with the
    /// optimal rectangle so trying each edge direction suffices.
    pub fn oriented_extent(&self) -> (f64, f64, f64) {
        let n = self.vertices.len();
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for i in 0..n {
            let e = self.vertices[(i + 1) % n].sub(self.vertices[i]);
            let len = e.norm();
            let u = e.scale(1.0 / len);
            let v = Point::new(-u.y, u.x);
            let (mut umin, mut umax, mut vmin, mut vmax) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in &self.vertices {
                let pu = p.dot(u);
                let pv = p.dot(v);
                umin = umin.min(pu);
                umax = umax.max(pu);
                vmin = vmin.min(pv);
                vmax = vmax.max(pv);
            }
            let (w, h) = (umax - umin, vmax - vmin);
            if w * h < best.0 - 1e-12 {
                best = (w * h, w, h, u.y.atan2(u.x));
            }
        }
        let (_, w, h, theta) = best;
        let (long, short, angle) =
            if w >= h { (w, h, theta) } else { (h, w, theta + std::f64::consts::FRAC_PI_2) };
        (long, short, fold_half_turn(angle))
    }
}

fn fold_half_turn(mut a: f64) -> f64 {
    use std::f64::consts::PI;
    while a > PI / 2.0 {
        a -= PI;
    }
    while a <= -PI / 2.0 {
        a += PI;
    }
    a
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    let twice: f64 = (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum();
    twice / 2.0
}

/// All turns are left turns (within tolerance) and the ring winds exactly once.
fn is_convex_ccw(v: &[Point]) -> bool {
    let n = v.len();
    let mut turning = 0.0;
    for i in 0..n {
        let e1 = v[(i + 1) % n].sub(v[i]);
        let e2 = v[(i + 2) % n].sub(v[(i + 1) % n]);
        let c = e1.cross(e2);
        if c < -DEGENERACY_TOL * e1.norm() * e2.norm() {
            return false;
        }
        turning += c.atan2(e1.dot(e2));
    }
    (turning - 2.0 * std::f64::consts::PI).abs() < 1e-6
}

/// Shoelace area of a validated polygon.
pub fn area(p: &Polygon) -> f64 {
    p.area()
}

/// Clips `subject` to the left of the directed line `a -> b`.
fn clip_halfplane(subject: &[Point], a: Point, b: Point) -> Vec<Point> {
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 1);
    let dir = b.sub(a);
    for i in 0..n {
        let s = subject[i];
        let e = subject[(i + 1) % n];
        let sd = dir.cross(s.sub(a));
        let ed = dir.cross(e.sub(a));
        let s_in = sd >= 0.0;
        let e_in = ed >= 0.0;
        if s_in && e_in {
            out.push(e);
        } else if s_in != e_in {
            let t = sd / (sd - ed);
            out.push(s.add(e.sub(s).scale(t)));
            if e_in {
                out.push(e);
            }
        }
    }
    out
}

fn clip_ring(a: &Polygon, b: &Polygon) -> Vec<Point> {
    let mut ring = a.vertices.clone();
    let clip = &b.vertices;
    let m = clip.len();
    for i in 0..m {
        ring = clip_halfplane(&ring, clip[i], clip[(i + 1) % m]);
        if ring.len() < 3 {
            return Vec::new();
        }
    }
    ring
}

fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if !a.bounds().overlaps(&b.bounds()) {
        return 0.0;
    }
    let ring = clip_ring(a, b);
    if ring.len() < 3 {
        0.0
    } else {
        signed_area(&ring).max(0.0)
    }
}

/// Intersection of two convex polygons, `None` when its area is below
/// [`EMPTY_AREA_TOL`].
pub fn intersect(a: &Polygon, b: &Polygon) -> Option<Polygon> {
    if !a.bounds().overlaps(&b.bounds()) {
        return None;
    }
    let ring = clip_ring(a, b);
    if ring.len() < 3 || signed_area(&ring) < EMPTY_AREA_TOL {
        return None;
    }
    let mut cleaned: Vec<Point> = Vec::with_capacity(ring.len());
    for p in ring {
        if cleaned.last().is_none_or(|q: &Point| q.sub(p).norm() > DEGENERACY_TOL) {
            cleaned.push(p);
        }
    }
    while cleaned.len() > 1 && cleaned[0].sub(cleaned[cleaned.len() - 1]).norm() <= DEGENERACY_TOL {
        cleaned.pop();
    }
    if cleaned.len() < 3 {
        return None;
    }
    // Clipping a convex ring by half-planes keeps it convex and CCW; skip the
    // strict re-validation since rounding can produce tiny reflex turns.
    Some(Polygon { vertices: cleaned })
}

/// `|d ∩ g| / |d ∪ g|`, clamped to `[0, 1]`.
pub fn iou(d: &Polygon, g: &Polygon) -> f64 {
    let inter = intersection_area(d, g);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = d.area() + g.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
