//! Oriented rectangles and the polygon math behind rotated IoU, NMS and the
//! point predicates used during aggregation.
//!
//! Coordinates follow the image convention (x right, y down). A positive
//! angle therefore turns a box clockwise on screen, and quads are stored
//! clockwise on screen, which is a positive shoelace area in these
//! coordinates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Areas below this are treated as zero.
pub const AREA_EPS: f64 = 1e-12;

/// Slack applied by [`contains_point`].
pub const CONTAINS_SLACK: f64 = 1e-9;

/// Absolute slack on rectangle detection, covering quads written with six
/// decimals.
const QUAD_ROUNDING_SLACK: f64 = 1e-5;

const RIGHT_ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid quad: {0}")]
    InvalidQuad(String),
    #[error("degenerate geometry (area {area:e})")]
    DegenerateGeometry { area: f64 },
    #[error("non-convex input polygon")]
    NonConvexInput,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Rotates about the origin by `angle` radians.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-pi/4, 3pi/4)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta;
    if t.abs() > 16.0 * PI {
        t = (t + FRAC_PI_4).rem_euclid(PI) - FRAC_PI_4;
    }
    while t >= 3.0 * FRAC_PI_4 {
        t -= PI;
    }
    while t < -FRAC_PI_4 {
        t += PI;
    }
    t
}

/// Smallest absolute difference between two angles modulo `period`.
pub fn angle_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

/// Rotated rectangle `(cx, cy, w, h, theta)` under the long-side convention:
/// `w >= h` and `theta` in `[-pi/4, 3pi/4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct OrientedBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = GeometryError;
    fn try_from(r: RawBox) -> Result<Self> {
        OrientedBox::new(r.cx, r.cy, r.w, r.h, r.theta)
    }
}

impl From<OrientedBox> for RawBox {
    fn from(b: OrientedBox) -> Self {
        RawBox {
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            theta: b.theta,
        }
    }
}

impl OrientedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if ![cx, cy, w, h, theta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidBox("non-finite field".into()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox(format!(
                "sides must be positive (w={w}, h={h})"
            )));
        }
        let (w, h, theta) = if w < h {
            (h, w, theta + FRAC_PI_2)
        } else {
            (w, h, theta)
        };
        Ok(Self {
            cx,
            cy,
            w,
            h,
            theta: normalize_angle(theta),
        })
    }

    /// Axis-aligned box from its top-left corner and size.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h, 0.0)
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vector along the long side.
    pub fn axis(&self) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(c, s)
    }

    pub fn vertices(&self) -> Quad {
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        let c = self.center();
        let corners = [
            Point::new(-hw, -hh),
            Point::new(hw, -hh),
            Point::new(hw, hh),
            Point::new(-hw, hh),
        ];
        Quad(corners.map(|p| c + p.rotated(self.theta)))
    }

    /// Expresses `p` in the box frame (origin at the center, x along `w`).
    pub fn to_local(&self, p: Point) -> Point {
        (p - self.center()).rotated(-self.theta)
    }

    /// Midpoints of the two short sides, ordered along the long axis.
    pub fn short_side_midpoints(&self) -> (Point, Point) {
        let half = self.axis() * (self.w / 2.0);
        (self.center() - half, self.center() + half)
    }

    /// Axis-aligned hull as `(xmin, ymin, xmax, ymax)`.
    pub fn aabb(&self) -> (f64, f64, f64, f64) {
        let q = self.vertices();
        let xs = q.0.map(|p| p.x);
        let ys = q.0.map(|p| p.y);
        (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// Grows each side to at least `min_side`, keeping center and angle.
    pub fn with_min_side(&self, min_side: f64) -> OrientedBox {
        OrientedBox::new(self.cx, self.cy, self.w.max(min_side), self.h.max(min_side), self.theta)
            .expect("growing a valid box keeps it valid")
    }

    /// Applies the rigid motion "rotate about the origin by `angle`, then
    /// translate by `shift`".
    pub fn transformed(&self, angle: f64, shift: Point) -> OrientedBox {
        let c = self.center().rotated(angle) + shift;
        OrientedBox::new(c.x, c.y, self.w, self.h, self.theta + angle).expect("rigid motion keeps a valid box valid")
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, k: f64) -> Result<OrientedBox> {
        OrientedBox::new(self.cx * k, self.cy * k, self.w * k, self.h * k, self.theta)
    }

    /// Geometric equality within `tol`, accounting for the pi symmetry of a
    /// rectangle and the extra pi/2 symmetry of a square.
    pub fn approx_eq(&self, other: &OrientedBox, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        if !(close(self.cx, other.cx) && close(self.cy, other.cy)) {
            return false;
        }
        let square = close(self.w, self.h) && close(other.w, other.h);
        if square {
            let side = (self.w + self.h) / 2.0;
            let other_side = (other.w + other.h) / 2.0;
            close(side, other_side) && angle_distance(self.theta, other.theta, FRAC_PI_2) <= tol
        } else {
            close(self.w, other.w) && close(self.h, other.h) && angle_distance(self.theta, other.theta, PI) <= tol
        }
    }
}

/// Four vertices, clockwise on screen (positive shoelace area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad([Point; 4]);

impl Quad {
    /// Validates a simple quad with positive area. Counter-clockwise input
    /// is reversed, keeping the first vertex in place.
    pub fn new(points: [Point; 4]) -> Result<Quad> {
        if !points.iter().all(|p| p.is_finite()) {
            return Err(GeometryError::InvalidQuad("non-finite vertex".into()));
        }
        let area = signed_area(&points);
        if area.abs() < AREA_EPS {
            return Err(GeometryError::DegenerateGeometry { area: area.abs() });
        }
        if segments_cross(points[0], points[1], points[2], points[3])
            || segments_cross(points[1], points[2], points[3], points[0])
        {
            return Err(GeometryError::InvalidQuad("self-intersecting".into()));
        }
        let pts = if area < 0.0 {
            [points[0], points[3], points[2], points[1]]
        } else {
            points
        };
        Ok(Quad(pts))
    }

    pub fn from_coords(c: [f64; 8]) -> Result<Quad> {
        Quad::new([
            Point::new(c[0], c[1]),
            Point::new(c[2], c[3]),
            Point::new(c[4], c[5]),
            Point::new(c[6], c[7]),
        ])
    }

    pub fn points(&self) -> &[Point; 4] {
        &self.0
    }

    pub fn coords(&self) -> [f64; 8] {
        let p = &self.0;
        [p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y]
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.0)
    }

    pub fn is_convex(&self) -> bool {
        is_convex(&self.0)
    }

    pub fn centroid(&self) -> Point {
        let s = self.0.iter().fold(Point::default(), |a, &p| a + p);
        s * 0.25
    }
}

/// Parallelogram proposal `(x, y, w, h, dalpha, dbeta)`: the external
/// rectangle plus offsets of two vertices from the midpoints of its top and
/// right sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointOffsetBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub dalpha: f64,
    pub dbeta: f64,
}

impl MidpointOffsetBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, dalpha: f64, dbeta: f64) -> Result<Self> {
        if ![x, y, w, h, dalpha, dbeta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidBox("non-finite field".into()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox(
                "external rectangle must have positive sides".into(),
            ));
        }
        let slack = 1e-12 * (w + h);
        if dalpha.abs() > w / 2.0 + slack || dbeta.abs() > h / 2.0 + slack {
            return Err(GeometryError::InvalidBox(format!(
                "offsets ({dalpha}, {dbeta}) exceed half sides ({}, {})",
                w / 2.0,
                h / 2.0
            )));
        }
        Ok(Self {
            x,
            y,
            w,
            h,
            dalpha,
            dbeta,
        })
    }

    /// Parallelogram vertices: top, right, bottom, left.
    pub fn parallelogram(&self) -> [Point; 4] {
        let Self {
            x,
            y,
            w,
            h,
            dalpha,
            dbeta,
        } = *self;
        [
            Point::new(x + dalpha, y - h / 2.0),
            Point::new(x + w / 2.0, y + dbeta),
            Point::new(x - dalpha, y + h / 2.0),
            Point::new(x - w / 2.0, y - dbeta),
        ]
    }
}

/// Score-carrying box used by NMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub score: f64,
    pub class_id: u32,
}

pub fn vertices_of(b: &OrientedBox) -> Quad {
    b.vertices()
}

/// Recovers the oriented box of a quad: exactly when the quad is a
/// rectangle, otherwise the minimum-area enclosing rectangle.
pub fn box_from_quad(q: &Quad) -> Result<OrientedBox> {
    let area = q.area();
    if area < AREA_EPS {
        return Err(GeometryError::DegenerateGeometry { area });
    }
    let p = q.points();
    let s0 = p[1] - p[0];
    let s1 = p[2] - p[1];
    let s2 = p[3] - p[2];
    let s3 = p[0] - p[3];
    let scale = s0.norm().max(s1.norm());
    let tol = 1e-9 * scale + QUAD_ROUNDING_SLACK;
    let sides_match = (s0 + s2).norm() <= tol && (s1 + s3).norm() <= tol;
    let short = s0.norm().min(s1.norm());
    let right = (s0.dot(s1) / (s0.norm() * s1.norm())).abs() <= RIGHT_ANGLE_TOL.sin() + QUAD_ROUNDING_SLACK / short;
    if sides_match && right {
        let a = (s0 - s2) * 0.5;
        let b = (s1 - s3) * 0.5;
        let (long, short) = if a.norm() >= b.norm() { (a, b) } else { (b, a) };
        let c = q.centroid();
        return OrientedBox::new(c.x, c.y, long.norm(), short.norm(), long.y.atan2(long.x));
    }
    enclosing_box(p, 0.0)
}

/// Minimum-area oriented rectangle around a point set (rotating calipers
/// over hull edges), with each side grown to at least `min_side`. Collinear
/// input yields a box of thickness `min_side`, which must then be positive.
pub fn enclosing_box(points: &[Point], min_side: f64) -> Result<OrientedBox> {
    let hull = convex_hull(points);
    if hull.is_empty() {
        return Err(GeometryError::DegenerateGeometry { area: 0.0 });
    }
    if hull.len() == 1 {
        let c = hull[0];
        return OrientedBox::new(c.x, c.y, min_side, min_side, 0.0)
            .map_err(|_| GeometryError::DegenerateGeometry { area: 0.0 });
    }
    let mut best: Option<(f64, Point, f64, f64, f64)> = None;
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let u = e * (1.0 / len);
        let n = Point::new(-u.y, u.x);
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &p in &hull {
            let a = p.dot(u);
            let b = p.dot(n);
            umin = umin.min(a);
            umax = umax.max(a);
            vmin = vmin.min(b);
            vmax = vmax.max(b);
        }
        let area = (umax - umin) * (vmax - vmin);
        let better = match best {
            None => true,
            Some((a, ..)) => area < a - 1e-12 * a.max(1.0),
        };
        if better {
            let center = u * ((umin + umax) / 2.0) + n * ((vmin + vmax) / 2.0);
            best = Some((area, center, umax - umin, vmax - vmin, u.y.atan2(u.x)));
        }
    }
    let (area, c, w, h, theta) = best.ok_or(GeometryError::DegenerateGeometry { area: 0.0 })?;
    if min_side <= 0.0 && area < AREA_EPS {
        return Err(GeometryError::DegenerateGeometry { area });
    }
    OrientedBox::new(c.x, c.y, w.max(min_side), h.max(min_side), theta)
}

/// Converts a midpoint-offset parallelogram to an oriented rectangle by
/// stretching its shorter diagonal to the length of the longer one.
pub fn box_from_midpoint_offsets(p: &MidpointOffsetBox) -> Result<OrientedBox> {
    let mut v = p.parallelogram();
    let area = signed_area(&v).abs();
    if area < AREA_EPS {
        return Err(GeometryError::DegenerateGeometry { area });
    }
    let c = Point::new(p.x, p.y);
    let d13 = v[2] - v[0];
    let d24 = v[3] - v[1];
    let (l13, l24) = (d13.norm(), d24.norm());
    if l13 < l24 {
        let k = l24 / l13 / 2.0;
        v[0] = c - d13 * k;
        v[2] = c + d13 * k;
    } else if l24 < l13 {
        let k = l13 / l24 / 2.0;
        v[1] = c - d24 * k;
        v[3] = c + d24 * k;
    }
    let q = Quad::new(v)?;
    box_from_quad(&q)
}

/// Area of the intersection of two convex quads.
pub fn convex_intersection_area(a: &Quad, b: &Quad) -> Result<f64> {
    if !a.is_convex() || !b.is_convex() {
        return Err(GeometryError::NonConvexInput);
    }
    let clipped = clip_convex(a.points(), b.points());
    Ok(signed_area(&clipped).max(0.0))
}

/// Intersection over union of two oriented boxes, by exact convex clipping.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let reach = (a.w.hypot(a.h) + b.w.hypot(b.h)) / 2.0;
    if a.center().distance(b.center()) > reach {
        return 0.0;
    }
    let qa = a.vertices();
    let qb = b.vertices();
    let inter = signed_area(&clip_convex(qa.points(), qb.points())).max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy per-class NMS. Candidates are visited by descending score (ties
/// by lower index); a candidate is suppressed when its IoU with a retained
/// box of the same class exceeds `iou_threshold`. Returns retained indices
/// in ascending order.
///
/// Panics unless `0 < iou_threshold < 1`.
pub fn rotated_nms(candidates: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    assert!(
        iou_threshold > 0.0 && iou_threshold < 1.0,
        "iou_threshold must lie in (0, 1), got {iou_threshold}"
    );
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[j].score.total_cmp(&candidates[i].score).then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let c = &candidates[i];
        let suppressed = kept.iter().any(|&k| {
            candidates[k].class_id == c.class_id && rotated_iou(&candidates[k].bbox, &c.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Distance from `p` to the box: zero inside or on the boundary, otherwise
/// the Euclidean distance to the nearest boundary point.
pub fn point_box_distance(p: Point, b: &OrientedBox) -> f64 {
    let l = b.to_local(p);
    let dx = (l.x.abs() - b.w / 2.0).max(0.0);
    let dy = (l.y.abs() - b.h / 2.0).max(0.0);
    dx.hypot(dy)
}

pub fn contains_point(b: &OrientedBox, p: Point) -> bool {
    let l = b.to_local(p);
    l.x.abs() <= b.w / 2.0 + CONTAINS_SLACK && l.y.abs() <= b.h / 2.0 + CONTAINS_SLACK
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Shoelace area; positive for clockwise-on-screen polygons.
pub fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += points[i].cross(points[(i + 1) % n]);
    }
    s / 2.0
}

fn is_convex(points: &[Point]) -> bool {
    let n = points.len();
    let scale = points.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut sign = 0.0;
    for i in 0..n {
        let a = points[(i + 1) % n] - points[i];
        let b = points[(i + 2) % n] - points[(i + 1) % n];
        let c = a.cross(b);
        if c.abs() <= eps {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Sutherland-Hodgman clipping of `subject` by the convex, positively
/// oriented polygon `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % n];
        let edge = e1 - e0;
        let eps = 1e-12 * edge.norm() * (1.0 + e0.norm());
        let side = |p: Point| edge.cross(p - e0);
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(cur), side(prev));
            let (cin, pin) = (sc >= -eps, sp >= -eps);
            if cin {
                if !pin {
                    output.push(prev.lerp(cur, (sp / (sp - sc)).clamp(0.0, 1.0)));
                }
                output.push(cur);
            } else if pin {
                output.push(prev.lerp(cur, (sp / (sp - sc)).clamp(0.0, 1.0)));
            }
        }
    }
    output
}

/// Andrew's monotone chain; returns the hull clockwise on screen without
/// repeated points. Collinear input collapses to its two extremes.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
