//! Planar primitives shared by the detector, characterizer and evaluation code.
//!
//! All coordinates are image pixels with `y` pointing down.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    /// Counter-clockwise rotation (in a y-up frame) by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned box `(x, y, w, h)` with `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox { x: v[0], y: v[1], w: v[2], h: v[3] }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
    }

    pub fn x1(&self) -> f64 {
        self.x + self.w
    }

    pub fn y1(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox { x: self.x + dx, y: self.y + dy, ..*self }
    }

    pub fn intersection(&self, o: &BBox) -> Option<BBox> {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.x1().min(o.x1());
        let y1 = self.y1().min(o.y1());
        (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
    }

    pub fn contains_box(&self, o: &BBox) -> bool {
        o.x >= self.x && o.y >= self.y && o.x1() <= self.x1() && o.y1() <= self.y1()
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x, self.y),
            Vec2::new(self.x1(), self.y),
            Vec2::new(self.x1(), self.y1()),
            Vec2::new(self.x, self.y1()),
        ]
    }

    /// Envelope of a point set; `None` for an empty set.
    pub fn envelope(points: &[Vec2]) -> Option<BBox> {
        let first = points.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(BBox::from_corners(x0, y0, x1, y1))
    }
}

/// Rectangle with arbitrary in-plane rotation.
///
/// `theta` is the direction of the long axis, normalized to `[0, pi)`, and
/// `length >= width` always holds for boxes built through [`OrientedBox::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 5]", into = "[f64; 5]")]
pub struct OrientedBox {
    pub center: Vec2,
    pub length: f64,
    pub width: f64,
    pub theta: f64,
}

impl From<[f64; 5]> for OrientedBox {
    fn from(v: [f64; 5]) -> Self {
        OrientedBox::new(Vec2::new(v[0], v[1]), v[2], v[3], v[4])
    }
}

impl From<OrientedBox> for [f64; 5] {
    fn from(b: OrientedBox) -> Self {
        [b.center.x, b.center.y, b.length, b.width, b.theta]
    }
}

fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly PI
    if t >= PI {
        0.0
    } else {
        t
    }
}

impl OrientedBox {
    pub fn new(center: Vec2, length: f64, width: f64, theta: f64) -> Self {
        let (length, width, theta) =
            if width > length { (width, length, theta + PI / 2.0) } else { (length, width, theta) };
        Self { center, length, width, theta: normalize_angle(theta) }
    }

    /// Fits the canonical form to four corners given in ring order.
    pub fn from_corners(c: [Vec2; 4]) -> Self {
        let center = Vec2::new(
            (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0,
            (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0,
        );
        let e0 = c[1] - c[0];
        let e1 = c[2] - c[1];
        let e2 = c[3] - c[2];
        let e3 = c[0] - c[3];
        let l0 = (e0.norm() + e2.norm()) / 2.0;
        let l1 = (e1.norm() + e3.norm()) / 2.0;
        let theta = e0.y.atan2(e0.x);
        OrientedBox::new(center, l0, l1, theta)
    }

    pub fn axis_aligned(b: &BBox) -> Self {
        OrientedBox::new(b.center(), b.w, b.h, 0.0)
    }

    /// Unit vector along the long axis.
    pub fn long_axis(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Unit vector along the short axis; with `y` down this points to the right of the long axis.
    pub fn short_axis(&self) -> Vec2 {
        Vec2::new(-self.theta.sin(), self.theta.cos())
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let a = self.long_axis().scale(self.length / 2.0);
        let n = self.short_axis().scale(self.width / 2.0);
        let c = self.center;
        [c - a - n, c + a - n, c + a + n, c - a + n]
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let d = p - self.center;
        d.dot(self.long_axis()).abs() <= self.length / 2.0
            && d.dot(self.short_axis()).abs() <= self.width / 2.0
    }

    pub fn envelope(&self) -> BBox {
        BBox::envelope(&self.corners()).expect("four corners")
    }

    pub fn translate(&self, d: Vec2) -> Self {
        Self { center: self.center + d, ..*self }
    }

    /// Rigid rotation about `pivot` followed by translation by `shift`.
    pub fn rigid_motion(&self, pivot: Vec2, angle: f64, shift: Vec2) -> Self {
        let c = (self.center - pivot).rotate(angle) + pivot + shift;
        OrientedBox::new(c, self.length, self.width, self.theta + angle)
    }
}

/// Distance from `p` to segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab.scale(t))).norm()
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // collinear / touching cases are caught by the endpoint distances being 0
    false
}

pub fn segment_segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Minimum distance between segment `ab` and the (filled) oriented box.
pub fn segment_box_distance(a: Vec2, b: Vec2, bx: &OrientedBox) -> f64 {
    if bx.contains(a) || bx.contains(b) {
        return 0.0;
    }
    let c = bx.corners();
    (0..4)
        .map(|i| segment_segment_distance(a, b, c[i], c[(i + 1) % 4]))
        .fold(f64::INFINITY, f64::min)
}

/// Farthest parametric hit of the ray `origin + t * dir` (`t >= 0`) with a filled oriented box.
///
/// Slab test in the box frame. Returns `None` when the ray misses or the box lies
/// entirely behind the origin.
pub fn ray_obb_far_hit(origin: Vec2, dir: Vec2, bx: &OrientedBox) -> Option<f64> {
    let rel = origin - bx.center;
    let axes = [(bx.long_axis(), bx.length / 2.0), (bx.short_axis(), bx.width / 2.0)];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for (axis, half) in axes {
        let o = rel.dot(axis);
        let d = dir.dot(axis);
        if d.abs() < 1e-15 {
            if o.abs() > half {
                return None;
            }
            continue;
        }
        let t0 = (-half - o) / d;
        let t1 = (half - o) / d;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
    }
    (t_near <= t_far && t_far >= 0.0).then_some(t_far)
}

/// Signed shoelace area (positive for counter-clockwise rings in a y-up frame).
pub fn polygon_signed_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        s += poly[i].cross(poly[(i + 1) % poly.len()]);
    }
    s / 2.0
}

pub fn polygon_area(poly: &[Vec2]) -> f64 {
    polygon_signed_area(poly).abs()
}

pub fn is_convex(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = (poly[(i + 1) % n] - poly[i]).cross(poly[(i + 2) % n] - poly[(i + 1) % n]);
        if c.abs() < 1e-12 {
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

/// Sutherland-Hodgman clip of `subject` against a convex `clip` polygon.
pub fn clip_polygon(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let orient = polygon_signed_area(clip).signum();
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let inside = |p: Vec2| (b - a).cross(p - a) * orient >= 0.0;
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let intersect = |p: Vec2, q: Vec2| {
                let d1 = (b - a).cross(p - a);
                let d2 = (b - a).cross(q - a);
                let t = d1 / (d1 - d2);
                p + (q - p).scale(t)
            };
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(intersect(prev, cur)),
                (false, true) => {
                    out.push(intersect(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}
