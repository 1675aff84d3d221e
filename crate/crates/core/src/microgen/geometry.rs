//! Planar polygon primitives (millimetres).

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Distance from `p` to the segment `[a, b]`.
#[inline]
pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Crossing-number containment test (boundary handling left to callers).
pub fn crossing_inside(p: Vec2, verts: &[Vec2]) -> bool {
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (verts[i], verts[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Unsigned distance to the polygon boundary.
pub fn boundary_distance(p: Vec2, verts: &[Vec2]) -> f64 {
    let n = verts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let d = segment_distance(p, verts[i], verts[(i + 1) % n]);
        if d < best {
            best = d;
        }
    }
    best
}

const EDGE_EPS: f64 = 1e-9;

/// Signed distance to the polygon boundary, negative inside. Points on the
/// boundary return zero and count as inside.
pub fn signed_distance(p: Vec2, verts: &[Vec2]) -> f64 {
    let d = boundary_distance(p, verts);
    if d <= EDGE_EPS || crossing_inside(p, verts) {
        -d
    } else {
        d
    }
}

/// Containment with edges resolved as inside.
pub fn contains(p: Vec2, verts: &[Vec2]) -> bool {
    signed_distance(p, verts) <= 0.0
}

/// Shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(verts: &[Vec2]) -> f64 {
    let n = verts.len();
    let mut s = 0.0;
    for i in 0..n {
        s += verts[i].cross(verts[(i + 1) % n]);
    }
    0.5 * s
}

pub fn perimeter(verts: &[Vec2]) -> f64 {
    let n = verts.len();
    (0..n).map(|i| (verts[(i + 1) % n] - verts[i]).norm()).sum()
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Vec2, b: Vec2, p: Vec2, d: f64| {
        d == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// True when no two non-adjacent edges touch.
pub fn is_simple(verts: &[Vec2]) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (verts[i], verts[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (verts[j], verts[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

pub fn translate(verts: &[Vec2], by: Vec2) -> Vec<Vec2> {
    verts.iter().map(|&v| v + by).collect()
}
