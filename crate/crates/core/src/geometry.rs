//! Points, node states and exact-sign geometric predicates.
//!
//! `orient2d` and `incircle` run a floating-point filter first and fall back
//! to exact rational arithmetic only when the filtered value is too close to
//! zero to trust its sign. The error bounds are the classic first-stage
//! bounds for the same evaluation order.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigRational, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2D point or vector, in meters (or meters/second when used as a velocity).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Velocities and displacements share the point representation.
pub type Vec2 = Point;

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn lerp(self, o: Point, s: f64) -> Point {
        self + (o - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
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

/// Scenario-unique node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Static,
    Dynamic,
    Virtual,
    Ego,
}

impl NodeKind {
    /// Static and virtual nodes never carry a velocity of their own.
    pub fn is_stationary(self) -> bool {
        matches!(self, NodeKind::Static | NodeKind::Virtual)
    }
}

/// The disc node model: position, velocity and radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub pos: Point,
    pub vel: Vec2,
    pub radius: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum NodeError {
    #[error("node {0}: negative radius {1}")]
    NegativeRadius(NodeId, f64),
    #[error("node {0}: {1:?} node with nonzero velocity")]
    MovingStationary(NodeId, NodeKind),
    #[error("node {0}: non-finite state")]
    NonFinite(NodeId),
}

impl NodeState {
    pub fn new(id: u64, pos: Point, vel: Vec2, radius: f64, kind: NodeKind) -> Result<Self, NodeError> {
        let node = NodeState {
            id: NodeId(id),
            pos,
            vel,
            radius,
            kind,
        };
        node.validate()?;
        Ok(node)
    }

    pub fn stationary(id: u64, pos: Point, radius: f64, kind: NodeKind) -> Self {
        NodeState {
            id: NodeId(id),
            pos,
            vel: Vec2::ZERO,
            radius,
            kind,
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        if !(self.pos.is_finite() && self.vel.is_finite() && self.radius.is_finite()) {
            return Err(NodeError::NonFinite(self.id));
        }
        if self.radius < 0.0 {
            return Err(NodeError::NegativeRadius(self.id, self.radius));
        }
        if self.kind.is_stationary() && self.vel != Vec2::ZERO {
            return Err(NodeError::MovingStationary(self.id, self.kind));
        }
        Ok(())
    }

    /// Linear motion model: position after `dt` seconds.
    #[inline]
    pub fn position_at(&self, dt: f64) -> Point {
        position_at(self, dt)
    }
}

/// Linear motion model `p(t) = p0 + v * t`.
#[inline]
pub fn position_at(node: &NodeState, t: f64) -> Point {
    debug_assert!(t >= 0.0, "negative elapsed time {t}");
    Point::new(node.pos.x + node.vel.x * t, node.pos.y + node.vel.y * t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircleSide {
    Inside,
    Cocircular,
    Outside,
}

/// Result of the in-circle test. `gamma < 0` means inside regardless of
/// the orientation of the triangle; branch on `side`, not on `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InCircleResult {
    pub gamma: f64,
    pub side: CircleSide,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate triangle: vertices are collinear")]
    DegenerateTriangle,
}

const EPS: f64 = f64::EPSILON * 0.5;
const CCW_ERRBOUND_A: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_ERRBOUND_A: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Twice the signed area of `(a, b, c)`: positive for counterclockwise,
/// negative for clockwise, zero for collinear. The sign is exact.
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    let detleft = (a.x - c.x) * (b.y - c.y);
    let detright = (a.y - c.y) * (b.x - c.x);
    let det = detleft - detright;

    let detsum = if detleft > 0.0 {
        if detright <= 0.0 {
            return det;
        }
        detleft + detright
    } else if detleft < 0.0 {
        if detright >= 0.0 {
            return det;
        }
        -detleft - detright
    } else {
        return det;
    };

    if det.abs() >= CCW_ERRBOUND_A * detsum {
        return det;
    }
    signed_value(&orient2d_exact(a, b, c), det)
}

/// Ordering-valued orientation, for callers that only need the sign.
pub fn orientation(a: Point, b: Point, c: Point) -> Ordering {
    let v = orient2d(a, b, c);
    if v > 0.0 {
        Ordering::Greater
    } else if v < 0.0 {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Lifted-circle determinant with the conventional sign: positive when `d`
/// lies inside the circle through counterclockwise `(a, b, c)`. Exact sign.
pub(crate) fn incircle_raw(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let adx = a.x - d.x;
    let bdx = b.x - d.x;
    let cdx = c.x - d.x;
    let ady = a.y - d.y;
    let bdy = b.y - d.y;
    let cdy = c.y - d.y;

    let bdxcdy = bdx * cdy;
    let cdxbdy = cdx * bdy;
    let alift = adx * adx + ady * ady;

    let cdxady = cdx * ady;
    let adxcdy = adx * cdy;
    let blift = bdx * bdx + bdy * bdy;

    let adxbdy = adx * bdy;
    let bdxady = bdx * ady;
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;

    if det.abs() > ICC_ERRBOUND_A * permanent {
        return det;
    }
    signed_value(&incircle_exact(a, b, c, d), det)
}

/// In-circle test for `p` against the circumcircle of `(a, b, c)`.
///
/// `gamma` is the product of the 4x4 lifted determinant (rows `[1, x, y,
/// x^2 + y^2]`) and the 3x3 orientation determinant (rows `[1, x, y]`). The
/// second factor cancels the orientation of the triangle, so `gamma < 0`
/// means inside for either vertex order.
pub fn incircle(a: Point, b: Point, c: Point, p: Point) -> Result<InCircleResult, GeometryError> {
    let orient = orient2d(a, b, c);
    if orient == 0.0 {
        return Err(GeometryError::DegenerateTriangle);
    }
    // Moving the unit column from last to first is an odd permutation, so
    // the lifted factor is the negated conventional determinant.
    let lifted = -incircle_raw(a, b, c, p);
    let mut gamma = lifted * orient;
    if gamma == 0.0 && lifted != 0.0 {
        // product underflow; keep the exact sign
        gamma = lifted.signum() * orient.signum() * f64::MIN_POSITIVE;
    }
    let side = if gamma < 0.0 {
        CircleSide::Inside
    } else if gamma > 0.0 {
        CircleSide::Outside
    } else {
        CircleSide::Cocircular
    };
    Ok(InCircleResult { gamma, side })
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite coordinate")
}

fn orient2d_exact(a: Point, b: Point, c: Point) -> BigRational {
    let (ax, ay) = (rational(a.x), rational(a.y));
    let (bx, by) = (rational(b.x), rational(b.y));
    let (cx, cy) = (rational(c.x), rational(c.y));
    (&ax - &cx) * (&by - &cy) - (&ay - &cy) * (&bx - &cx)
}

fn incircle_exact(a: Point, b: Point, c: Point, d: Point) -> BigRational {
    let (dx, dy) = (rational(d.x), rational(d.y));
    let adx = rational(a.x) - &dx;
    let ady = rational(a.y) - &dy;
    let bdx = rational(b.x) - &dx;
    let bdy = rational(b.y) - &dy;
    let cdx = rational(c.x) - &dx;
    let cdy = rational(c.y) - &dy;
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    alift * (&bdx * &cdy - &cdx * &bdy) + blift * (&cdx * &ady - &adx * &cdy) + clift * (&adx * &bdy - &bdx * &ady)
}

/// Floating-point value for an exactly-signed result: the filtered estimate
/// when its sign agrees, otherwise the rounded exact value.
fn signed_value(exact: &BigRational, estimate: f64) -> f64 {
    if exact.is_zero() {
        return 0.0;
    }
    let positive = exact.is_positive();
    if (estimate > 0.0 && positive) || (estimate < 0.0 && !positive) {
        return estimate;
    }
    let v = exact.to_f64().unwrap_or(0.0);
    if v == 0.0 || v.signum() != if positive { 1.0 } else { -1.0 } {
        if positive {
            f64::MIN_POSITIVE
        } else {
            -f64::MIN_POSITIVE
        }
    } else {
        v
    }
}

/// Boundary-inclusive point-in-triangle test for either vertex order.
pub fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let d1 = orient2d(a, b, p);
    let d2 = orient2d(b, c, p);
    let d3 = orient2d(c, a, p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Closest point to `p` on segment `ab`.
pub fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let s = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * s
}

/// Closest point to `p` in the closed triangle `(a, b, c)`.
pub fn closest_in_triangle(p: Point, a: Point, b: Point, c: Point) -> Point {
    if point_in_triangle(p, a, b, c) {
        return p;
    }
    [closest_on_segment(p, a, b), closest_on_segment(p, b, c), closest_on_segment(p, c, a)]
        .into_iter()
        .min_by(|u, v| u.dist(p).total_cmp(&v.dist(p)))
        .unwrap()
}

pub fn centroid(a: Point, b: Point, c: Point) -> Point {
    Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
}
