//! Taut-string path extraction through a triangle corridor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NodeId, Point};
use crate::triangulation::{Mesh, TriId};

/// One corridor triangle with its corner positions and node radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorTriangle {
    pub ids: [NodeId; 3],
    pub corners: [Point; 3],
    pub radii: [f64; 3],
}

/// Ordered, edge-connected triangles the path must stay within.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corridor {
    pub triangles: Vec<CorridorTriangle>,
}

impl Corridor {
    /// Corridor over mesh triangles at the mesh's own time.
    pub fn from_mesh(mesh: &Mesh, tris: &[TriId]) -> Self {
        Self::from_mesh_with(mesh, tris, |i| mesh.position(i))
    }

    /// Corridor over mesh triangles with corners supplied per mesh node index.
    pub fn from_mesh_with(mesh: &Mesh, tris: &[TriId], pos: impl Fn(usize) -> Point) -> Self {
        let triangles = tris
            .iter()
            .map(|&t| {
                let v = mesh.triangles()[t.0].vertices;
                CorridorTriangle {
                    ids: v.map(|i| mesh.node(i).id),
                    corners: v.map(&pos),
                    radii: v.map(|i| mesh.node(i).radius),
                }
            })
            .collect();
        Corridor { triangles }
    }

    /// Shared-edge portals as `(left, right)` pairs seen when moving from
    /// triangle `i` into `i + 1`, each with the node radius of its endpoint.
    pub fn portals(&self) -> Result<Vec<Portal>, FunnelError> {
        self.triangles
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (from, to) = (&w[0], &w[1]);
                let shared: Vec<usize> = (0..3).filter(|&k| to.ids.contains(&from.ids[k])).collect();
                if shared.len() != 2 {
                    return Err(FunnelError::Disconnected { index: i });
                }
                let apex = (0..3).find(|k| !shared.contains(k)).expect("one corner left");
                let (u, v) = (shared[0], shared[1]);
                let c = from.corners[apex];
                let (r, l) = if (from.corners[u] - c).cross(from.corners[v] - c) > 0.0 { (u, v) } else { (v, u) };
                Ok(Portal {
                    left: from.corners[l],
                    right: from.corners[r],
                    left_radius: from.radii[l],
                    right_radius: from.radii[r],
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Portal {
    pub left: Point,
    pub right: Point,
    pub left_radius: f64,
    pub right_radius: f64,
}

impl Portal {
    /// Portal with each endpoint moved inward by `padding` plus its radius,
    /// or `None` when nothing of the portal remains.
    pub fn shrunk(&self, padding: f64) -> Option<(Point, Point)> {
        let len = self.left.dist(self.right);
        let (dl, dr) = (padding + self.left_radius, padding + self.right_radius);
        if len - dl - dr <= 0.0 {
            return None;
        }
        let dir = (self.left - self.right) * (1.0 / len);
        Some((self.left - dir * dl, self.right + dir * dr))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    pub points: Vec<Point>,
    /// Channel segment each point belongs to.
    pub segment: Vec<usize>,
}

impl PathPolyline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Appends `other`, dropping its first point when it repeats our last one.
    pub fn extend(&mut self, other: &PathPolyline) {
        for (p, s) in other.points.iter().zip(&other.segment) {
            if self.points.last() != Some(p) {
                self.points.push(*p);
                self.segment.push(*s);
            }
        }
    }

    /// Prefix of the points that belong to the first point's segment.
    pub fn leading_segment(&self) -> PathPolyline {
        let first = self.segment.first().copied();
        let k = self.segment.iter().take_while(|&&s| Some(s) == first).count();
        PathPolyline {
            points: self.points[..k].to_vec(),
            segment: self.segment[..k].to_vec(),
        }
    }

    /// Point reached after travelling `dist` along the polyline.
    pub fn point_at(&self, dist: f64) -> Point {
        let mut left = dist.max(0.0);
        for w in self.points.windows(2) {
            let hop = w[0].dist(w[1]);
            if left <= hop {
                return w[0].lerp(w[1], left / hop);
            }
            left -= hop;
        }
        *self.points.last().expect("non-empty polyline")
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FunnelError {
    #[error("corridor is empty")]
    Empty,
    #[error("negative padding {0}")]
    NegativePadding(f64),
    #[error("start lies outside the first triangle")]
    StartOutside,
    #[error("target lies outside the last triangle")]
    TargetOutside,
    #[error("triangles {index} and {} do not share an edge", index + 1)]
    Disconnected { index: usize },
    #[error("portal {index} is too narrow after padding")]
    TooNarrow { index: usize },
}

/// Containment test with a small relative tolerance on the barycentric weights.
pub fn in_triangle_tol(p: Point, [a, b, c]: [Point; 3]) -> bool {
    let area = (b - a).cross(c - a);
    if area == 0.0 {
        return false;
    }
    let w = [(c - b).cross(p - b), (a - c).cross(p - c), (b - a).cross(p - a)];
    w.iter().all(|x| x / area >= -1e-9)
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a - o).cross(b - o)
}

/// Shortest path from `start` to `target` through the corridor, with every
/// portal endpoint pulled inward by `padding` plus the endpoint node radius.
pub fn funnel(corridor: &Corridor, start: Point, target: Point, padding: f64) -> Result<PathPolyline, FunnelError> {
    if !(padding >= 0.0) {
        return Err(FunnelError::NegativePadding(padding));
    }
    let first = corridor.triangles.first().ok_or(FunnelError::Empty)?;
    let last = corridor.triangles.last().expect("non-empty");
    if !in_triangle_tol(start, first.corners) {
        return Err(FunnelError::StartOutside);
    }
    if !in_triangle_tol(target, last.corners) {
        return Err(FunnelError::TargetOutside);
    }
    let mut portals = vec![(start, start)];
    for (index, p) in corridor.portals()?.into_iter().enumerate() {
        portals.push(p.shrunk(padding).ok_or(FunnelError::TooNarrow { index })?);
    }
    portals.push((target, target));

    let mut points = vec![start];
    let (mut apex, mut left, mut right) = (start, start, start);
    let (mut left_i, mut right_i) = (0, 0);
    let mut i = 1;
    while i < portals.len() {
        let (pl, pr) = portals[i];
        if cross(apex, right, pr) >= 0.0 {
            if apex == right || cross(apex, left, pr) < 0.0 {
                right = pr;
                right_i = i;
            } else {
                apex = left;
                let apex_i = left_i;
                points.push(apex);
                (left, right, left_i, right_i) = (apex, apex, apex_i, apex_i);
                i = apex_i + 1;
                continue;
            }
        }
        if cross(apex, left, pl) <= 0.0 {
            if apex == left || cross(apex, right, pl) > 0.0 {
                left = pl;
                left_i = i;
            } else {
                apex = right;
                let apex_i = right_i;
                points.push(apex);
                (left, right, left_i, right_i) = (apex, apex, apex_i, apex_i);
                i = apex_i + 1;
                continue;
            }
        }
        i += 1;
    }
    if points.last() != Some(&target) {
        points.push(target);
    }
    points.dedup();
    let segment = vec![0; points.len()];
    Ok(PathPolyline { points, segment })
}

/// Largest arc angle, radians, spanned by one vertex of a rounded corner.
const ARC_STEP: f64 = std::f64::consts::PI / 12.0;

/// Replaces every bend of a funnel path by an arc around the corridor node it
/// wraps.
///
/// A bend sits at `padding` plus the node radius from its node, but the
/// straight pieces on either side of it pass closer. Each bend becomes the
/// tangent points from its neighbours plus a polygon circumscribing the
/// clearance circle, so no piece enters the circle. Bends that do not lie on
/// such a circle are kept as they are. Any remaining piece that cuts into a
/// corridor node's circle, such as one starting on it, is wrapped the same
/// way.
pub fn round_corners(path: &PathPolyline, corridor: &Corridor, padding: f64) -> PathPolyline {
    let n = path.points.len();
    if n < 2 {
        return path.clone();
    }
    let nodes: Vec<(Point, f64)> = corridor
        .triangles
        .iter()
        .flat_map(|t| t.corners.into_iter().zip(t.radii).map(|(c, r)| (c, r + padding)))
        .collect();
    let mut out = PathPolyline {
        points: vec![path.points[0]],
        segment: vec![path.segment[0]],
    };
    let wrapped_node = |bend: Point| {
        nodes
            .iter()
            .filter(|(v, c)| (bend.dist(*v) - c).abs() <= 1e-9 * c.max(1.0))
            .min_by(|x, y| (bend.dist(x.0) - x.1).abs().total_cmp(&(bend.dist(y.0) - y.1).abs()))
            .copied()
    };
    let mut i = 1;
    while i < n - 1 {
        let bend = path.points[i];
        let seg = path.segment[i];
        let Some((v, c)) = wrapped_node(bend) else {
            out.points.push(bend);
            out.segment.push(seg);
            i += 1;
            continue;
        };
        // consecutive bends around the same node form one arc
        let mut j = i + 1;
        while j < n - 1 && wrapped_node(path.points[j]).is_some_and(|(w, _)| w == v) {
            j += 1;
        }
        let a = *out.points.last().expect("non-empty");
        let b = path.points[j];
        for q in arc_around(a, bend, b, v, c) {
            if out.points.last() != Some(&q) {
                out.points.push(q);
                out.segment.push(seg);
            }
        }
        i = j;
    }
    out.points.push(path.points[n - 1]);
    out.segment.push(path.segment[n - 1]);
    wrap_intrusions(&mut out, &nodes);
    out
}

/// Replaces pieces that cut into a clearance circle by arcs around it. A
/// piece may start inside a circle; it then leaves it radially.
fn wrap_intrusions(path: &mut PathPolyline, nodes: &[(Point, f64)]) {
    let budget = 8 * path.points.len();
    let mut i = 0;
    let mut repairs = 0;
    while i + 1 < path.points.len() && repairs < budget {
        let (p, q) = (path.points[i], path.points[i + 1]);
        let deepest = nodes
            .iter()
            .filter(|(v, c)| q.dist(*v) >= c * (1.0 - 1e-9))
            .map(|&(v, c)| (v, c, c - segment_distance(v, p, q)))
            .filter(|&(_, c, depth)| depth > 1e-9 * c.max(1.0))
            .max_by(|x, y| x.2.total_cmp(&y.2));
        let Some((v, c, _)) = deepest else {
            i += 1;
            continue;
        };
        let d = q - p;
        let foot = p + d * ((v - p).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        let away = if foot == v { Point::new(-d.y, d.x) } else { foot - v };
        let bend = v + away * (c / away.norm());
        let arc: Vec<Point> = arc_around(p, bend, q, v, c).into_iter().filter(|&x| x != p && x != q).collect();
        if arc.is_empty() {
            i += 1;
            continue;
        }
        let seg = path.segment[i];
        let k = arc.len();
        path.points.splice(i + 1..i + 1, arc);
        path.segment.splice(i + 1..i + 1, std::iter::repeat_n(seg, k));
        repairs += 1;
    }
}

fn segment_distance(v: Point, p: Point, q: Point) -> f64 {
    let d = q - p;
    if d.norm_sq() == 0.0 {
        return v.dist(p);
    }
    let s = ((v - p).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
    v.dist(p + d * s)
}

fn angle_of(p: Point) -> f64 {
    p.y.atan2(p.x)
}

fn polar(v: Point, r: f64, theta: f64) -> Point {
    v + Point::new(theta.cos(), theta.sin()) * r
}

/// Angle of the tangent point from `p` to circle (`v`, `c`) for a path that
/// winds around `v` in direction `wind` (+1 counterclockwise). `outgoing`
/// selects the tangent leaving the circle toward `p`. Inside the circle the
/// radial direction is used.
fn tangent_angle(p: Point, v: Point, c: f64, wind: f64, outgoing: bool) -> f64 {
    let d = p.dist(v);
    let base = angle_of(p - v);
    if d <= c {
        return base;
    }
    let half = (c / d).acos();
    // walking counterclockwise, the entry tangent lies counterclockwise of `p`
    let side = if outgoing { -wind } else { wind };
    base + side * half
}

/// Points that replace the bend at `bend` between `a` and `b` so the path
/// wraps circle (`v`, `c`) on the bend's side.
fn arc_around(a: Point, bend: Point, b: Point, v: Point, c: f64) -> Vec<Point> {
    let wind = if (bend - a).cross(v - a) > 0.0 || (b - bend).cross(v - bend) > 0.0 { 1.0 } else { -1.0 };
    let enter = tangent_angle(a, v, c, wind, false);
    let leave = tangent_angle(b, v, c, wind, true);
    let sweep = wind * (wind * (leave - enter)).rem_euclid(std::f64::consts::TAU);
    if sweep.abs() < 1e-9 || sweep.abs() > std::f64::consts::PI * 1.5 {
        return vec![bend];
    }
    let steps = (sweep.abs() / ARC_STEP).ceil();
    let step = sweep / steps;
    let outer = c / (step / 2.0).cos();
    let mut pts = vec![polar(v, c, enter)];
    pts.extend((0..steps as usize).map(|k| polar(v, outer, enter + step * (k as f64 + 0.5))));
    pts.push(polar(v, c, leave));
    pts
}
