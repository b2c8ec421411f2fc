//! Independent oracles and scene generators shared by the property and
//! acceptance suites. Nothing here calls the code path it is used to check.

#![allow(dead_code)]

use std::cmp::Ordering;

use kinetic_channel::funnel::Corridor;
use kinetic_channel::geometry::{incircle, CircleSide, NodeId, NodeKind, NodeState, Point, Vec2};
use kinetic_channel::search::{timed_astar, Channel, SearchParams};
use kinetic_channel::sequencer::{ChannelSequence, Entry, Termination};
use kinetic_channel::triangulation::{build_dual_toward, build_mesh_at, Mesh, TriId};
use kinetic_channel::events::compute_event_time;
use num::{BigRational, Zero};
use rand::Rng;

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Exact sign of twice the signed area of `(a, b, c)`.
pub fn exact_orient(a: Point, b: Point, c: Point) -> Ordering {
    let area = (q(b.x) - q(a.x)) * (q(c.y) - q(a.y)) - (q(b.y) - q(a.y)) * (q(c.x) - q(a.x));
    area.cmp(&BigRational::zero())
}

/// Side of `p` relative to the circumcircle of `(a, b, c)`, found by
/// computing the circumcenter and squared radius in rational arithmetic.
/// `None` for collinear `(a, b, c)`.
pub fn exact_circle_side(a: Point, b: Point, c: Point, p: Point) -> Option<CircleSide> {
    let (bx, by) = (q(b.x) - q(a.x), q(b.y) - q(a.y));
    let (cx, cy) = (q(c.x) - q(a.x), q(c.y) - q(a.y));
    let d = (&bx * &cy - &by * &cx) * BigRational::from_integer(2.into());
    if d.is_zero() {
        return None;
    }
    let b2 = &bx * &bx + &by * &by;
    let c2 = &cx * &cx + &cy * &cy;
    let ux = (&cy * &b2 - &by * &c2) / &d;
    let uy = (&bx * &c2 - &cx * &b2) / &d;
    let r2 = &ux * &ux + &uy * &uy;
    let (px, py) = (q(p.x) - q(a.x) - &ux, q(p.y) - q(a.y) - &uy);
    let d2 = &px * &px + &py * &py;
    Some(match d2.cmp(&r2) {
        Ordering::Less => CircleSide::Inside,
        Ordering::Equal => CircleSide::Cocircular,
        Ordering::Greater => CircleSide::Outside,
    })
}

/// Number of (triangle, node) pairs where a non-vertex node is classified
/// strictly inside the triangle's circumcircle.
pub fn delaunay_violations(mesh: &Mesh) -> usize {
    let mut bad = 0;
    for t in mesh.triangles() {
        let [a, b, c] = mesh.corners(t.id);
        for i in mesh.meshed_nodes() {
            if t.vertices.contains(&i) {
                continue;
            }
            match incircle(a, b, c, mesh.position(i)) {
                Ok(r) if r.side != CircleSide::Inside => {}
                _ => bad += 1,
            }
        }
    }
    bad
}

/// Number of points on the boundary of the convex hull, collinear boundary
/// points included.
pub fn hull_boundary_count(points: &[Point]) -> usize {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Point> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2
                && exact_orient(hull[hull.len() - 2], hull[hull.len() - 1], p) != Ordering::Greater
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let on_edge = |p: Point, a: Point, b: Point| {
        exact_orient(a, b, p) == Ordering::Equal
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    let h = hull.len();
    points
        .iter()
        .filter(|&&p| (0..h).any(|i| on_edge(p, hull[i], hull[(i + 1) % h])))
        .count()
}

pub fn uniform_points(rng: &mut impl Rng, n: usize, size: f64) -> Vec<Point> {
    (0..n).map(|_| Point::new(rng.gen_range(0.0..size), rng.gen_range(0.0..size))).collect()
}

/// Distinct points drawn from a small integer lattice; dense in cocircular
/// and collinear subsets.
pub fn lattice_points(rng: &mut impl Rng, n: usize) -> Vec<Point> {
    let side = ((n as f64).sqrt().ceil() as i64 + 2).max(3);
    let mut out: Vec<Point> = Vec::new();
    while out.len() < n {
        let p = Point::new(rng.gen_range(0..side) as f64, rng.gen_range(0..side) as f64);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

pub fn static_nodes(points: &[Point]) -> Vec<NodeState> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| NodeState::stationary(i as u64, p, 0.0, NodeKind::Static))
        .collect()
}

pub fn random_in_triangle(rng: &mut impl Rng, [a, b, c]: [Point; 3]) -> Point {
    let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
    if u + v > 1.0 {
        (u, v) = (1.0 - u, 1.0 - v);
    }
    let p = a + (b - a) * u + (c - a) * v;
    let g = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
    g.lerp(p, 0.9)
}

/// Barycentric containment with a small absolute tolerance scaled by the
/// triangle's size.
pub fn in_triangle_loose(p: Point, [a, b, c]: [Point; 3]) -> bool {
    let area = (b - a).cross(c - a);
    let scale = a.dist(b).max(b.dist(c)).max(c.dist(a)).max(1.0);
    let tol = 1e-9 * scale * scale;
    let w = [(c - b).cross(p - b), (a - c).cross(p - c), (b - a).cross(p - a)];
    if area > 0.0 {
        w.iter().all(|&x| x >= -tol)
    } else {
        w.iter().all(|&x| x <= tol)
    }
}

/// Small dynamic scene: static frame and interior nodes plus one to three
/// movers, with an ego start and goal across the box.
#[derive(Clone, Debug)]
pub struct Scene {
    pub nodes: Vec<NodeState>,
    pub start: Point,
    pub goal: Point,
}

pub const SCENE_SIZE: f64 = 12.0;
pub const SCENE_RADIUS: f64 = 0.1;
pub const SCENE_SPEED: f64 = 1.0;

pub fn small_scene(rng: &mut impl Rng) -> Scene {
    let s = SCENE_SIZE;
    let mut nodes = Vec::new();
    let mut push = |p: Point, v: Vec2, kind: NodeKind| {
        let id = nodes.len() as u64;
        nodes.push(NodeState::new(id, p, v, SCENE_RADIUS, kind).expect("valid node"));
    };
    let frame = [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s), (s / 2.0, 0.0), (s / 2.0, s)];
    for (x, y) in frame {
        let j = Point::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        push(Point::new(x, y) + j, Vec2::ZERO, NodeKind::Static);
    }
    let dynamic = rng.gen_range(1..=3);
    let interior = rng.gen_range(2..=(15 - 6 - dynamic));
    for _ in 0..interior {
        let p = Point::new(rng.gen_range(1.5..s - 1.5), rng.gen_range(1.0..s - 1.0));
        push(p, Vec2::ZERO, NodeKind::Static);
    }
    for _ in 0..dynamic {
        // crosses the start-goal line and stays inside the frame for at least 14 s
        let (y0, y1) = if rng.gen_bool(0.5) { (1.0, s - 1.0) } else { (s - 1.0, 1.0) };
        let p0 = Point::new(rng.gen_range(2.0..s - 2.0), y0 + rng.gen_range(-0.5..0.5));
        let p1 = Point::new(rng.gen_range(2.0..s - 2.0), y1 + rng.gen_range(-0.5..0.5));
        let v = (p1 - p0) * (1.0 / rng.gen_range(14.0..20.0));
        push(p0, v, NodeKind::Dynamic);
    }
    let start = Point::new(1.0, s / 2.0 + rng.gen_range(-1.0..1.0));
    let goal = Point::new(s - 1.0, s / 2.0 + rng.gen_range(-1.0..1.0));
    Scene { nodes, start, goal }
}

pub fn scene_params() -> SearchParams {
    SearchParams {
        ego_speed: SCENE_SPEED,
        width_threshold: 2.0 * SCENE_RADIUS,
        horizon: f64::INFINITY,
    }
}

/// Mesh at time 0, raw velocities and a Timed A* channel for the scene.
pub fn scene_channel(scene: &Scene) -> Option<(Mesh, Vec<Vec2>, Channel)> {
    let mesh = build_mesh_at(&scene.nodes, 0.0, 0.0).ok()?;
    let vel: Vec<Vec2> = mesh.nodes().iter().map(|n| n.vel).collect();
    let dual = build_dual_toward(&mesh, scene.start, scene.goal, SCENE_RADIUS);
    let start_tri = mesh.locate(scene.start)?;
    let goal_tri = dual.goal_triangle()?;
    let channel = timed_astar(&mesh, &dual, &vel, scene.start, start_tri, goal_tri, &scene_params()).ok()??;
    Some((mesh, vel, channel))
}

/// First connectivity change of the mesh, found by rebuilding it from
/// scratch on a grid ten times finer than `resolution` up to the last
/// arrival time of the channel.
///
/// Returns the first grid time at which the rebuilt triangle set differs
/// from the initial one, with the channel indices of the triangles that no
/// longer exist and are still ahead of the ego at that time.
pub fn rebuild_first_change(nodes: &[NodeState], mesh: &Mesh, channel: &Channel, resolution: f64) -> Option<(f64, Vec<usize>)> {
    let sets = |m: &Mesh| {
        let mut v: Vec<[NodeId; 3]> = m.triangles().iter().map(|t| m.vertex_set(t.id)).collect();
        v.sort();
        v
    };
    let initial = sets(mesh);
    let end = channel.eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t0 = channel.topology_time;
    let mut j: u64 = 0;
    loop {
        let t = t0 + (j as f64 / 10.0) * resolution;
        if t >= end {
            return None;
        }
        j += 1;
        let Ok(rebuilt) = build_mesh_at(nodes, mesh.time(), t) else {
            continue;
        };
        if sets(&rebuilt) == initial {
            continue;
        }
        let hit = channel
            .triangles
            .iter()
            .enumerate()
            .filter(|&(i, &tri)| t < channel.eta[i] && rebuilt.find_by_vertex_set(&mesh.vertex_set(tri)).is_none())
            .map(|(i, _)| i)
            .collect();
        return Some((t, hit));
    }
}

/// Violations of the sequence invariants: anchor continuity, window
/// contiguity, unaffectedness and subgoal containment.
pub fn sequence_violations(seq: &ChannelSequence, now: f64, resolution: f64) -> Vec<String> {
    let mut out = Vec::new();
    let segs = &seq.segments;
    if segs.is_empty() {
        out.push("empty sequence".into());
        return out;
    }
    if segs[0].entry != Entry::Start || segs[0].window_start != now {
        out.push("first segment does not start at the query".into());
    }
    for (i, w) in segs.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if a.window_end != Some(b.window_start) {
            out.push(format!("gap between windows {i} and {}", i + 1));
        }
        let next = seq.mesh_of(b);
        match b.entry {
            Entry::Anchor => {
                if a.anchor_set() != next.vertex_set(b.triangles[0]) {
                    out.push(format!("anchor of segment {i} is not the first triangle of {}", i + 1));
                }
            }
            Entry::Point => {
                if !in_triangle_loose(a.subgoal, next.corners(b.triangles[0])) {
                    out.push(format!("subgoal of segment {i} is outside the first triangle of {}", i + 1));
                }
            }
            Entry::Start => out.push(format!("segment {} re-enters from the start", i + 1)),
        }
        if b.start != a.subgoal {
            out.push(format!("segment {} does not start at the previous subgoal", i + 1));
        }
    }
    for (i, s) in segs.iter().enumerate() {
        if let Some(end) = s.window_end {
            if end < s.window_start {
                out.push(format!("window {i} is reversed"));
            }
        }
        let mesh = seq.mesh_of(s);
        let k = s.triangles.len() - 1;
        if s.source.triangles[..=k] != s.triangles[..] {
            out.push(format!("segment {i} is not a prefix of its channel"));
        }
        // restrict sampling to the window, boundary sample included
        let mut kept = s.source.prefix(k);
        if let Some(end) = s.window_end {
            for eta in &mut kept.eta {
                *eta = eta.min(end + 0.5 * resolution);
            }
        }
        match compute_event_time(&kept, mesh, &s.velocities, resolution) {
            Ok(None) => {}
            Ok(Some(r)) if Some(r.time) == s.window_end => {}
            other => out.push(format!("segment {i} is affected inside its window: {other:?}")),
        }
        // subgoal containment against the anchor extrapolated to the window end
        let dt = s.window_end.map_or(0.0, |e| e - mesh.time());
        let corners = mesh.triangles()[s.anchor.0].vertices.map(|v| mesh.node(v).position_at(dt));
        if !in_triangle_loose(s.subgoal, corners) {
            out.push(format!("subgoal of segment {i} lies outside its anchor"));
        }
    }
    if seq.termination == Termination::ReachedGoal {
        let last = segs.last().expect("non-empty");
        if last.window_end.is_some() || last.subgoal != seq.goal {
            out.push("final segment does not end at the goal".into());
        }
    }
    out
}

/// Random edge-connected corridor of at most `max_len` triangles over a
/// random mesh, with random node radii.
pub fn random_corridor(rng: &mut impl Rng, max_len: usize) -> Option<(Corridor, Vec<TriId>, Mesh)> {
    let n = rng.gen_range(8..30);
    let nodes: Vec<NodeState> = uniform_points(rng, n, 10.0)
        .into_iter()
        .enumerate()
        .map(|(i, p)| NodeState::stationary(i as u64, p, rng.gen_range(0.0..0.15), NodeKind::Static))
        .collect();
    let mesh = build_mesh_at(&nodes, 0.0, 0.0).ok()?;
    let len = rng.gen_range(1..=max_len);
    let mut tris = vec![TriId(rng.gen_range(0..mesh.triangles().len()))];
    while tris.len() < len {
        let here = *tris.last().expect("non-empty");
        let options: Vec<TriId> = mesh.neighbors(here).into_iter().flatten().filter(|t| !tris.contains(t)).collect();
        if options.is_empty() {
            break;
        }
        tris.push(options[rng.gen_range(0..options.len())]);
    }
    Some((Corridor::from_mesh(&mesh, &tris), tris, mesh))
}

fn segments_intersect(p: Point, q: Point, a: Point, b: Point) -> bool {
    let scale = p.dist(q).max(a.dist(b)).max(1.0);
    let eps = 1e-12 * scale * scale;
    let sign = |x: f64| if x.abs() <= eps { 0 } else { x.signum() as i32 };
    let s1 = sign((q - p).cross(a - p));
    let s2 = sign((q - p).cross(b - p));
    let s3 = sign((b - a).cross(p - a));
    let s4 = sign((b - a).cross(q - a));
    s1 * s2 <= 0 && s3 * s4 <= 0
}

/// Shortest path from `start` to `target` that crosses each shrunk portal in
/// order, by Dijkstra over the visibility graph of the shrunk portal
/// endpoints. Infinite when no such path exists.
pub fn visibility_shortest(portals: &[(Point, Point)], start: Point, target: Point) -> f64 {
    // node list: (point, portal level); start at level 0, portal k at k + 1
    let mut pts = vec![(start, 0usize)];
    for (k, &(l, r)) in portals.iter().enumerate() {
        pts.push((l, k + 1));
        pts.push((r, k + 1));
    }
    pts.push((target, portals.len() + 1));
    let n = pts.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[0] = 0.0;
    let mut done = vec![false; n];
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) else {
            break;
        };
        done[u] = true;
        let (pu, lu) = pts[u];
        for v in 0..n {
            let (pv, lv) = pts[v];
            if lv <= lu || done[v] {
                continue;
            }
            let visible = (lu + 1..lv).all(|k| {
                let (l, r) = portals[k - 1];
                segments_intersect(pu, pv, l, r)
            });
            if visible {
                dist[v] = dist[v].min(dist[u] + pu.dist(pv));
            }
        }
    }
    dist[n - 1]
}

/// Portals of consecutive corridor triangles, each endpoint moved inward by
/// the padding plus its node radius. `None` if a portal vanishes.
pub fn shrunk_portals(corridor: &Corridor, pad: f64) -> Option<Vec<(Point, Point)>> {
    corridor
        .triangles
        .windows(2)
        .map(|w| {
            let shared: Vec<usize> = (0..3).filter(|&k| w[1].ids.contains(&w[0].ids[k])).collect();
            let (a, b) = (w[0].corners[shared[0]], w[0].corners[shared[1]]);
            let (ra, rb) = (w[0].radii[shared[0]] + pad, w[0].radii[shared[1]] + pad);
            let len = a.dist(b);
            (len > ra + rb).then(|| (a.lerp(b, ra / len), b.lerp(a, rb / len)))
        })
        .collect()
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Points sampled along every edge of the polyline that fall outside all
/// corridor triangles.
pub fn outside_samples(points: &[Point], corridor: &Corridor, per_edge: usize) -> usize {
    let mut bad = 0;
    for w in points.windows(2) {
        for s in 0..=per_edge {
            let p = w[0].lerp(w[1], s as f64 / per_edge as f64);
            if !corridor.triangles.iter().any(|t| in_triangle_loose(p, t.corners)) {
                bad += 1;
            }
        }
    }
    bad
}
