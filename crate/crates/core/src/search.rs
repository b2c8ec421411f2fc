//! Channel search on the dual graph: plain A* over static widths and the
//! time-aware Timed A* that checks each crossing at the ego's arrival time.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geometry::{NodeId, Point, Vec2};
use crate::triangulation::{DualGraph, Mesh, TriId};

/// Edge-connected sequence of triangles from the ego triangle to the goal
/// triangle, for the mesh topology at `topology_time`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub topology_time: f64,
    /// Ego position the arrival times are measured from.
    pub start: Point,
    pub triangles: Vec<TriId>,
    /// Dual node placement of each triangle.
    pub placements: Vec<Point>,
    /// Mesh node indices of the edge crossed between step `i` and `i + 1`.
    pub crossings: Vec<(usize, usize)>,
    /// Absolute arrival time at each triangle's dual node.
    pub eta: Vec<f64>,
    /// Travel time to the goal triangle's dual node, seconds.
    pub cost: f64,
}

impl Channel {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn first(&self) -> TriId {
        self.triangles[0]
    }

    pub fn last(&self) -> TriId {
        *self.triangles.last().expect("non-empty channel")
    }

    /// Ego path along the dual placements: start, then one point per triangle.
    pub fn waypoints(&self) -> Vec<Point> {
        std::iter::once(self.start).chain(self.placements.iter().copied()).collect()
    }

    /// Prefix `0..=k` of this channel.
    pub fn prefix(&self, k: usize) -> Channel {
        let n = (k + 1).min(self.triangles.len());
        Channel {
            topology_time: self.topology_time,
            start: self.start,
            triangles: self.triangles[..n].to_vec(),
            placements: self.placements[..n].to_vec(),
            crossings: self.crossings[..n.saturating_sub(1)].to_vec(),
            eta: self.eta[..n].to_vec(),
            cost: self.eta[n - 1] - self.topology_time,
        }
    }
}

/// Search costs for one open-list entry. `g` and `h` are in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchCosts {
    pub g: f64,
    pub h: f64,
}

impl SearchCosts {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub ego_speed: f64,
    /// Minimum free gap of a crossed edge after subtracting node radii.
    pub width_threshold: f64,
    /// Travel time from the search start past which expansions are pruned
    /// (Timed A* only).
    pub horizon: f64,
}

impl SearchParams {
    /// Width threshold default: ego diameter plus 0.2 m clearance.
    pub fn default_width_threshold(ego_radius: f64) -> f64 {
        2.0 * ego_radius + 0.2
    }
}

/// Edges a search should favour, such as those the previous plan crossed.
///
/// Crossing a preferred edge costs `1 - discount` of its travel time in the
/// search order. Arrival times, admission and the reported cost are not
/// discounted. Pairs are stored with the smaller id first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Preference {
    edges: Vec<(NodeId, NodeId)>,
    pub discount: f64,
}

impl Preference {
    pub fn new(edges: impl IntoIterator<Item = (NodeId, NodeId)>, discount: f64) -> Self {
        let mut edges: Vec<_> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort();
        edges.dedup();
        Preference { edges, discount }
    }

    pub fn none() -> Self {
        Preference::default()
    }

    pub fn contains(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    fn scale(&self, mesh: &Mesh, (a, b): (usize, usize)) -> f64 {
        if self.discount > 0.0 && self.contains(mesh.node(a).id, mesh.node(b).id) {
            1.0 - self.discount
        } else {
            1.0
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("ego speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("unknown triangle {0:?}")]
    UnknownTriangle(TriId),
}

/// Free width of the mesh edge `(a, b)` at absolute time `t`, with node
/// positions extrapolated linearly using `velocities`.
pub fn edge_gap(mesh: &Mesh, velocities: &[Vec2], (a, b): (usize, usize), t: f64) -> f64 {
    let dt = (t - mesh.time()).max(0.0);
    let pa = mesh.position(a) + velocities[a] * dt;
    let pb = mesh.position(b) + velocities[b] * dt;
    pa.dist(pb) - mesh.node(a).radius - mesh.node(b).radius
}

/// Arrival time from `ego` along `hops` at `ego_speed`.
pub fn estimate_eta(hops: &[Point], ego: Point, ego_speed: f64) -> Result<f64, SearchError> {
    if !(ego_speed > 0.0) {
        return Err(SearchError::NonPositiveSpeed(ego_speed));
    }
    let mut prev = ego;
    let mut dist = 0.0;
    for &h in hops {
        dist += prev.dist(h);
        prev = h;
    }
    Ok(dist / ego_speed)
}

/// A* over static costs: Euclidean distance between dual placements, with a
/// crossing admitted when its gap at the mesh time clears the threshold.
pub fn astar(
    mesh: &Mesh,
    dual: &DualGraph,
    start: Point,
    start_tri: TriId,
    goal_tri: TriId,
    params: &SearchParams,
) -> Result<Option<Channel>, SearchError> {
    astar_preferring(mesh, dual, start, start_tri, goal_tri, params, &Preference::none())
}

/// [`astar`] with a bias toward `preferred` edges.
pub fn astar_preferring(
    mesh: &Mesh,
    dual: &DualGraph,
    start: Point,
    start_tri: TriId,
    goal_tri: TriId,
    params: &SearchParams,
    preferred: &Preference,
) -> Result<Option<Channel>, SearchError> {
    let velocities = vec![Vec2::ZERO; mesh.nodes().len()];
    let now = mesh.time();
    run(mesh, dual, start, start_tri, goal_tri, params, f64::INFINITY, preferred, |edge, _| {
        edge_gap(mesh, &velocities, edge, now) >= params.width_threshold
    })
}

/// Timed A*: costs are arrival times and each crossing is admitted only if
/// the gap, extrapolated to the arrival time at the entered triangle, clears
/// the threshold. `velocities` are aligned with `mesh.nodes()`.
pub fn timed_astar(
    mesh: &Mesh,
    dual: &DualGraph,
    velocities: &[Vec2],
    start: Point,
    start_tri: TriId,
    goal_tri: TriId,
    params: &SearchParams,
) -> Result<Option<Channel>, SearchError> {
    timed_astar_preferring(mesh, dual, velocities, start, start_tri, goal_tri, params, &Preference::none())
}

/// [`timed_astar`] with a bias toward `preferred` edges.
#[allow(clippy::too_many_arguments)]
pub fn timed_astar_preferring(
    mesh: &Mesh,
    dual: &DualGraph,
    velocities: &[Vec2],
    start: Point,
    start_tri: TriId,
    goal_tri: TriId,
    params: &SearchParams,
    preferred: &Preference,
) -> Result<Option<Channel>, SearchError> {
    run(mesh, dual, start, start_tri, goal_tri, params, params.horizon, preferred, |edge, t| {
        edge_gap(mesh, velocities, edge, t) >= params.width_threshold
    })
}

#[derive(Clone, Copy, PartialEq)]
struct OpenKey {
    f: f64,
    h: f64,
    tri: TriId,
}

impl Eq for OpenKey {}

impl Ord for OpenKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.h.total_cmp(&other.h))
            .then(self.tri.cmp(&other.tri))
    }
}

impl PartialOrd for OpenKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    mesh: &Mesh,
    dual: &DualGraph,
    start: Point,
    start_tri: TriId,
    goal_tri: TriId,
    params: &SearchParams,
    horizon: f64,
    preferred: &Preference,
    admit: impl Fn((usize, usize), f64) -> bool,
) -> Result<Option<Channel>, SearchError> {
    if !(params.ego_speed > 0.0) {
        return Err(SearchError::NonPositiveSpeed(params.ego_speed));
    }
    for t in [start_tri, goal_tri] {
        if !dual.contains(t) {
            return Err(SearchError::UnknownTriangle(t));
        }
    }
    let speed = params.ego_speed;
    let goal = dual.goal();
    let heuristic = |t: TriId| {
        if t == goal_tri {
            0.0
        } else {
            dual.placement(t).dist(goal) / speed
        }
    };
    let t0 = mesh.time();
    let n = dual.node_count();
    // `g` orders the search and may be discounted; `time` is the travel time
    let mut g = vec![f64::INFINITY; n];
    let mut time = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(TriId, usize)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    g[start_tri.0] = start.dist(dual.placement(start_tri)) / speed;
    time[start_tri.0] = g[start_tri.0];
    open.push(Reverse(OpenKey {
        f: g[start_tri.0] + heuristic(start_tri),
        h: heuristic(start_tri),
        tri: start_tri,
    }));

    while let Some(Reverse(OpenKey { tri, .. })) = open.pop() {
        if closed[tri.0] {
            continue;
        }
        closed[tri.0] = true;
        if tri == goal_tri {
            return Ok(Some(reconstruct(dual, start, t0, &time, &parent, goal_tri)));
        }
        let here = dual.placement(tri);
        for &(next, e) in dual.incident(tri) {
            if closed[next.0] {
                continue;
            }
            let hop = here.dist(dual.placement(next)) / speed;
            let crossed = dual.edge(e).nodes;
            let cand = g[tri.0] + hop * preferred.scale(mesh, crossed);
            let travel = time[tri.0] + hop;
            if cand >= g[next.0] {
                continue;
            }
            if travel > horizon {
                continue;
            }
            if !admit(crossed, t0 + travel) {
                continue;
            }
            g[next.0] = cand;
            time[next.0] = travel;
            parent[next.0] = Some((tri, e));
            let h = heuristic(next);
            open.push(Reverse(OpenKey { f: cand + h, h, tri: next }));
        }
    }
    Ok(None)
}

fn reconstruct(
    dual: &DualGraph,
    start: Point,
    t0: f64,
    time: &[f64],
    parent: &[Option<(TriId, usize)>],
    goal_tri: TriId,
) -> Channel {
    let mut triangles = vec![goal_tri];
    let mut crossings = Vec::new();
    let mut cur = goal_tri;
    while let Some((prev, e)) = parent[cur.0] {
        crossings.push(dual.edge(e).nodes);
        triangles.push(prev);
        cur = prev;
    }
    triangles.reverse();
    crossings.reverse();
    let eta = triangles.iter().map(|t| t0 + time[t.0]).collect();
    let placements = triangles.iter().map(|&t| dual.placement(t)).collect();
    Channel {
        topology_time: t0,
        start,
        triangles,
        placements,
        crossings,
        eta,
        cost: time[goal_tri.0],
    }
}
