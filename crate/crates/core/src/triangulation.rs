//! Delaunay mesh construction, dual graph, point location and virtual
//! boundary nodes.
//!
//! The mesh is rebuilt from scratch for every snapshot time by incremental
//! insertion followed by Lawson edge flips. Cocircular ties are resolved by
//! a symbolic perturbation of the lifted coordinate ordered by node id, so
//! the resulting mesh depends only on the node set and not on input order.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{
    centroid, closest_on_segment, incircle_raw, orient2d, point_in_triangle, NodeId, NodeKind, NodeState, Point,
};

/// Index of a triangle inside one [`Mesh`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriId(pub usize);

/// Triangle over mesh node indices, counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub id: TriId,
    pub vertices: [usize; 3],
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("need at least 3 distinct node positions, got {0}")]
    TooFewNodes(usize),
    #[error("all node positions are collinear")]
    Collinear,
}

#[derive(Debug, Error, PartialEq)]
pub enum VirtualNodeError {
    #[error("virtual node spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("boundary polyline needs at least 2 points, got {0}")]
    ShortPolyline(usize),
}

/// Delaunay triangulation of a node table at one snapshot time.
///
/// `nodes` hold positions extrapolated to `time`; their velocities are the
/// raw input velocities. Nodes whose position duplicates an earlier node
/// (by id) are kept in the table but belong to no triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    time: f64,
    nodes: Vec<NodeState>,
    index: HashMap<NodeId, usize>,
    triangles: Vec<Triangle>,
    adjacency: Vec<[Option<TriId>; 3]>,
    by_vertex_set: HashMap<[NodeId; 3], TriId>,
}

impl Mesh {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeState {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, t: TriId) -> Option<&Triangle> {
        self.triangles.get(t.0)
    }

    /// Neighbor across the edge opposite vertex slot `i`, per triangle.
    pub fn adjacency(&self) -> &[[Option<TriId>; 3]] {
        &self.adjacency
    }

    pub fn neighbors(&self, t: TriId) -> [Option<TriId>; 3] {
        self.adjacency[t.0]
    }

    pub fn position(&self, idx: usize) -> Point {
        self.nodes[idx].pos
    }

    pub fn corners(&self, t: TriId) -> [Point; 3] {
        let v = self.triangles[t.0].vertices;
        [self.position(v[0]), self.position(v[1]), self.position(v[2])]
    }

    pub fn vertex_ids(&self, t: TriId) -> [NodeId; 3] {
        let v = self.triangles[t.0].vertices;
        [self.nodes[v[0]].id, self.nodes[v[1]].id, self.nodes[v[2]].id]
    }

    /// Order-free identity of a triangle across rebuilt meshes.
    pub fn vertex_set(&self, t: TriId) -> [NodeId; 3] {
        let mut ids = self.vertex_ids(t);
        ids.sort();
        ids
    }

    pub fn find_by_vertex_set(&self, set: &[NodeId; 3]) -> Option<TriId> {
        let mut key = *set;
        key.sort();
        self.by_vertex_set.get(&key).copied()
    }

    /// Mesh node indices of the edge opposite vertex slot `slot`.
    pub fn edge(&self, t: TriId, slot: usize) -> (usize, usize) {
        let v = self.triangles[t.0].vertices;
        (v[(slot + 1) % 3], v[(slot + 2) % 3])
    }

    /// Slot in `t` whose opposite edge is shared with `other`.
    pub fn shared_slot(&self, t: TriId, other: TriId) -> Option<usize> {
        self.adjacency[t.0].iter().position(|n| *n == Some(other))
    }

    /// Undirected edges as ordered index pairs `(lo, hi)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                let v = t.vertices;
                [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]
            })
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn interior_edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|n| n.is_some()).count() / 2
    }

    /// Node indices that are vertices of some triangle.
    pub fn meshed_nodes(&self) -> Vec<usize> {
        let mut used = vec![false; self.nodes.len()];
        for t in &self.triangles {
            for &v in &t.vertices {
                used[v] = true;
            }
        }
        (0..self.nodes.len()).filter(|&i| used[i]).collect()
    }

    /// Triangle containing `p`, boundary inclusive; lowest id wins ties.
    pub fn locate(&self, p: Point) -> Option<TriId> {
        self.triangles.iter().find_map(|t| {
            let [a, b, c] = self.corners(t.id);
            point_in_triangle(p, a, b, c).then_some(t.id)
        })
    }
}

/// Builds the mesh for nodes whose states are given at time 0.
pub fn build_mesh(nodes: &[NodeState], t: f64) -> Result<Mesh, MeshError> {
    build_mesh_at(nodes, 0.0, t)
}

/// Builds the mesh at time `t` for node states valid at `origin`.
pub fn build_mesh_at(nodes: &[NodeState], origin: f64, t: f64) -> Result<Mesh, MeshError> {
    let dt = t - origin;
    let moved: Vec<NodeState> = nodes
        .iter()
        .map(|n| NodeState {
            pos: n.position_at(dt.max(0.0)),
            ..*n
        })
        .collect();
    let index: HashMap<NodeId, usize> = moved.iter().enumerate().map(|(i, n)| (n.id, i)).collect();

    let mut order: Vec<usize> = (0..moved.len()).collect();
    order.sort_by_key(|&i| moved[i].id);

    let mut builder = Builder::new(&moved);
    builder.run(&order)?;
    let (triangles, adjacency) = builder.finish();

    let mut mesh = Mesh {
        time: t,
        nodes: moved,
        index,
        triangles,
        adjacency,
        by_vertex_set: HashMap::new(),
    };
    let sets: Vec<_> = mesh.triangles.iter().map(|t| (mesh.vertex_set(t.id), t.id)).collect();
    mesh.by_vertex_set = sets.into_iter().collect();
    Ok(mesh)
}

struct Builder<'a> {
    nodes: &'a [NodeState],
    tris: Vec<[usize; 3]>,
    // directed edge (u, v) -> triangle that has it in counterclockwise order
    edges: HashMap<(usize, usize), usize>,
    stack: Vec<(usize, usize)>,
}

impl<'a> Builder<'a> {
    fn new(nodes: &'a [NodeState]) -> Self {
        Builder {
            nodes,
            tris: Vec::with_capacity(nodes.len() * 2),
            edges: HashMap::with_capacity(nodes.len() * 6),
            stack: Vec::new(),
        }
    }

    fn pos(&self, i: usize) -> Point {
        self.nodes[i].pos
    }

    fn run(&mut self, order: &[usize]) -> Result<(), MeshError> {
        // first two distinct positions
        let mut distinct: Vec<usize> = Vec::new();
        for &i in order {
            if distinct.iter().all(|&j| self.pos(j) != self.pos(i)) {
                distinct.push(i);
                if distinct.len() == 2 {
                    break;
                }
            }
        }
        let unique = {
            let mut ps: Vec<(u64, u64)> = order
                .iter()
                .map(|&i| (self.pos(i).x.to_bits(), self.pos(i).y.to_bits()))
                .collect();
            ps.sort_unstable();
            ps.dedup();
            ps.len()
        };
        if unique < 3 {
            return Err(MeshError::TooFewNodes(unique));
        }
        let (a, b) = (distinct[0], distinct[1]);
        let c = order
            .iter()
            .copied()
            .find(|&i| orient2d(self.pos(a), self.pos(b), self.pos(i)) != 0.0)
            .ok_or(MeshError::Collinear)?;
        if orient2d(self.pos(a), self.pos(b), self.pos(c)) > 0.0 {
            self.add_triangle([a, b, c]);
        } else {
            self.add_triangle([a, c, b]);
        }
        for &i in order {
            if i != a && i != b && i != c {
                self.insert(i);
            }
        }
        Ok(())
    }

    fn add_triangle(&mut self, v: [usize; 3]) -> usize {
        let t = self.tris.len();
        self.tris.push(v);
        self.link(t);
        t
    }

    fn link(&mut self, t: usize) {
        let v = self.tris[t];
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), t);
        }
    }

    fn unlink(&mut self, t: usize) {
        let v = self.tris[t];
        for k in 0..3 {
            self.edges.remove(&(v[k], v[(k + 1) % 3]));
        }
    }

    fn replace(&mut self, t: usize, v: [usize; 3]) {
        self.unlink(t);
        self.tris[t] = v;
        self.link(t);
    }

    fn insert(&mut self, p: usize) {
        let pp = self.pos(p);
        for t in 0..self.tris.len() {
            let v = self.tris[t];
            let o = [
                orient2d(self.pos(v[1]), self.pos(v[2]), pp),
                orient2d(self.pos(v[2]), self.pos(v[0]), pp),
                orient2d(self.pos(v[0]), self.pos(v[1]), pp),
            ];
            if o.iter().any(|&x| x < 0.0) {
                continue;
            }
            let zeros = o.iter().filter(|&&x| x == 0.0).count();
            match zeros {
                0 => self.split_triangle(t, p),
                1 => {
                    let slot = o.iter().position(|&x| x == 0.0).unwrap();
                    self.split_edge(t, slot, p);
                }
                // coincides with an existing vertex
                _ => return,
            }
            self.legalize();
            return;
        }
        self.insert_outside(p);
        self.legalize();
    }

    fn split_triangle(&mut self, t: usize, p: usize) {
        let [a, b, c] = self.tris[t];
        self.replace(t, [a, b, p]);
        let t1 = self.add_triangle([b, c, p]);
        let t2 = self.add_triangle([c, a, p]);
        for tri in [t, t1, t2] {
            self.push_edges(tri);
        }
    }

    fn split_edge(&mut self, t: usize, slot: usize, p: usize) {
        let v = self.tris[t];
        let (u, w, opp) = (v[(slot + 1) % 3], v[(slot + 2) % 3], v[slot]);
        let other = self.edges.get(&(w, u)).copied();
        // t = (opp, u, w) with p on edge u-w
        self.replace(t, [opp, u, p]);
        let t1 = self.add_triangle([opp, p, w]);
        self.push_edges(t);
        self.push_edges(t1);
        if let Some(o) = other {
            let ov = self.tris[o];
            let far = ov.iter().copied().find(|&x| x != u && x != w).unwrap();
            // o = (far, w, u)
            self.replace(o, [far, w, p]);
            let t3 = self.add_triangle([far, p, u]);
            self.push_edges(o);
            self.push_edges(t3);
        }
    }

    fn insert_outside(&mut self, p: usize) {
        let pp = self.pos(p);
        let mut hull: Vec<(usize, usize)> = self
            .edges
            .keys()
            .copied()
            .filter(|&(u, v)| !self.edges.contains_key(&(v, u)))
            .filter(|&(u, v)| orient2d(self.pos(u), self.pos(v), pp) < 0.0)
            .collect();
        hull.sort_unstable();
        for (u, v) in hull {
            let t = self.add_triangle([v, u, p]);
            self.push_edges(t);
        }
    }

    fn push_edges(&mut self, t: usize) {
        let v = self.tris[t];
        for k in 0..3 {
            self.stack.push((v[k], v[(k + 1) % 3]));
        }
    }

    fn legalize(&mut self) {
        while let Some((u, v)) = self.stack.pop() {
            let (Some(&t1), Some(&t2)) = (self.edges.get(&(u, v)), self.edges.get(&(v, u))) else {
                continue;
            };
            let a = third(self.tris[t1], u, v);
            let d = third(self.tris[t2], u, v);
            if !self.illegal(u, v, a, d) {
                continue;
            }
            // quad u, d, v, a is convex; replace diagonal u-v by a-d
            self.unlink(t1);
            self.unlink(t2);
            self.tris[t1] = [a, u, d];
            self.tris[t2] = [d, v, a];
            self.link(t1);
            self.link(t2);
            self.stack.extend([(u, d), (d, v), (v, a), (a, u)]);
        }
    }

    /// Whether `d` lies inside the circumcircle of counterclockwise
    /// `(u, v, a)`, with cocircular ties broken by perturbing the lifted
    /// coordinate of the highest-id point first.
    fn illegal(&self, u: usize, v: usize, a: usize, d: usize) -> bool {
        let pts = [u, v, a, d];
        let det = incircle_raw(self.pos(u), self.pos(v), self.pos(a), self.pos(d));
        if det != 0.0 {
            return det > 0.0;
        }
        let mut prio = [0usize, 1, 2, 3];
        prio.sort_by_key(|&k| std::cmp::Reverse(self.nodes[pts[k]].id));
        for k in prio {
            let others: Vec<Point> = (0..4).filter(|&j| j != k).map(|j| self.pos(pts[j])).collect();
            let minor = orient2d(others[0], others[1], others[2]);
            if minor != 0.0 {
                let cofactor = if k % 2 == 0 { minor } else { -minor };
                return cofactor > 0.0;
            }
        }
        false
    }

    fn finish(self) -> (Vec<Triangle>, Vec<[Option<TriId>; 3]>) {
        let triangles: Vec<Triangle> = self
            .tris
            .iter()
            .enumerate()
            .map(|(i, &vertices)| Triangle { id: TriId(i), vertices })
            .collect();
        let adjacency = self
            .tris
            .iter()
            .map(|v| {
                let mut n = [None; 3];
                for (slot, entry) in n.iter_mut().enumerate() {
                    let (a, b) = (v[(slot + 1) % 3], v[(slot + 2) % 3]);
                    *entry = self.edges.get(&(b, a)).map(|&t| TriId(t));
                }
                n
            })
            .collect();
        (triangles, adjacency)
    }
}

fn third(tri: [usize; 3], u: usize, v: usize) -> usize {
    tri.into_iter().find(|&x| x != u && x != v).unwrap()
}

/// Evenly spaced virtual nodes along a boundary polyline.
///
/// Node ids start at `first_id`. Each polyline piece is subdivided into the
/// smallest number of equal steps no longer than `spacing`; shared corners
/// and a closing point equal to the first point are emitted once.
pub fn generate_virtual_nodes(
    boundary: &[Point],
    spacing: f64,
    radius: f64,
    first_id: u64,
) -> Result<Vec<NodeState>, VirtualNodeError> {
    if !(spacing > 0.0) {
        return Err(VirtualNodeError::NonPositiveSpacing(spacing));
    }
    if boundary.len() < 2 {
        return Err(VirtualNodeError::ShortPolyline(boundary.len()));
    }
    let closed = boundary.len() > 2 && boundary.first() == boundary.last();
    let mut points: Vec<Point> = vec![boundary[0]];
    for w in boundary.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        if len == 0.0 {
            continue;
        }
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for s in 1..=steps {
            points.push(a.lerp(b, s as f64 / steps as f64));
        }
    }
    if closed && points.len() > 1 {
        points.pop();
    }
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(i, pos)| NodeState::stationary(first_id + i as u64, pos, radius, NodeKind::Virtual))
        .collect())
}

/// Default virtual node spacing: narrow enough that an ego disc of radius
/// `ego_radius` cannot pass between neighbors.
pub fn default_virtual_spacing(ego_radius: f64) -> f64 {
    2.0 * ego_radius * 0.9
}

/// Crossing record for one dual edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualEdge {
    pub a: TriId,
    pub b: TriId,
    /// Mesh node indices of the shared triangle edge.
    pub nodes: (usize, usize),
}

/// One node per triangle, placed by goal attraction, and one edge per
/// interior mesh edge.
#[derive(Clone, Debug)]
pub struct DualGraph {
    goal: Point,
    goal_tri: Option<TriId>,
    placements: Vec<Point>,
    edges: Vec<DualEdge>,
    // per triangle: (neighbor, edge index)
    incident: Vec<Vec<(TriId, usize)>>,
}

impl DualGraph {
    pub fn goal(&self) -> Point {
        self.goal
    }

    pub fn goal_triangle(&self) -> Option<TriId> {
        self.goal_tri
    }

    pub fn node_count(&self) -> usize {
        self.placements.len()
    }

    pub fn placement(&self, t: TriId) -> Point {
        self.placements[t.0]
    }

    pub fn placements(&self) -> &[Point] {
        &self.placements
    }

    pub fn edges(&self) -> &[DualEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &DualEdge {
        &self.edges[e]
    }

    pub fn incident(&self, t: TriId) -> &[(TriId, usize)] {
        &self.incident[t.0]
    }

    pub fn contains(&self, t: TriId) -> bool {
        t.0 < self.placements.len()
    }
}

/// Builds the dual graph.
///
/// Each dual node sits on its triangle's shared edge whose nearest point to
/// the goal is closest, clamped away from the edge endpoints by
/// `min(0.1 * edge length, ego_radius)`. The triangle containing the goal
/// is placed at the goal itself; a triangle without shared edges at its
/// centroid.
pub fn build_dual(mesh: &Mesh, goal: Point, ego_radius: f64) -> DualGraph {
    dual_with(mesh, goal, ego_radius, false, |a, b| closest_on_segment(goal, a, b))
}

/// Builds the dual graph with placements attracted to the line from `start`
/// to `goal`.
///
/// The dual node sits on the same edge as in [`build_dual`], at the edge
/// point nearest to the segment `start`-`goal` (ties toward the goal), with
/// the same endpoint margin. In long strips of slender triangles this keeps
/// consecutive placements from alternating between the strip's two sides.
///
/// Only shared edges wide enough for the ego (length minus both node radii
/// at least `2 * ego_radius`) are considered, unless a triangle has none.
/// A dual node on a wall gap would otherwise drag every channel through it.
pub fn build_dual_toward(mesh: &Mesh, start: Point, goal: Point, ego_radius: f64) -> DualGraph {
    dual_with(mesh, goal, ego_radius, true, |a, b| nearest_to_segment(a, b, start, goal))
}

/// Point of segment `a`-`b` closest to segment `p`-`q`; among equally close
/// points the one nearest to `q`.
fn nearest_to_segment(a: Point, b: Point, p: Point, q: Point) -> Point {
    let d = b - a;
    let e = q - p;
    let denom = d.cross(e);
    if denom != 0.0 {
        let s = (p - a).cross(e) / denom;
        let u = (p - a).cross(d) / denom;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) {
            return a + d * s;
        }
    }
    let seg_dist = |x: Point| x.dist(closest_on_segment(x, p, q));
    [a, b, closest_on_segment(p, a, b), closest_on_segment(q, a, b)]
        .into_iter()
        .min_by(|x, y| {
            seg_dist(*x)
                .total_cmp(&seg_dist(*y))
                .then(x.dist(q).total_cmp(&y.dist(q)))
        })
        .expect("four candidates")
}

fn dual_with(
    mesh: &Mesh,
    goal: Point,
    ego_radius: f64,
    passable_only: bool,
    anchor: impl Fn(Point, Point) -> Point,
) -> DualGraph {
    let goal_tri = mesh.locate(goal);
    let n = mesh.triangles().len();
    let mut placements = Vec::with_capacity(n);
    for t in mesh.triangles() {
        if Some(t.id) == goal_tri {
            placements.push(goal);
            continue;
        }
        let shared: Vec<(usize, usize)> = (0..3)
            .filter(|&slot| mesh.neighbors(t.id)[slot].is_some())
            .map(|slot| mesh.edge(t.id, slot))
            .collect();
        let wide = |&(i, j): &(usize, usize)| {
            mesh.position(i).dist(mesh.position(j)) - mesh.node(i).radius - mesh.node(j).radius >= 2.0 * ego_radius
        };
        let mut candidates: Vec<_> = shared.iter().copied().filter(|e| !passable_only || wide(e)).collect();
        if candidates.is_empty() {
            candidates = shared;
        }
        let mut best: Option<(f64, Point)> = None;
        for (i, j) in candidates {
            let (a, b) = (mesh.position(i), mesh.position(j));
            let d = closest_on_segment(goal, a, b).dist(goal);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, clamp_margin(anchor(a, b), a, b, ego_radius)));
            }
        }
        placements.push(match best {
            Some((_, q)) => q,
            None => {
                let [a, b, c] = mesh.corners(t.id);
                centroid(a, b, c)
            }
        });
    }

    let mut edges = Vec::new();
    let mut incident = vec![Vec::new(); n];
    for t in mesh.triangles() {
        for slot in 0..3 {
            if let Some(o) = mesh.neighbors(t.id)[slot] {
                if t.id < o {
                    let e = edges.len();
                    edges.push(DualEdge {
                        a: t.id,
                        b: o,
                        nodes: mesh.edge(t.id, slot),
                    });
                    incident[t.id.0].push((o, e));
                    incident[o.0].push((t.id, e));
                }
            }
        }
    }
    for list in &mut incident {
        list.sort();
    }
    DualGraph {
        goal,
        goal_tri,
        placements,
        edges,
        incident,
    }
}

fn clamp_margin(q: Point, a: Point, b: Point, ego_radius: f64) -> Point {
    let len = a.dist(b);
    if len == 0.0 {
        return a;
    }
    let margin = (0.1 * len).min(ego_radius.max(0.0)) / len;
    let s = ((q - a).dot(b - a) / (len * len)).clamp(margin, 1.0 - margin);
    a.lerp(b, s)
}
