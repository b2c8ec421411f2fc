//! Weaving of channel segments across predicted topology changes.
//!
//! Each cycle builds the mesh at the current topology time, spreads motion,
//! searches a channel, and predicts its first event. The part of the channel
//! the ego can traverse before the event becomes a segment ending at an anchor
//! triangle; the next cycle starts from a subgoal inside that anchor at the
//! event time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{compute_event_time, EventError, DEFAULT_SAMPLE_RESOLUTION};
use crate::geometry::{centroid, closest_on_segment, point_in_triangle, NodeId, NodeState, Point, Vec2};
use crate::search::{timed_astar_preferring, Channel, Preference, SearchError, SearchParams};
use crate::transmission::{transmit, TransmissionConfig, TransmissionError};
use crate::triangulation::{build_dual_toward, build_mesh_at, Mesh, MeshError, TriId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequencerConfig {
    pub max_segments: usize,
    /// Planning horizon measured from the initial topology time, seconds.
    pub tau_threshold: f64,
    pub transmission: bool,
    pub transmission_cfg: TransmissionConfig,
    pub width_threshold: f64,
    pub sample_resolution: f64,
    pub ego_radius: f64,
    pub ego_speed: f64,
    /// Search horizon passed to Timed A*, measured from each cycle's start.
    pub horizon: f64,
}

impl SequencerConfig {
    /// Defaults for an ego of the given size and speed.
    pub fn for_ego(ego_radius: f64, ego_speed: f64) -> Self {
        SequencerConfig {
            max_segments: 5,
            tau_threshold: 10.0,
            transmission: true,
            transmission_cfg: TransmissionConfig::default(),
            width_threshold: SearchParams::default_width_threshold(ego_radius),
            sample_resolution: DEFAULT_SAMPLE_RESOLUTION,
            ego_radius,
            ego_speed,
            horizon: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        let bad = |m: &'static str| Err(SequenceError::InvalidConfig(m));
        if self.max_segments == 0 {
            return bad("max_segments must be >= 1");
        }
        if !(self.tau_threshold > 0.0) {
            return bad("tau_threshold must be > 0");
        }
        if !(self.sample_resolution > 0.0) {
            return bad("sample_resolution must be > 0");
        }
        if !(self.ego_speed > 0.0) {
            return bad("ego_speed must be > 0");
        }
        if !(self.ego_radius >= 0.0) {
            return bad("ego_radius must be >= 0");
        }
        if self.width_threshold.is_nan() || self.horizon.is_nan() {
            return bad("width_threshold and horizon must be numbers");
        }
        self.transmission_cfg.validate().map_err(SequenceError::Transmission)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("invalid sequencer config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Transmission(#[from] TransmissionError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("start point lies outside the mesh")]
    StartOutside,
    #[error("goal point lies outside the mesh")]
    GoalOutside,
    #[error("no admissible channel in cycle {cycle}")]
    SearchFailed { cycle: usize },
    #[error("ego index {e} is past event index {m}")]
    EgoPastEvent { e: usize, m: usize },
    #[error("index out of range for a channel of {len} triangles")]
    IndexOutOfRange { len: usize },
}

/// Why sequence generation stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Termination {
    /// The last channel reached the goal without an event.
    ReachedGoal,
    MaxSegments,
    TimeThreshold,
    /// Neither an anchor triangle nor the subgoal could be carried into the
    /// next mesh.
    AnchorLost,
    /// A later cycle found no channel; the sequence so far is kept.
    SearchFailed { cycle: usize },
}

/// How a segment joins the one before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    /// First segment, entered from the start point.
    Start,
    /// The first triangle has the vertex set of the previous anchor.
    Anchor,
    /// The previous segment's triangles all changed at its event; the first
    /// triangle is the one containing the previous subgoal.
    Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSegment {
    pub entry: Entry,
    /// Index into [`ChannelSequence::meshes`] of the mesh the triangles refer to.
    pub cycle: usize,
    pub window_start: f64,
    /// Event time closing the window; `None` for a final segment reaching the goal.
    pub window_end: Option<f64>,
    pub triangles: Vec<TriId>,
    /// Vertex ids of each triangle, sorted.
    pub vertex_sets: Vec<[NodeId; 3]>,
    pub anchor: TriId,
    /// Ego position the segment is entered from.
    pub start: Point,
    /// Point inside the anchor the segment leads to (the goal for a final segment).
    pub subgoal: Point,
    /// Channel the segment was cut from.
    pub source: Channel,
    /// Velocities used for prediction in this cycle, aligned with the mesh nodes.
    pub velocities: Vec<Vec2>,
}

impl ChannelSegment {
    pub fn anchor_set(&self) -> [NodeId; 3] {
        *self.vertex_sets.last().expect("segments are non-empty")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSequence {
    pub segments: Vec<ChannelSegment>,
    pub goal: Point,
    pub termination: Termination,
    /// Mesh of every cycle, in order.
    pub meshes: Vec<Mesh>,
}

impl ChannelSequence {
    pub fn mesh_of(&self, seg: &ChannelSegment) -> &Mesh {
        &self.meshes[seg.cycle]
    }

    pub fn dump(&self) -> SequenceDump {
        SequenceDump {
            goal: [self.goal.x, self.goal.y],
            termination: self.termination,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentDump {
                    entry: s.entry,
                    window_start: s.window_start,
                    window_end: s.window_end,
                    triangles: s.vertex_sets.iter().map(|v| v.map(|n| n.0)).collect(),
                    anchor: s.anchor_set().map(|n| n.0),
                    start: [s.start.x, s.start.y],
                    subgoal: [s.subgoal.x, s.subgoal.y],
                })
                .collect(),
        }
    }
}

/// Serializable view of a sequence: vertex ids, windows and subgoals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDump {
    pub goal: [f64; 2],
    pub termination: Termination,
    pub segments: Vec<SegmentDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDump {
    pub entry: Entry,
    pub window_start: f64,
    pub window_end: Option<f64>,
    pub triangles: Vec<[u64; 3]>,
    pub anchor: [u64; 3],
    pub start: [f64; 2],
    pub subgoal: [f64; 2],
}

/// Index of the last triangle kept in a segment, given the ego's triangle
/// index `e` and the event triangle index `m` at the event time.
///
/// Returns `None` for the degenerate cut `e = m = 0`.
pub fn last_triangle_index(e: usize, m: usize, channel_len: usize) -> Result<Option<usize>, SequenceError> {
    if e >= channel_len || m >= channel_len {
        return Err(SequenceError::IndexOutOfRange { len: channel_len });
    }
    if e > m {
        return Err(SequenceError::EgoPastEvent { e, m });
    }
    Ok(if e < m { Some(e) } else { m.checked_sub(1) })
}

/// Distance travelled along the channel's waypoints at `ego_speed` for the
/// time elapsed since its topology time.
fn walked(channel: &Channel, tau: f64, ego_speed: f64) -> f64 {
    (ego_speed * (tau - channel.topology_time)).max(0.0)
}

/// Cumulative arc length from the start to each triangle's waypoint.
fn arc_lengths(channel: &Channel) -> Vec<f64> {
    let mut prev = channel.start;
    let mut acc = 0.0;
    channel
        .placements
        .iter()
        .map(|&p| {
            acc += prev.dist(p);
            prev = p;
            acc
        })
        .collect()
}

/// Index of the channel triangle the ego occupies at `tau` when walking the
/// dual waypoints at `ego_speed`. A triangle counts as entered once its
/// waypoint has been passed.
pub fn ego_index_at(channel: &Channel, tau: f64, ego_speed: f64) -> usize {
    let s = walked(channel, tau, ego_speed);
    if s <= 0.0 || channel.is_empty() {
        return 0;
    }
    let passed = arc_lengths(channel).iter().filter(|&&c| c < s).count();
    passed.min(channel.len() - 1)
}

/// Estimated ego position at `tau` on the same walk as [`ego_index_at`].
pub fn ego_position_at(channel: &Channel, tau: f64, ego_speed: f64) -> Point {
    let mut left = walked(channel, tau, ego_speed);
    let mut prev = channel.start;
    for &p in &channel.placements {
        let hop = prev.dist(p);
        if left <= hop {
            return if hop == 0.0 { p } else { prev.lerp(p, left / hop) };
        }
        left -= hop;
        prev = p;
    }
    prev
}

fn barycentric_inside(p: Point, [a, b, c]: [Point; 3], tol: f64) -> bool {
    let area = (b - a).cross(c - a);
    if area == 0.0 {
        return false;
    }
    let w = [(c - b).cross(p - b) / area, (a - c).cross(p - c) / area, (b - a).cross(p - a) / area];
    w.iter().all(|&x| x >= -tol)
}

fn circle_segment(center: Point, r: f64, a: Point, b: Point, out: &mut Vec<Point>) {
    let d = b - a;
    let f = a - center;
    let qa = d.dot(d);
    if qa == 0.0 {
        return;
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.dot(f) - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return;
    }
    let sq = disc.sqrt();
    for s in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if (0.0..=1.0).contains(&s) {
            out.push(a + d * s);
        }
    }
}

fn circle_circle(c0: Point, r0: f64, c1: Point, r1: f64, out: &mut Vec<Point>) {
    let d = c0.dist(c1);
    if d == 0.0 || d > r0 + r1 || d < (r0 - r1).abs() {
        return;
    }
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let h = (r0 * r0 - a * a).max(0.0).sqrt();
    let u = (c1 - c0) * (1.0 / d);
    let mid = c0 + u * a;
    let perp = Point::new(-u.y, u.x);
    out.push(mid + perp * h);
    out.push(mid - perp * h);
}

/// Point of the anchor triangle closest to `est_ego` that keeps a clearance
/// of `ego_radius + radii[i]` from each corner. Falls back to the centroid
/// when no such point exists.
///
/// The feasible region is the triangle minus three discs, so the optimum is
/// `est_ego` itself, a projection onto an edge or a disc, or an intersection
/// of two of those boundaries.
pub fn subgoal(corners: [Point; 3], radii: [f64; 3], est_ego: Point, ego_radius: f64) -> Point {
    let [a, b, c] = corners;
    let mid = centroid(a, b, c);
    let clear: Vec<f64> = radii.iter().map(|r| ego_radius + r).collect();
    let scale = a.dist(b).max(b.dist(c)).max(c.dist(a)).max(1.0);
    let tol = 1e-9 * scale;
    let edges = [(a, b), (b, c), (c, a)];

    let mut cands = vec![est_ego];
    for &(p, q) in &edges {
        cands.push(closest_on_segment(est_ego, p, q));
    }
    for i in 0..3 {
        let dir = est_ego - corners[i];
        let dir = if dir.norm() > 0.0 { dir } else { mid - corners[i] };
        if dir.norm() > 0.0 {
            cands.push(corners[i] + dir * (clear[i] / dir.norm()));
        }
        for &(p, q) in &edges {
            circle_segment(corners[i], clear[i], p, q, &mut cands);
        }
        for j in i + 1..3 {
            circle_circle(corners[i], clear[i], corners[j], clear[j], &mut cands);
        }
    }

    let feasible = |p: &Point| {
        barycentric_inside(*p, corners, 1e-9) && (0..3).all(|i| p.dist(corners[i]) >= clear[i] - tol)
    };
    let best = cands
        .into_iter()
        .filter(|p| p.is_finite() && feasible(p))
        .min_by(|p, q| p.dist(est_ego).total_cmp(&q.dist(est_ego)));

    let Some(mut p) = best else {
        return mid;
    };
    // pull boundary points strictly inside so exact containment holds
    let mut pull = 1e-9;
    while !point_in_triangle(p, a, b, c) && pull < 1.0 {
        p = p.lerp(mid, pull);
        pull *= 10.0;
    }
    if point_in_triangle(p, a, b, c) {
        p
    } else {
        mid
    }
}

#[allow(clippy::too_many_arguments)]
fn segment_from(
    entry: Entry,
    mesh: &Mesh,
    channel: &Channel,
    velocities: &[Vec2],
    cycle: usize,
    k: usize,
    window: (f64, Option<f64>),
    start: Point,
    subgoal: Point,
) -> ChannelSegment {
    let triangles = channel.triangles[..=k].to_vec();
    ChannelSegment {
        entry,
        cycle,
        window_start: window.0,
        window_end: window.1,
        vertex_sets: triangles.iter().map(|&t| mesh.vertex_set(t)).collect(),
        anchor: triangles[k],
        triangles,
        start,
        subgoal,
        source: channel.clone(),
        velocities: velocities.to_vec(),
    }
}

/// Builds the sequence of channel segments from `start` to `goal` for the
/// node states given at time `now`.
///
/// A search failure in the first cycle is an error; in later cycles it ends
/// the sequence with [`Termination::SearchFailed`].
pub fn generate_sequence(
    nodes: &[NodeState],
    now: f64,
    start: Point,
    goal: Point,
    cfg: &SequencerConfig,
) -> Result<ChannelSequence, SequenceError> {
    generate_sequence_preferring(nodes, now, start, goal, cfg, &Preference::none())
}

/// [`generate_sequence`] with the first search biased toward `preferred`.
pub fn generate_sequence_preferring(
    nodes: &[NodeState],
    now: f64,
    start: Point,
    goal: Point,
    cfg: &SequencerConfig,
    preferred: &Preference,
) -> Result<ChannelSequence, SequenceError> {
    cfg.validate()?;
    let mut segments: Vec<ChannelSegment> = Vec::new();
    let mut meshes: Vec<Mesh> = Vec::new();
    let mut mesh = build_mesh_at(nodes, now, now)?;
    let mut tau = now;
    let mut ego = start;
    let mut anchor: Option<[NodeId; 3]> = None;
    let mut entry = Entry::Start;
    let params = SearchParams {
        ego_speed: cfg.ego_speed,
        width_threshold: cfg.width_threshold,
        horizon: cfg.horizon,
    };

    let termination = loop {
        let cycle = meshes.len();
        let velocities: Vec<Vec2> = if cfg.transmission {
            transmit(&mesh, &cfg.transmission_cfg)
        } else {
            mesh.nodes().iter().map(|n| n.vel).collect()
        };
        let dual = build_dual_toward(&mesh, ego, goal, cfg.ego_radius);
        let goal_tri = dual.goal_triangle().ok_or(SequenceError::GoalOutside)?;
        let start_tri = match anchor {
            None => mesh.locate(ego).ok_or(SequenceError::StartOutside)?,
            Some(set) => mesh.find_by_vertex_set(&set).expect("anchor checked against the mesh"),
        };
        let bias = if cycle == 0 { preferred.clone() } else { Preference::none() };
        let channel = match timed_astar_preferring(&mesh, &dual, &velocities, ego, start_tri, goal_tri, &params, &bias)? {
            Some(ch) => ch,
            None if cycle == 0 => return Err(SequenceError::SearchFailed { cycle }),
            None => break Termination::SearchFailed { cycle },
        };
        let Some(event) = compute_event_time(&channel, &mesh, &velocities, cfg.sample_resolution)? else {
            let last = channel.len() - 1;
            segments.push(segment_from(entry, &mesh, &channel, &velocities, cycle, last, (tau, None), ego, goal));
            meshes.push(mesh);
            break Termination::ReachedGoal;
        };

        let e = ego_index_at(&channel, event.time, cfg.ego_speed);
        let window = (tau, Some(event.time));
        let next = build_mesh_at(nodes, now, event.time)?;
        let est = ego_position_at(&channel, event.time, cfg.ego_speed);
        // keep the longest prefix ending in a triangle that survives the event
        let survivor = last_triangle_index(e, event.index, channel.len())?
            .and_then(|k| (0..=k).rev().find(|&i| next.find_by_vertex_set(&mesh.vertex_set(channel.triangles[i])).is_some()));

        let (k, sg, next_anchor) = match survivor {
            Some(k) => {
                let tri = channel.triangles[k];
                let sg = subgoal(next_corners(&mesh, &next, tri), radii(&mesh, tri), est, cfg.ego_radius);
                (k, sg, Some(mesh.vertex_set(tri)))
            }
            None => {
                // the ego's own triangle changes before it can leave: hold
                // it, aiming at the position reached by the event, and hand
                // over at that point
                let tri = channel.first();
                (0, subgoal(next_corners(&mesh, &next, tri), radii(&mesh, tri), est, cfg.ego_radius), None)
            }
        };
        segments.push(segment_from(entry, &mesh, &channel, &velocities, cycle, k, window, ego, sg));
        meshes.push(mesh);

        if next_anchor.is_none() && next.locate(sg).is_none() {
            break Termination::AnchorLost;
        }
        if segments.len() >= cfg.max_segments {
            break Termination::MaxSegments;
        }
        if event.time - now > cfg.tau_threshold {
            break Termination::TimeThreshold;
        }
        tau = event.time;
        ego = sg;
        entry = if next_anchor.is_some() { Entry::Anchor } else { Entry::Point };
        anchor = next_anchor;
        mesh = next;
    };

    Ok(ChannelSequence {
        segments,
        goal,
        termination,
        meshes,
    })
}

/// Corners of triangle `t` of `mesh` at the time of `next`, taken from the
/// positions of the same nodes in `next`.
fn next_corners(mesh: &Mesh, next: &Mesh, t: TriId) -> [Point; 3] {
    mesh.vertex_ids(t).map(|id| match next.index_of(id) {
        Some(i) => next.position(i),
        None => {
            let i = mesh.index_of(id).expect("vertex of the mesh");
            mesh.node(i).position_at(next.time() - mesh.time())
        }
    })
}

fn radii(mesh: &Mesh, t: TriId) -> [f64; 3] {
    mesh.vertex_ids(t).map(|id| mesh.node(mesh.index_of(id).expect("vertex of the mesh")).radius)
}
