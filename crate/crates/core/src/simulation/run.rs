use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::events::DEFAULT_SAMPLE_RESOLUTION;
use crate::funnel::{funnel, round_corners, Corridor, FunnelError, PathPolyline};
use crate::geometry::{NodeId, NodeKind, NodeState, Point};
use crate::search::{astar_preferring, timed_astar_preferring, Channel, Preference, SearchParams};
use crate::sequencer::{generate_sequence_preferring, subgoal, SequencerConfig};
use crate::transmission::TransmissionConfig;
use crate::triangulation::{build_dual_toward, build_mesh_at, Mesh, TriId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Proposed,
    TimedAstar,
    Astar,
}

impl MethodId {
    pub const ALL: [MethodId; 3] = [MethodId::Proposed, MethodId::TimedAstar, MethodId::Astar];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Proposed => "proposed",
            MethodId::TimedAstar => "timed_astar",
            MethodId::Astar => "astar",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(MethodId::Proposed),
            "timed_astar" | "timed-astar" => Ok(MethodId::TimedAstar),
            "astar" => Ok(MethodId::Astar),
            other => Err(format!("unknown method '{other}' (expected proposed, timed_astar or astar)")),
        }
    }
}

/// Default search discount on the previous plan's edges.
pub const DEFAULT_ROUTE_DISCOUNT: f64 = 0.15;

/// Planner and loop settings shared by all methods. Fields left `None` are
/// derived from the scenario's ego.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub transmission: TransmissionConfig,
    pub sample_resolution: f64,
    pub width_threshold: Option<f64>,
    pub padding: Option<f64>,
    pub max_segments: usize,
    pub tau_threshold: f64,
    pub replan_interval: f64,
    pub dt: f64,
    /// Keep stepping after the goal is reached, up to the time limit.
    pub run_to_limit: bool,
    /// Search discount on edges the previous plan crossed, in [0, 1).
    pub route_discount: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            transmission: TransmissionConfig::default(),
            sample_resolution: DEFAULT_SAMPLE_RESOLUTION,
            width_threshold: None,
            padding: None,
            max_segments: 5,
            tau_threshold: 10.0,
            replan_interval: 0.1,
            dt: 0.1,
            run_to_limit: false,
            route_discount: DEFAULT_ROUTE_DISCOUNT,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.transmission.validate().map_err(|e| e.to_string())?;
        let positive = [
            ("sample_resolution", self.sample_resolution),
            ("tau_threshold", self.tau_threshold),
            ("replan_interval", self.replan_interval),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.route_discount) {
            return Err(format!("route_discount must be in [0, 1), got {}", self.route_discount));
        }
        if self.max_segments == 0 {
            return Err("max_segments must be >= 1".into());
        }
        if let Some(p) = self.padding {
            if !(p >= 0.0) {
                return Err(format!("padding must be >= 0, got {p}"));
            }
        }
        if let Some(w) = self.width_threshold {
            if w.is_nan() {
                return Err("width_threshold must be a number".into());
            }
        }
        Ok(())
    }

    pub fn padding_for(&self, ego_radius: f64) -> f64 {
        self.padding.unwrap_or(ego_radius + 0.1)
    }

    pub fn width_for(&self, ego_radius: f64) -> f64 {
        self.width_threshold.unwrap_or_else(|| SearchParams::default_width_threshold(ego_radius))
    }

    pub fn sequencer(&self, scenario: &Scenario) -> SequencerConfig {
        SequencerConfig {
            max_segments: self.max_segments,
            tau_threshold: self.tau_threshold,
            transmission: true,
            transmission_cfg: self.transmission,
            width_threshold: self.width_for(scenario.ego.radius),
            sample_resolution: self.sample_resolution,
            horizon: scenario.time_limit,
            ..SequencerConfig::for_ego(scenario.ego.radius, scenario.ego.speed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub method: MethodId,
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub cycles_attempted: u32,
    pub cycles_succeeded: u32,
    pub collision_count: u32,
    pub collided: bool,
    /// Wall-clock seconds spent in each planning cycle.
    pub latency: Vec<f64>,
}

/// Executed ego state between planning cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub ego: Point,
    pub path: Option<PathPolyline>,
    /// Distance already travelled along `path`.
    pub progress: f64,
}

impl SimState {
    pub fn new(ego: Point) -> Self {
        SimState {
            t: 0.0,
            ego,
            path: None,
            progress: 0.0,
        }
    }
}

/// Advances the clock by `dt` and moves the ego `speed * dt` along its
/// current path. Without a path the ego holds position. Scripted objects are
/// a function of the clock and need no state.
pub fn step(state: &SimState, speed: f64, dt: f64) -> SimState {
    let mut next = state.clone();
    next.t = state.t + dt;
    if let Some(path) = &state.path {
        next.progress = state.progress + speed * dt;
        next.ego = path.point_at(next.progress);
    }
    next
}

/// Whether the ego disc strictly overlaps any non-virtual node disc.
pub fn detect_collision(ego: Point, ego_radius: f64, nodes: &[NodeState]) -> bool {
    nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Virtual)
        .any(|n| ego.dist(n.pos) < ego_radius + n.radius)
}

/// What one planning cycle produced, for rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub path: PathPolyline,
    /// Corner positions of the channel triangles the path runs through.
    pub channel: Vec<[Point; 3]>,
    /// Node ids of the mesh edges the first channel crosses.
    pub route: Vec<(NodeId, NodeId)>,
}

/// Snapshot of one simulation step.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub ego: Point,
    pub nodes: Vec<NodeState>,
    pub mesh_edges: Vec<(Point, Point)>,
    /// Plan of the latest cycle, `None` when that cycle failed.
    pub plan: Option<Plan>,
}

/// Scenario nodes plus boundary nodes at time `t`.
pub fn nodes_at(scenario: &Scenario, virtual_nodes: &[NodeState], t: f64) -> Vec<NodeState> {
    let mut nodes = scenario.object_states_at(t);
    nodes.extend_from_slice(virtual_nodes);
    nodes
}

fn corners(mesh: &Mesh, tris: &[TriId]) -> Vec<[Point; 3]> {
    tris.iter().map(|&t| mesh.corners(t)).collect()
}

fn rounded_funnel(corridor: &Corridor, from: Point, to: Point, pad: f64) -> Result<PathPolyline, FunnelError> {
    funnel(corridor, from, to, pad).map(|p| round_corners(&p, corridor, pad))
}

fn route_of(mesh: &Mesh, channel: &Channel) -> Vec<(NodeId, NodeId)> {
    channel.crossings.iter().map(|&(a, b)| (mesh.node(a).id, mesh.node(b).id)).collect()
}

/// One planning cycle of `method` from `ego` at time `t`, favouring the
/// edges in `preferred`.
pub fn plan(
    scenario: &Scenario,
    nodes: &[NodeState],
    t: f64,
    ego: Point,
    method: MethodId,
    cfg: &SimConfig,
    preferred: &Preference,
) -> Option<Plan> {
    let r = scenario.ego.radius;
    let goal = scenario.goal;
    let pad = cfg.padding_for(r);
    let mesh = build_mesh_at(nodes, t, t).ok()?;
    match method {
        MethodId::Astar | MethodId::TimedAstar => {
            let dual = build_dual_toward(&mesh, ego, goal, r);
            let start_tri = mesh.locate(ego)?;
            let goal_tri = dual.goal_triangle()?;
            let params = SearchParams {
                ego_speed: scenario.ego.speed,
                width_threshold: cfg.width_for(r),
                horizon: scenario.time_limit,
            };
            let channel = if method == MethodId::Astar {
                astar_preferring(&mesh, &dual, ego, start_tri, goal_tri, &params, preferred)
            } else {
                let raw: Vec<_> = mesh.nodes().iter().map(|n| n.vel).collect();
                timed_astar_preferring(&mesh, &dual, &raw, ego, start_tri, goal_tri, &params, preferred)
            }
            .ok()??;
            let path = rounded_funnel(&Corridor::from_mesh(&mesh, &channel.triangles), ego, goal, pad).ok()?;
            Some(Plan {
                path,
                channel: corners(&mesh, &channel.triangles),
                route: route_of(&mesh, &channel),
            })
        }
        MethodId::Proposed => {
            let seq = generate_sequence_preferring(nodes, t, ego, goal, &cfg.sequencer(scenario), preferred).ok()?;
            let first = &seq.segments[0];
            let m0 = seq.mesh_of(first);
            let target = match first.window_end {
                None => goal,
                // the subgoal keeps clearance at the event time; re-derive it
                // against the present corners the path is extracted on, with
                // the same clearance the funnel keeps from them
                Some(_) => {
                    let radii = m0.triangles()[first.anchor.0].vertices.map(|i| m0.node(i).radius);
                    subgoal(m0.corners(first.anchor), radii, first.subgoal, pad)
                }
            };
            let mut path = rounded_funnel(&Corridor::from_mesh(m0, &first.triangles), ego, target, pad).ok()?;
            let mut channel = corners(m0, &first.triangles);
            let mut from = first.subgoal;
            for (i, seg) in seq.segments.iter().enumerate().skip(1) {
                let mesh = seq.mesh_of(seg);
                let to = if seg.window_end.is_none() { goal } else { seg.subgoal };
                let Ok(mut piece) = rounded_funnel(&Corridor::from_mesh(mesh, &seg.triangles), from, to, pad) else {
                    break;
                };
                piece.segment.iter_mut().for_each(|s| *s = i);
                path.extend(&piece);
                channel.extend(corners(mesh, &seg.triangles));
                from = to;
            }
            Some(Plan {
                path,
                channel,
                route: route_of(m0, &first.source),
            })
        }
    }
}

/// Runs one scenario with one method, reporting every step to `observe`.
pub fn run_scenario_traced(scenario: &Scenario, method: MethodId, cfg: &SimConfig, mut observe: impl FnMut(&Frame)) -> Metrics {
    simulate(scenario, method, cfg, Some(&mut observe))
}

/// Runs one scenario with one method.
pub fn run_scenario(scenario: &Scenario, method: MethodId, cfg: &SimConfig) -> Metrics {
    simulate(scenario, method, cfg, None)
}

fn simulate(scenario: &Scenario, method: MethodId, cfg: &SimConfig, mut observe: Option<&mut dyn FnMut(&Frame)>) -> Metrics {
    let virtual_nodes = scenario.virtual_nodes();
    let r = scenario.ego.radius;
    let steps = (scenario.time_limit / cfg.dt).round() as u64;
    let replan_every = ((cfg.replan_interval / cfg.dt).round() as u64).max(1);
    let mut state = SimState::new(scenario.start);
    let mut metrics = Metrics {
        scenario: scenario.id.clone(),
        method,
        completed: false,
        completion_time: None,
        cycles_attempted: 0,
        cycles_succeeded: 0,
        collision_count: 0,
        collided: false,
        latency: Vec::new(),
    };
    let mut touching = false;
    let mut last_plan: Option<Plan> = None;
    let mut last_route: Vec<(NodeId, NodeId)> = Vec::new();

    for k in 0..=steps {
        state.t = k as f64 * cfg.dt;
        let nodes = nodes_at(scenario, &virtual_nodes, state.t);
        let hit = detect_collision(state.ego, r, &nodes);
        if hit && !touching {
            metrics.collision_count += 1;
        }
        touching = hit;
        if !metrics.completed && state.ego.dist(scenario.goal) <= r {
            metrics.completed = true;
            metrics.completion_time = Some(state.t);
            if !cfg.run_to_limit {
                break;
            }
        }
        if k == steps {
            break;
        }
        if !metrics.completed && k % replan_every == 0 {
            let clock = Instant::now();
            // keep to the previous route unless another is clearly better
            let preferred = Preference::new(last_route.iter().copied(), cfg.route_discount);
            let planned = plan(scenario, &nodes, state.t, state.ego, method, cfg, &preferred);
            metrics.latency.push(clock.elapsed().as_secs_f64());
            metrics.cycles_attempted += 1;
            state.progress = 0.0;
            // later segments lie in future geometry; the ego only follows
            // the current one and the next cycle releases the rest
            state.path = planned.as_ref().map(|p| p.path.leading_segment());
            if let Some(p) = &planned {
                metrics.cycles_succeeded += 1;
                last_route.clone_from(&p.route);
            }
            last_plan = planned;
        }
        if metrics.completed {
            state.path = None;
        }
        if let Some(observe) = observe.as_mut() {
            let frame = Frame {
                t: state.t,
                ego: state.ego,
                mesh_edges: build_mesh_at(&nodes, state.t, state.t)
                    .map(|m| m.edges().into_iter().map(|(a, b)| (m.position(a), m.position(b))).collect())
                    .unwrap_or_default(),
                nodes,
                plan: last_plan.clone(),
            };
            observe(&frame);
        }
        state = step(&state, scenario.ego.speed, cfg.dt);
    }
    metrics.collided = metrics.collision_count > 0;
    metrics
}
