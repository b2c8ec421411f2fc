use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NodeKind, NodeState, Point, Vec2};
use crate::triangulation::{default_virtual_spacing, generate_virtual_nodes};

/// Version of the scenario file layout.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioNode {
    pub id: u64,
    pub kind: NodeKind,
    pub radius: f64,
    pub waypoints: Vec<Waypoint>,
}

impl ScenarioNode {
    /// Position and velocity at time `t`. Positions are interpolated between
    /// waypoints, held before the first one and extrapolated with the last
    /// segment's velocity after the last one.
    pub fn state_at(&self, t: f64) -> (Point, Vec2) {
        let w = &self.waypoints;
        if w.len() == 1 || t < w[0].t {
            return (w[0].pos(), Vec2::ZERO);
        }
        let i = w.partition_point(|p| p.t <= t).clamp(1, w.len() - 1);
        let (a, b) = (w[i - 1], w[i]);
        let vel = (b.pos() - a.pos()) * (1.0 / (b.t - a.t));
        (a.pos() + vel * (t - a.t), vel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub speed: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub nodes: Vec<ScenarioNode>,
    /// Boundary polylines, each a list of `[x, y]` points.
    #[serde(default)]
    pub boundaries: Vec<Vec<[f64; 2]>>,
    pub start: Point,
    pub goal: Point,
    pub ego: EgoSpec,
    pub time_limit: f64,
    /// Spacing of the generated boundary nodes; defaults from the ego radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_spacing: Option<f64>,
}

fn schema_version() -> u32 {
    SCENARIO_SCHEMA_VERSION
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("node {0}: no waypoints")]
    NoWaypoints(u64),
    #[error("node {0}: waypoint times must be strictly increasing")]
    UnorderedWaypoints(u64),
    #[error("node {0}: {1:?} node must not move")]
    MovingStationary(u64, NodeKind),
    #[error("node {0}: kind ego is reserved")]
    EgoNode(u64),
    #[error("node {0}: invalid radius")]
    BadRadius(u64),
    #[error("duplicate node id {0}")]
    DuplicateId(u64),
    #[error("non-finite value in scenario")]
    NonFinite,
    #[error("start and goal coincide")]
    StartIsGoal,
    #[error("time limit must be positive")]
    TimeLimit,
    #[error("ego speed must be positive and radius non-negative")]
    Ego,
    #[error("boundary polyline {0} needs at least 2 points")]
    ShortBoundary(usize),
    #[error("virtual spacing must be positive")]
    Spacing,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(ScenarioError::DuplicateId(n.id));
            }
            if n.kind == NodeKind::Ego {
                return Err(ScenarioError::EgoNode(n.id));
            }
            if !(n.radius >= 0.0 && n.radius.is_finite()) {
                return Err(ScenarioError::BadRadius(n.id));
            }
            if n.waypoints.is_empty() {
                return Err(ScenarioError::NoWaypoints(n.id));
            }
            if n.waypoints.iter().any(|w| !(w.t.is_finite() && w.x.is_finite() && w.y.is_finite())) {
                return Err(ScenarioError::NonFinite);
            }
            if n.waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return Err(ScenarioError::UnorderedWaypoints(n.id));
            }
            if n.kind.is_stationary() && n.waypoints.windows(2).any(|w| w[0].pos() != w[1].pos()) {
                return Err(ScenarioError::MovingStationary(n.id, n.kind));
            }
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            if b.len() < 2 {
                return Err(ScenarioError::ShortBoundary(i));
            }
            if b.iter().flatten().any(|v| !v.is_finite()) {
                return Err(ScenarioError::NonFinite);
            }
        }
        if !(self.start.is_finite() && self.goal.is_finite()) {
            return Err(ScenarioError::NonFinite);
        }
        if self.start == self.goal {
            return Err(ScenarioError::StartIsGoal);
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(ScenarioError::TimeLimit);
        }
        if !(self.ego.speed > 0.0 && self.ego.speed.is_finite() && self.ego.radius >= 0.0 && self.ego.radius.is_finite()) {
            return Err(ScenarioError::Ego);
        }
        if let Some(s) = self.virtual_spacing {
            if !(s > 0.0) {
                return Err(ScenarioError::Spacing);
            }
        }
        Ok(())
    }

    /// Virtual nodes along every boundary, with ids after the largest scenario id.
    pub fn virtual_nodes(&self) -> Vec<NodeState> {
        let spacing = self.virtual_spacing.unwrap_or_else(|| default_virtual_spacing(self.ego.radius));
        let mut next = self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
        let mut out = Vec::new();
        for b in &self.boundaries {
            let pts: Vec<Point> = b.iter().map(|&[x, y]| Point::new(x, y)).collect();
            let nodes = generate_virtual_nodes(&pts, spacing, 0.0, next).expect("validated boundary");
            next += nodes.len() as u64;
            out.extend(nodes);
        }
        out
    }

    /// Scripted node states at time `t`, without virtual nodes.
    pub fn object_states_at(&self, t: f64) -> Vec<NodeState> {
        self.nodes
            .iter()
            .map(|n| {
                let (pos, vel) = n.state_at(t);
                let vel = if n.kind.is_stationary() { Vec2::ZERO } else { vel };
                NodeState {
                    id: crate::geometry::NodeId(n.id),
                    pos,
                    vel,
                    radius: n.radius,
                    kind: n.kind,
                }
            })
            .collect()
    }

    /// True when no scripted node ever moves.
    pub fn is_static(&self) -> bool {
        self.nodes.iter().all(|n| n.waypoints.windows(2).all(|w| w[0].pos() == w[1].pos()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mover() -> ScenarioNode {
        ScenarioNode {
            id: 3,
            kind: NodeKind::Dynamic,
            radius: 0.3,
            waypoints: vec![
                Waypoint { t: 0.0, x: 0.0, y: 0.0 },
                Waypoint { t: 2.0, x: 2.0, y: 0.0 },
                Waypoint { t: 3.0, x: 2.0, y: 1.0 },
            ],
        }
    }

    pub(crate) fn scenario() -> Scenario {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            id: "s".into(),
            nodes: vec![mover()],
            boundaries: vec![vec![[0.0, -3.0], [10.0, -3.0]], vec![[0.0, 3.0], [10.0, 3.0]]],
            start: Point::new(0.5, 0.0),
            goal: Point::new(9.0, 0.0),
            ego: EgoSpec { speed: 2.0, radius: 0.5 },
            time_limit: 10.0,
            virtual_spacing: None,
        }
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let n = mover();
        assert_eq!(n.state_at(0.5), (Point::new(0.5, 0.0), Vec2::new(1.0, 0.0)));
        assert_eq!(n.state_at(2.5), (Point::new(2.0, 0.5), Vec2::new(0.0, 1.0)));
        assert_eq!(n.state_at(5.0), (Point::new(2.0, 3.0), Vec2::new(0.0, 1.0)));
        assert_eq!(n.state_at(-1.0), (Point::new(0.0, 0.0), Vec2::ZERO));
    }

    #[test]
    fn validation() {
        assert_eq!(scenario().validate(), Ok(()));
        let mut s = scenario();
        s.nodes[0].waypoints[1].t = 0.0;
        assert_eq!(s.validate(), Err(ScenarioError::UnorderedWaypoints(3)));
        let mut s = scenario();
        s.goal = s.start;
        assert_eq!(s.validate(), Err(ScenarioError::StartIsGoal));
        let mut s = scenario();
        s.nodes[0].kind = NodeKind::Static;
        assert!(matches!(s.validate(), Err(ScenarioError::MovingStationary(3, _))));
        let mut s = scenario();
        s.nodes.push(mover());
        assert_eq!(s.validate(), Err(ScenarioError::DuplicateId(3)));
    }

    #[test]
    fn virtual_ids_follow_scenario_ids() {
        let s = scenario();
        let v = s.virtual_nodes();
        assert_eq!(v[0].id.0, 4);
        // 10 m at 0.9 m spacing: 12 steps, 13 nodes per wall
        assert_eq!(v.len(), 26);
        assert!(v.iter().all(|n| n.kind == NodeKind::Virtual));
    }

    #[test]
    fn json_round_trip() {
        let s = scenario();
        let text = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
