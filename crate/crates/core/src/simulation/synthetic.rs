use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::{EgoSpec, Scenario, ScenarioNode, Waypoint, SCENARIO_SCHEMA_VERSION};
use crate::geometry::{NodeKind, Point};

/// Straight-road pedestrian crossing generator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub road_length: f64,
    pub road_width: f64,
    /// Wall extension past each road end.
    pub wall_overhang: f64,
    pub min_pedestrians: u32,
    pub max_pedestrians: u32,
    pub min_speed: f64,
    pub max_speed: f64,
    pub pedestrian_radius: f64,
    /// Pedestrians start this far outside the walls at most.
    pub spawn_margin: f64,
    /// Keep-out distance from the start and goal along the road.
    pub end_clearance: f64,
    pub ego_speed: f64,
    pub ego_radius: f64,
    pub time_limit: f64,
    /// Generate standing pedestrians only.
    pub stationary: bool,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            road_length: 30.0,
            road_width: 6.0,
            wall_overhang: 2.0,
            min_pedestrians: 10,
            max_pedestrians: 20,
            min_speed: 0.25,
            max_speed: 1.0,
            pedestrian_radius: 0.3,
            spawn_margin: 1.0,
            end_clearance: 3.0,
            ego_speed: 2.0,
            ego_radius: 0.5,
            time_limit: 25.0,
            stationary: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid synthetic parameters: {0}")]
    Invalid(&'static str),
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m| Err(SyntheticError::Invalid(m));
        let finite = [
            self.road_length,
            self.road_width,
            self.wall_overhang,
            self.min_speed,
            self.max_speed,
            self.pedestrian_radius,
            self.spawn_margin,
            self.end_clearance,
            self.ego_speed,
            self.ego_radius,
            self.time_limit,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all values must be finite");
        }
        if !(self.road_length > 0.0 && self.road_width > 0.0 && self.time_limit > 0.0) {
            return bad("road length, road width and time limit must be positive");
        }
        if self.min_pedestrians > self.max_pedestrians {
            return bad("min_pedestrians exceeds max_pedestrians");
        }
        if !(0.0 <= self.min_speed && self.min_speed <= self.max_speed) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(self.ego_speed > 0.0 && self.ego_radius >= 0.0 && self.pedestrian_radius >= 0.0) {
            return bad("ego speed must be positive and radii non-negative");
        }
        if !(self.wall_overhang >= 0.0 && self.spawn_margin >= 0.0 && self.end_clearance >= 0.0) {
            return bad("margins must be non-negative");
        }
        if 2.0 * self.end_clearance >= self.road_length {
            return bad("end clearance leaves no room for pedestrians");
        }
        Ok(())
    }
}

/// Deterministic synthetic scenario for `seed`.
///
/// The road runs along +x from the origin, bounded by walls at
/// `y = ±road_width / 2`. Pedestrians walk perpendicular to the road from
/// the side they start on toward the opposite side.
pub fn generate_synthetic(seed: u64, params: &SyntheticParams) -> Result<Scenario, SyntheticError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = params.road_width / 2.0;
    let count = rng.gen_range(params.min_pedestrians..=params.max_pedestrians);
    let mut nodes = Vec::with_capacity(count as usize);
    for id in 0..count as u64 {
        let x = rng.gen_range(params.end_clearance..=params.road_length - params.end_clearance);
        let y = rng.gen_range(-half - params.spawn_margin..=half + params.spawn_margin);
        let speed = rng.gen_range(params.min_speed..=params.max_speed);
        // walk toward, then across, the far side of the road
        let flip = rng.gen_bool(0.5);
        let heading = if y > 0.0 || (y == 0.0 && flip) { -1.0 } else { 1.0 };
        let (kind, waypoints) = if params.stationary {
            (NodeKind::Static, vec![Waypoint { t: 0.0, x, y }])
        } else {
            let end = y + heading * speed * params.time_limit;
            (
                NodeKind::Dynamic,
                vec![
                    Waypoint { t: 0.0, x, y },
                    Waypoint { t: params.time_limit, x, y: end },
                ],
            )
        };
        nodes.push(ScenarioNode {
            id,
            kind,
            radius: params.pedestrian_radius,
            waypoints,
        });
    }
    let (x0, x1) = (-params.wall_overhang, params.road_length + params.wall_overhang);
    Ok(Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        id: format!("synthetic-{seed}"),
        nodes,
        boundaries: vec![vec![[x0, -half], [x1, -half]], vec![[x0, half], [x1, half]]],
        start: Point::new(0.0, 0.0),
        goal: Point::new(params.road_length, 0.0),
        ego: EgoSpec {
            speed: params.ego_speed,
            radius: params.ego_radius,
        },
        time_limit: params.time_limit,
        virtual_spacing: None,
    })
}
