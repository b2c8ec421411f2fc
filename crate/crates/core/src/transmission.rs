//! Motion information transmission: dynamic nodes hand attenuated copies of
//! their velocity to mesh neighbors they are heading toward.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NodeKind, Vec2};
use crate::triangulation::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    /// Proximity balance, meters.
    pub alpha: f64,
    /// Heading-sharpness exponent.
    pub beta: f64,
    /// Number of synchronous propagation sweeps.
    pub passes: u32,
    /// Whether boundary (virtual) nodes take transmitted velocities. Off by
    /// default: walls sampled as collinear nodes would otherwise be predicted
    /// to buckle, producing spurious topology events along every boundary.
    #[serde(default)]
    pub to_virtual: bool,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig {
            alpha: 1.0,
            beta: 1.0,
            passes: 1,
            to_virtual: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TransmissionError {
    #[error("displacement vector is zero")]
    ZeroDisplacement,
    #[error("invalid transmission config: {0}")]
    InvalidConfig(&'static str),
}

impl TransmissionConfig {
    pub fn validate(&self) -> Result<(), TransmissionError> {
        if !(self.alpha >= 0.0) {
            return Err(TransmissionError::InvalidConfig("alpha must be >= 0"));
        }
        if !(self.beta >= 0.0) {
            return Err(TransmissionError::InvalidConfig("beta must be >= 0"));
        }
        if self.passes == 0 {
            return Err(TransmissionError::InvalidConfig("passes must be >= 1"));
        }
        Ok(())
    }
}

/// Projects velocity `v` of a node onto the displacement `p` to a neighbor.
///
/// The result keeps the direction of `v` and is scaled by
/// `alpha / (|p| + alpha) * |pi/2 - theta|^beta * cos(theta)` where `theta`
/// is the unsigned angle between `v` and `p`; it is zero when the node is
/// not moving toward the neighbor.
pub fn project_velocity(v: Vec2, p: Vec2, cfg: &TransmissionConfig) -> Result<Vec2, TransmissionError> {
    let dist = p.norm();
    if dist == 0.0 {
        return Err(TransmissionError::ZeroDisplacement);
    }
    let dot = v.dot(p);
    let speed = v.norm();
    if dot <= 0.0 || speed == 0.0 {
        return Ok(Vec2::ZERO);
    }
    let cos = (dot / (speed * dist)).min(1.0);
    let theta = cos.acos();
    let proximity = if cfg.alpha == 0.0 { 0.0 } else { cfg.alpha / (dist + cfg.alpha) };
    let heading = (FRAC_PI_2 - theta).abs().powf(cfg.beta);
    Ok(v * (proximity * heading * cos))
}

/// Runs `cfg.passes` synchronous sweeps over every directed mesh edge and
/// returns the per-node velocities aligned with `mesh.nodes()`.
///
/// Each sweep reads start-of-sweep velocities; a neighbor takes a
/// projection only if it is strictly larger than what it already holds.
/// Positions and kinds are untouched.
pub fn transmit(mesh: &Mesh, cfg: &TransmissionConfig) -> Vec<Vec2> {
    let initial: Vec<Vec2> = mesh.nodes().iter().map(|n| n.vel).collect();
    transmit_from(mesh, &initial, cfg)
}

/// [`transmit`] starting from an explicit velocity table.
pub fn transmit_from(mesh: &Mesh, velocities: &[Vec2], cfg: &TransmissionConfig) -> Vec<Vec2> {
    let mut directed: Vec<(usize, usize)> = mesh.edges().into_iter().flat_map(|(a, b)| [(a, b), (b, a)]).collect();
    directed.sort_unstable();

    let mut current = velocities.to_vec();
    for _ in 0..cfg.passes {
        let start = current.clone();
        for &(i, j) in &directed {
            let vi = start[i];
            if vi == Vec2::ZERO {
                continue;
            }
            let p = mesh.position(j) - mesh.position(i);
            let Ok(projected) = project_velocity(vi, p, cfg) else {
                continue;
            };
            if !cfg.to_virtual && mesh.node(j).kind == NodeKind::Virtual {
                continue;
            }
            if vi.dot(p) > 0.0 && current[j].norm() < projected.norm() {
                current[j] = projected;
            }
        }
    }
    current
}
