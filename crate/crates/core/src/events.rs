//! Prediction of the first topological event along a channel.
//!
//! For every channel triangle the triangle's vertices and the opposite
//! vertices of its edge neighbors are extrapolated on a fixed time grid up to
//! the ego's arrival at that triangle. The earliest sample at which a probe
//! enters a circumcircle (or a triangle collapses) is the event.

use thiserror::Error;

use crate::geometry::{incircle, orient2d, CircleSide, NodeId, Point, Vec2};
use crate::search::Channel;
use crate::triangulation::{Mesh, TriId};

/// Default sampling step in seconds.
pub const DEFAULT_SAMPLE_RESOLUTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventReport {
    /// Absolute time of the event sample.
    pub time: f64,
    /// Index of the affected triangle within the channel.
    pub index: usize,
    pub triangle: TriId,
    /// Node entering the circumcircle; `None` when the triangle collapsed.
    pub trigger: Option<NodeId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("sample resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("unknown triangle {0:?}")]
    UnknownTriangle(TriId),
}

/// Opposite vertices of the edge-adjacent triangles of `t`, as node ids.
pub fn neighbors_of(mesh: &Mesh, t: TriId) -> Result<Vec<NodeId>, EventError> {
    Ok(neighbor_indices(mesh, t)?.into_iter().map(|i| mesh.node(i).id).collect())
}

/// [`neighbors_of`] as mesh node indices.
pub fn neighbor_indices(mesh: &Mesh, t: TriId) -> Result<Vec<usize>, EventError> {
    let tri = mesh.triangle(t).ok_or(EventError::UnknownTriangle(t))?;
    let mut out: Vec<usize> = Vec::with_capacity(3);
    for n in mesh.neighbors(t).into_iter().flatten() {
        for &v in &mesh.triangles()[n.0].vertices {
            if !tri.vertices.contains(&v) && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// Earliest sampled event along `channel`, or `None` when every triangle
/// stays intact until the ego reaches it.
///
/// Triangle `i` is sampled at `topology_time + j * resolution` for every such
/// time strictly before its arrival time. The earliest event sample over all
/// triangles and probes wins; ties go to the lower channel index. A
/// cocircular sample counts as an event unless the same quadruple was
/// already cocircular at the topology time.
pub fn compute_event_time(
    channel: &Channel,
    mesh: &Mesh,
    velocities: &[Vec2],
    resolution: f64,
) -> Result<Option<EventReport>, EventError> {
    if !(resolution > 0.0) {
        return Err(EventError::NonPositiveResolution(resolution));
    }
    let t0 = channel.topology_time;
    let base = mesh.time();
    let at = |i: usize, t: f64| -> Point { mesh.position(i) + velocities[i] * (t - base).max(0.0) };
    let mut best: Option<(u64, EventReport)> = None;

    for (index, (&tri, &eta)) in channel.triangles.iter().zip(&channel.eta).enumerate() {
        let verts = mesh.triangle(tri).ok_or(EventError::UnknownTriangle(tri))?.vertices;
        let probes = neighbor_indices(mesh, tri)?;
        let moving = verts.iter().chain(&probes).any(|&i| velocities[i] != Vec2::ZERO);
        if !moving {
            continue;
        }
        let initially_cocircular: Vec<bool> = probes
            .iter()
            .map(|&p| {
                let r = incircle(at(verts[0], t0), at(verts[1], t0), at(verts[2], t0), at(p, t0));
                matches!(r, Ok(res) if res.side == CircleSide::Cocircular)
            })
            .collect();

        let mut j: u64 = 0;
        // samples at or after the best event so far cannot win
        while best.as_ref().is_none_or(|(k, _)| j < *k) {
            let t = t0 + j as f64 * resolution;
            if t >= eta {
                break;
            }
            if let Some(trigger) = sample_event(mesh, &at, verts, &probes, &initially_cocircular, t) {
                best = Some((
                    j,
                    EventReport {
                        time: t,
                        index,
                        triangle: tri,
                        trigger,
                    },
                ));
                break;
            }
            j += 1;
        }
    }
    Ok(best.map(|(_, r)| r))
}

/// Event at one sample time: `Some(None)` for a collapsed triangle,
/// `Some(Some(id))` for a probe inside the circumcircle.
fn sample_event(
    mesh: &Mesh,
    at: &impl Fn(usize, f64) -> Point,
    verts: [usize; 3],
    probes: &[usize],
    initially_cocircular: &[bool],
    t: f64,
) -> Option<Option<NodeId>> {
    let (a, b, c) = (at(verts[0], t), at(verts[1], t), at(verts[2], t));
    if orient2d(a, b, c) <= 0.0 {
        return Some(None);
    }
    probes.iter().zip(initially_cocircular).find_map(|(&p, &was_cocircular)| {
        let side = incircle(a, b, c, at(p, t)).map(|r| r.side).unwrap_or(CircleSide::Inside);
        let event = match side {
            CircleSide::Inside => true,
            CircleSide::Cocircular => !was_cocircular,
            CircleSide::Outside => false,
        };
        event.then(|| Some(mesh.node(p).id))
    })
}
