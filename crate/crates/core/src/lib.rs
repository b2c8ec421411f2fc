//! Spatial constraints for motion planning among moving obstacles.
//!
//! A Delaunay mesh is built over point obstacles, motion is spread to
//! neighboring nodes, a channel of free triangles is searched on the dual
//! graph, and the first predicted topological event along it cuts the
//! channel into a segment. Repeating from the predicted event time weaves a
//! sequence of segments joined by anchor triangles. The `simulation`
//! module runs the resulting constraints in closed loop against the A* and
//! Timed A* baselines.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod triangulation;
pub mod transmission;
pub mod search;
pub mod events;
pub mod sequencer;
pub mod funnel;
pub mod simulation;
