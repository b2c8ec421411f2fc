//! SVG snapshots of a simulation step.
//!
//! Layers, bottom to top: mesh edges, channel triangles, node discs, path,
//! goal and ego. Each layer is a `<g>` with a stable id so frames can be
//! inspected or diffed by layer.

use std::fmt::Write;

use kinetic_channel::geometry::{NodeKind, Point};
use kinetic_channel::simulation::{Frame, Scenario};

const MARGIN: f64 = 1.0;
const PX_PER_M: f64 = 20.0;

/// Axis-aligned bounds of everything in the scenario that stays put.
fn bounds(scenario: &Scenario) -> (Point, Point) {
    let mut pts: Vec<Point> = scenario.boundaries.iter().flatten().map(|&[x, y]| Point::new(x, y)).collect();
    pts.push(scenario.start);
    pts.push(scenario.goal);
    pts.extend(scenario.nodes.iter().map(|n| n.waypoints[0].pos()));
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (Point::new(lo.x - MARGIN, lo.y - MARGIN), Point::new(hi.x + MARGIN, hi.y + MARGIN))
}

fn fmt_points(points: &[Point]) -> String {
    points.iter().map(|p| format!("{:.3},{:.3}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

pub fn render_frame(scenario: &Scenario, frame: &Frame) -> String {
    let (lo, hi) = bounds(scenario);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let mut s = String::new();
    // y is flipped so the scene keeps its mathematical orientation
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        w * PX_PER_M,
        h * PX_PER_M,
        lo.x,
        -hi.y,
        w,
        h
    );
    let _ = writeln!(s, r#"<rect x="{:.3}" y="{:.3}" width="{w:.3}" height="{h:.3}" fill="white"/>"#, lo.x, -hi.y);
    let _ = writeln!(s, r#"<g transform="scale(1,-1)">"#);

    let _ = writeln!(s, r##"<g id="mesh" stroke="#b0b0b0" stroke-width="0.02">"##);
    for (a, b) in &frame.mesh_edges {
        let _ = writeln!(s, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, a.x, a.y, b.x, b.y);
    }
    let _ = writeln!(s, "</g>");

    if let Some(plan) = &frame.plan {
        let _ = writeln!(s, r##"<g id="channel" fill="#ffd8a8" fill-opacity="0.6" stroke="none">"##);
        for tri in &plan.channel {
            let _ = writeln!(s, r#"<polygon points="{}"/>"#, fmt_points(tri));
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g id="nodes">"#);
    for n in &frame.nodes {
        let (fill, r) = match n.kind {
            NodeKind::Virtual => ("#404040", n.radius.max(0.05)),
            NodeKind::Static => ("#707070", n.radius),
            _ => ("#a0a0a0", n.radius),
        };
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="{r:.3}" fill="{fill}"/>"#, n.pos.x, n.pos.y);
    }
    let _ = writeln!(s, "</g>");

    if let Some(plan) = &frame.plan {
        let _ = writeln!(
            s,
            r##"<polyline id="path" points="{}" fill="none" stroke="#d00000" stroke-width="0.06"/>"##,
            fmt_points(&plan.path.points)
        );
    }

    let g = scenario.goal;
    let _ = writeln!(
        s,
        r##"<circle id="goal" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="#008000" stroke-width="0.05"/>"##,
        g.x,
        g.y,
        scenario.ego.radius.max(0.1)
    );
    let _ = writeln!(
        s,
        r##"<circle id="ego" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#1f5fd0" fill-opacity="0.8"/>"##,
        frame.ego.x,
        frame.ego.y,
        scenario.ego.radius.max(0.05)
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" font-size="0.6" font-family="monospace">t = {:.2} s</text>"#,
        lo.x + 0.2,
        -hi.y + 0.8,
        frame.t
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use kinetic_channel::geometry::NodeState;
    use kinetic_channel::simulation::{EgoSpec, SCENARIO_SCHEMA_VERSION};

    fn scenario() -> Scenario {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            id: "r".into(),
            nodes: vec![],
            boundaries: vec![vec![[0.0, -2.0], [8.0, -2.0]]],
            start: Point::new(0.0, 0.0),
            goal: Point::new(8.0, 0.0),
            ego: EgoSpec { speed: 1.0, radius: 0.5 },
            time_limit: 10.0,
            virtual_spacing: None,
        }
    }

    #[test]
    fn layers_and_view_box() {
        let frame = Frame {
            t: 1.5,
            ego: Point::new(1.0, 0.0),
            nodes: vec![NodeState::stationary(0, Point::new(3.0, 1.0), 0.3, NodeKind::Static)],
            mesh_edges: vec![(Point::new(0.0, 0.0), Point::new(1.0, 1.0))],
            plan: None,
        };
        let svg = render_frame(&scenario(), &frame);
        // bounds (0,-2)..(8,0) grown by the margin, y flipped
        assert!(svg.contains(r#"viewBox="-1.000 -1.000 10.000 4.000""#), "{svg}");
        assert!(svg.contains(r#"<g id="mesh""#) && svg.contains(r#"<g id="nodes""#));
        assert!(!svg.contains(r#"id="channel""#) && !svg.contains(r#"id="path""#));
        assert!(svg.contains("t = 1.50 s"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
