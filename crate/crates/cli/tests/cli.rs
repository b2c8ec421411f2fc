use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinetic_channel::geometry::{NodeKind, Point};
use kinetic_channel::simulation::{EgoSpec, Scenario, ScenarioNode, Waypoint, CSV_COLUMNS, SCENARIO_SCHEMA_VERSION};
use tempfile::TempDir;

fn kchan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kchan")).args(args).output().expect("spawn kchan")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn static_scenario(id: &str) -> Scenario {
    let post = |id, x, y| ScenarioNode {
        id,
        kind: NodeKind::Static,
        radius: 0.3,
        waypoints: vec![Waypoint { t: 0.0, x, y }],
    };
    Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        id: id.into(),
        nodes: vec![post(0, 4.0, 1.0), post(1, 7.0, -1.2)],
        boundaries: vec![vec![[-1.0, -3.0], [11.0, -3.0]], vec![[-1.0, 3.0], [11.0, 3.0]]],
        start: Point::new(0.0, 0.0),
        goal: Point::new(10.0, 0.0),
        ego: EgoSpec { speed: 2.0, radius: 0.5 },
        time_limit: 25.0,
        virtual_spacing: None,
    }
}

fn write_scenario(dir: &Path, s: &Scenario) -> PathBuf {
    let path = dir.join(format!("{}.json", s.id));
    fs::write(&path, serde_json::to_string(s).unwrap()).unwrap();
    path
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&kchan(&["generate", "--count", "4", "--seed", "7", "--out", p(dir)]));
    }
    let (fa, fb) = (sorted_files(&a), sorted_files(&b));
    assert_eq!(fa.len(), 4);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        let s: Scenario = serde_json::from_slice(&fs::read(x).unwrap()).unwrap();
        s.validate().unwrap();
    }
    assert!(fa[0].ends_with("synthetic-10.json"));
}

#[test]
fn generate_zero_and_invalid_ranges() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    ok(&kchan(&["generate", "--count", "0", "--out", p(&empty)]));
    assert!(sorted_files(&empty).is_empty());

    let bad = tmp.path().join("bad");
    let out = kchan(&["generate", "--count", "3", "--min-speed", "2", "--max-speed", "1", "--out", p(&bad)]);
    assert!(!out.status.success());
    assert!(!bad.exists(), "nothing may be written on an argument error");
}

#[test]
fn run_writes_rows_summary_and_schema() {
    let tmp = TempDir::new().unwrap();
    let scen = write_scenario(tmp.path(), &static_scenario("posts"));
    let out_dir = tmp.path().join("out");
    let out = kchan(&["run", p(&scen), "--out", p(&out_dir), "--workers", "1"]);
    ok(&out);

    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 4);
    for (line, method) in lines[1..].iter().zip(["proposed", "timed_astar", "astar"]) {
        assert!(line.starts_with(&format!("1,posts,{method},true,")), "{line}");
    }

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&summary), "{summary}");
    assert_eq!(summary["methods"].as_array().unwrap().len(), 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("completion") && stdout.contains("collision"));
}

#[test]
fn method_selection() {
    let tmp = TempDir::new().unwrap();
    let scen = write_scenario(tmp.path(), &static_scenario("posts"));
    let out_dir = tmp.path().join("out");
    ok(&kchan(&["run", p(&scen), "--out", p(&out_dir), "--method", "astar,timed_astar", "--method", "astar"]));
    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(!kchan(&["run", p(&scen), "--out", p(&out_dir), "--method", "dijkstra"]).status.success());
}

#[test]
fn corrupt_files_are_skipped_and_recorded() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("scenarios");
    fs::create_dir(&dir).unwrap();
    write_scenario(&dir, &static_scenario("good"));
    fs::write(dir.join("broken.json"), "{ not json").unwrap();
    let mut invalid = static_scenario("invalid");
    invalid.time_limit = -1.0;
    write_scenario(&dir, &invalid);
    fs::write(dir.join("notes.txt"), "ignored").unwrap();

    let out_dir = tmp.path().join("out");
    let out = kchan(&["run", p(&dir), "--out", p(&out_dir), "--method", "astar"]);
    ok(&out);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenarios"], 1);
    let skipped = summary["skipped"].as_array().unwrap();
    assert_eq!(skipped.len(), 2);
    assert!(skipped.iter().any(|s| s["path"].as_str().unwrap().ends_with("broken.json")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
}

#[test]
fn harness_errors_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    let scen = write_scenario(tmp.path(), &static_scenario("posts"));
    let out_dir = tmp.path().join("out");
    let missing = tmp.path().join("missing.json");
    assert!(!kchan(&["run", p(&missing), "--out", p(&out_dir)]).status.success());
    assert!(!kchan(&["run", p(&scen), "--out", p(&out_dir), "--sample-resolution", "0"]).status.success());
    assert!(!kchan(&["run", p(&scen), "--out", p(&out_dir), "--workers", "0"]).status.success());
}

#[test]
fn compare_prints_differences() {
    let tmp = TempDir::new().unwrap();
    let scen = write_scenario(tmp.path(), &static_scenario("posts"));
    let out_dir = tmp.path().join("out");
    let out = kchan(&["compare", p(&scen), "--out", p(&out_dir), "--baseline", "astar"]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("difference against astar"));
    assert!(stdout.contains("proposed     completion +0.0 pts"), "{stdout}");
    assert!(out_dir.join("metrics.csv").exists());
}

fn layer<'a>(svg: &'a str, id: &str) -> Option<&'a str> {
    let start = svg.find(&format!(r#"<g id="{id}""#))?;
    let end = start + svg[start..].find("</g>")?;
    Some(&svg[start..end])
}

#[test]
fn render_static_scene() {
    let tmp = TempDir::new().unwrap();
    let scen = write_scenario(tmp.path(), &static_scenario("posts"));
    let frames = tmp.path().join("frames");
    ok(&kchan(&["render", p(&scen), "--method", "proposed", "--dt", "0.5", "--replan-interval", "0.5", "--out", p(&frames)]));
    let files = sorted_files(&frames);
    assert_eq!(files.len(), 50);
    let svgs: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    let mesh0 = layer(&svgs[0], "mesh").unwrap();
    for svg in &svgs {
        assert!(svg.starts_with("<svg"));
        assert_eq!(layer(svg, "mesh").unwrap(), mesh0);
        // the channel layer appears exactly when a path was planned
        assert_eq!(layer(svg, "channel").is_some(), svg.contains(r#"id="path""#));
    }
    assert!(layer(&svgs[0], "channel").is_some());
}

#[test]
fn render_marks_failed_cycles() {
    let tmp = TempDir::new().unwrap();
    let mut s = static_scenario("blocked");
    // a wall of posts across the road blocks every channel
    s.nodes = (0..7)
        .map(|i| ScenarioNode {
            id: i,
            kind: NodeKind::Static,
            radius: 0.4,
            waypoints: vec![Waypoint { t: 0.0, x: 5.0, y: -3.0 + i as f64 }],
        })
        .collect();
    let scen = write_scenario(tmp.path(), &s);
    let frames = tmp.path().join("frames");
    ok(&kchan(&["render", p(&scen), "--method", "astar", "--dt", "0.5", "--replan-interval", "0.5", "--out", p(&frames)]));
    let files = sorted_files(&frames);
    assert_eq!(files.len(), 50);
    for f in files {
        let svg = fs::read_to_string(f).unwrap();
        assert!(layer(&svg, "channel").is_none() && !svg.contains(r#"id="path""#));
    }
}
