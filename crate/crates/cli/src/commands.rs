use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kinetic_channel::simulation::{
    generate_synthetic, run_batch, run_scenario_traced, write_metrics_csv, BatchSummary, MethodId, Metrics, Scenario,
    Skipped, Summary,
};
use log::{info, warn};

use crate::args::{BatchArgs, CompareArgs, GenerateArgs, RenderArgs, RunArgs};
use crate::render::render_frame;

/// JSON schema of `summary.json`, written next to it.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let params = args.params();
    params.validate().map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for i in 0..args.count {
        let seed = args.seed.checked_add(i).context("seed range overflows u64")?;
        let scenario = generate_synthetic(seed, &params).map_err(|e| anyhow!("{e}"))?;
        let path = args.out.join(format!("{}.json", scenario.id));
        let text = serde_json::to_string_pretty(&scenario)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    info!("wrote {} scenarios to {}", args.count, args.out.display());
    Ok(())
}

/// Scenario files named on the command line, with directories expanded to
/// their `*.json` entries in name order.
fn scenario_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        let meta = fs::metadata(input).with_context(|| format!("reading {}", input.display()))?;
        if meta.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()
                .with_context(|| format!("listing {}", input.display()))?;
            entries.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"));
            entries.sort();
            out.extend(entries);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Reads one scenario file; I/O failures are errors, malformed content is not.
fn read_scenario(path: &Path) -> Result<Result<Scenario, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_scenario(&text).map_err(|e| e.to_string()))
}

fn load_scenarios(inputs: &[PathBuf]) -> Result<(Vec<Scenario>, Vec<Skipped>)> {
    let mut scenarios = Vec::new();
    let mut skipped = Vec::new();
    for path in scenario_paths(inputs)? {
        match read_scenario(&path)? {
            Ok(s) => scenarios.push(s),
            Err(reason) => {
                warn!("skipping {}: {reason}", path.display());
                skipped.push(Skipped {
                    path: path.display().to_string(),
                    reason,
                });
            }
        }
    }
    Ok((scenarios, skipped))
}

fn execute(batch: &BatchArgs, methods: &[MethodId]) -> Result<BatchSummary> {
    let cfg = batch.planner.config()?;
    let workers = match batch.workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let (scenarios, skipped) = load_scenarios(&batch.scenarios)?;
    info!("running {} scenarios x {} methods on {workers} workers", scenarios.len(), methods.len());
    let metrics: Vec<Metrics> = run_batch(&scenarios, methods, &cfg, workers)?;

    fs::create_dir_all(&batch.out).with_context(|| format!("creating {}", batch.out.display()))?;
    let csv_path = batch.out.join("metrics.csv");
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_metrics_csv(file, &metrics).with_context(|| format!("writing {}", csv_path.display()))?;

    let summary = BatchSummary::new(&metrics, scenarios.len(), skipped);
    let summary_path = batch.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    let schema_path = batch.out.join("summary.schema.json");
    fs::write(&schema_path, SUMMARY_SCHEMA).with_context(|| format!("writing {}", schema_path.display()))?;
    Ok(summary)
}

pub fn run(args: &RunArgs) -> Result<BatchSummary> {
    let summary = execute(&args.batch, &args.methods())?;
    print!("{}", summary_table(&summary));
    Ok(summary)
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let summary = execute(&args.batch, &MethodId::ALL)?;
    print!("{}", summary_table(&summary));
    let Some(base) = summary.method(args.baseline) else {
        bail!("no runs to compare");
    };
    println!();
    println!("difference against {}:", args.baseline);
    for m in summary.methods.iter().filter(|m| m.method != args.baseline) {
        println!("{}", diff_line(m.method, &m.summary, base));
    }
    Ok(())
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn time(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into())
}

/// Fixed-width table with one row per method.
pub fn summary_table(summary: &BatchSummary) -> String {
    let mut out = format!(
        "{:<12} {:>6} {:>11} {:>11} {:>10} {:>10} {:>12}\n",
        "method", "runs", "completion", "mean time", "planning", "collision", "latency"
    );
    for m in &summary.methods {
        let s = &m.summary;
        out += &format!(
            "{:<12} {:>6} {:>11} {:>11} {:>10} {:>10} {:>9.2} ms\n",
            m.method.as_str(),
            s.runs,
            pct(s.completion_rate),
            time(s.mean_completion_time),
            pct(s.planning_success_rate),
            pct(s.collision_rate),
            s.mean_latency_ms
        );
    }
    if !summary.skipped.is_empty() {
        out += &format!("skipped {} scenario file(s)\n", summary.skipped.len());
    }
    out
}

fn diff_line(method: MethodId, s: &Summary, base: &Summary) -> String {
    let points = |a: f64, b: f64| format!("{:+.1} pts", 100.0 * (a - b));
    let time = match (s.mean_completion_time, base.mean_completion_time) {
        (Some(a), Some(b)) => format!("{:+.2} s", a - b),
        _ => "-".into(),
    };
    format!(
        "{:<12} completion {}, mean time {}, planning {}, collision {}",
        method.as_str(),
        points(s.completion_rate, base.completion_rate),
        time,
        points(s.planning_success_rate, base.planning_success_rate),
        points(s.collision_rate, base.collision_rate)
    )
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let mut cfg = args.planner.config()?;
    cfg.run_to_limit = true;
    let scenario = read_scenario(&args.scenario)?
        .map_err(|reason| anyhow!("invalid scenario {}: {reason}", args.scenario.display()))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut index = 0usize;
    let mut failure: Option<anyhow::Error> = None;
    let metrics = run_scenario_traced(&scenario, args.method, &cfg, |frame| {
        if failure.is_some() {
            return;
        }
        let path = args.out.join(format!("frame-{index:04}.svg"));
        if let Err(e) = fs::write(&path, render_frame(&scenario, frame)) {
            failure = Some(anyhow!(e).context(format!("writing {}", path.display())));
        }
        index += 1;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    info!(
        "wrote {index} frames to {} (completed: {}, collisions: {})",
        args.out.display(),
        metrics.completed,
        metrics.collision_count
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(completion: f64, time: Option<f64>) -> Summary {
        Summary {
            runs: 2,
            completion_rate: completion,
            mean_completion_time: time,
            planning_success_rate: 0.5,
            collision_rate: 0.25,
            mean_latency_ms: 1.0,
        }
    }

    #[test]
    fn diff_formatting() {
        let line = diff_line(MethodId::Proposed, &summary(1.0, Some(17.0)), &summary(0.5, Some(16.0)));
        assert_eq!(line, "proposed     completion +50.0 pts, mean time +1.00 s, planning +0.0 pts, collision +0.0 pts");
        let line = diff_line(MethodId::Proposed, &summary(0.0, None), &summary(0.5, Some(16.0)));
        assert!(line.contains("mean time -,"));
    }

    #[test]
    fn directories_expand_to_sorted_json_files() {
        let dir = std::env::temp_dir().join(format!("kchan-paths-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        for name in ["b.json", "a.json", "c.txt"] {
            fs::write(dir.join(name), "").unwrap();
        }
        let got = scenario_paths(std::slice::from_ref(&dir)).unwrap();
        fs::remove_dir_all(&dir).unwrap();
        let names: Vec<_> = got.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["a.json", "b.json"]);
        assert!(scenario_paths(&[dir.join("gone")]).is_err());
    }

    #[test]
    fn malformed_content_is_not_an_io_error() {
        assert!(parse_scenario("{").is_err());
        assert!(parse_scenario("{}").is_err());
    }
}
