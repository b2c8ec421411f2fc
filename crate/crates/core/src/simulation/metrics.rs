use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::run::{run_scenario, Metrics, MethodId, SimConfig};
use super::scenario::Scenario;

/// Version of the metrics CSV columns and the JSON summary layout.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 9] = [
    "schema_version",
    "scenario",
    "method",
    "completed",
    "completion_time",
    "cycles_attempted",
    "cycles_succeeded",
    "collision_count",
    "collided",
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty metrics list")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Aggregate rates over a set of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub completion_rate: f64,
    /// Mean over completed runs; `None` when nothing completed.
    pub mean_completion_time: Option<f64>,
    pub planning_success_rate: f64,
    pub collision_rate: f64,
    pub mean_latency_ms: f64,
}

/// Rates over `metrics`: completed runs, mean completion time of those,
/// planning success over all attempted cycles, and runs with a collision.
pub fn aggregate(metrics: &[Metrics]) -> Result<Summary, MetricsError> {
    if metrics.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = metrics.len() as f64;
    let times: Vec<f64> = metrics.iter().filter_map(|m| m.completion_time).collect();
    let attempted: u64 = metrics.iter().map(|m| m.cycles_attempted as u64).sum();
    let succeeded: u64 = metrics.iter().map(|m| m.cycles_succeeded as u64).sum();
    let latencies: Vec<f64> = metrics.iter().flat_map(|m| m.latency.iter().copied()).collect();
    Ok(Summary {
        runs: metrics.len(),
        completion_rate: metrics.iter().filter(|m| m.completed).count() as f64 / n,
        mean_completion_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        planning_success_rate: if attempted == 0 { 0.0 } else { succeeded as f64 / attempted as f64 },
        collision_rate: metrics.iter().filter(|m| m.collided).count() as f64 / n,
        mean_latency_ms: if latencies.is_empty() {
            0.0
        } else {
            1e3 * latencies.iter().sum::<f64>() / latencies.len() as f64
        },
    })
}

/// Summary of one method within a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodId,
    #[serde(flatten)]
    pub summary: Summary,
}

/// A scenario file that could not be used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub schema_version: u32,
    pub scenarios: usize,
    pub methods: Vec<MethodSummary>,
    pub skipped: Vec<Skipped>,
}

impl BatchSummary {
    pub fn new(metrics: &[Metrics], scenarios: usize, skipped: Vec<Skipped>) -> Self {
        let mut by_method: BTreeMap<MethodId, Vec<Metrics>> = BTreeMap::new();
        for m in metrics {
            by_method.entry(m.method).or_default().push(m.clone());
        }
        BatchSummary {
            schema_version: METRICS_SCHEMA_VERSION,
            scenarios,
            methods: by_method
                .into_iter()
                .map(|(method, ms)| MethodSummary {
                    method,
                    summary: aggregate(&ms).expect("non-empty group"),
                })
                .collect(),
            skipped,
        }
    }

    pub fn method(&self, method: MethodId) -> Option<&Summary> {
        self.methods.iter().find(|m| m.method == method).map(|m| &m.summary)
    }
}

/// Writes one CSV row per run, in the given order. Latency is left out so
/// the file is reproducible.
pub fn write_metrics_csv<W: Write>(out: W, metrics: &[Metrics]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for m in metrics {
        w.write_record([
            METRICS_SCHEMA_VERSION.to_string(),
            m.scenario.clone(),
            m.method.to_string(),
            m.completed.to_string(),
            m.completion_time.map(|t| format!("{t:.3}")).unwrap_or_default(),
            m.cycles_attempted.to_string(),
            m.cycles_succeeded.to_string(),
            m.collision_count.to_string(),
            m.collided.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every (scenario, method) pair on `workers` threads. Results are
/// ordered by scenario, then by the order of `methods`.
pub fn run_batch(
    scenarios: &[Scenario],
    methods: &[MethodId],
    cfg: &SimConfig,
    workers: usize,
) -> Result<Vec<Metrics>, MetricsError> {
    let jobs: Vec<(&Scenario, MethodId)> = scenarios.iter().flat_map(|s| methods.iter().map(move |&m| (s, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MetricsError::Pool(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(s, m)| run_scenario(s, m, cfg)).collect()))
}
