use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kinetic_channel::simulation::{MethodId, SimConfig, SyntheticParams, DEFAULT_ROUTE_DISCOUNT};
use kinetic_channel::transmission::TransmissionConfig;

/// Channel-sequence planning experiments: generate scenarios, run batches,
/// compare methods and render runs as SVG frames.
#[derive(Debug, Parser)]
#[command(name = "kchan", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic pedestrian-crossing scenarios as JSON files.
    Generate(GenerateArgs),
    /// Run scenarios with the selected methods; writes metrics.csv and summary.json.
    Run(RunArgs),
    /// Render one run as a sequence of SVG frames.
    Render(RenderArgs),
    /// Run all methods and print the summaries side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of scenarios.
    #[arg(long, default_value_t = 50)]
    pub count: u64,
    /// Seed of the first scenario; scenario i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub min_pedestrians: u32,
    #[arg(long, default_value_t = 20)]
    pub max_pedestrians: u32,
    /// Pedestrian speed lower bound, m/s.
    #[arg(long, default_value_t = 0.25)]
    pub min_speed: f64,
    /// Pedestrian speed upper bound, m/s.
    #[arg(long, default_value_t = 1.0)]
    pub max_speed: f64,
    /// Generate standing pedestrians only.
    #[arg(long)]
    pub stationary: bool,
}

impl GenerateArgs {
    pub fn params(&self) -> SyntheticParams {
        SyntheticParams {
            min_pedestrians: self.min_pedestrians,
            max_pedestrians: self.max_pedestrians,
            min_speed: self.min_speed,
            max_speed: self.max_speed,
            stationary: self.stationary,
            ..SyntheticParams::default()
        }
    }
}

/// Planner and loop settings.
#[derive(Debug, Args)]
pub struct PlannerArgs {
    /// Transmission proximity balance, m.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Transmission heading-sharpness exponent.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Transmission sweeps.
    #[arg(long, default_value_t = 1)]
    pub passes: u32,
    /// Let boundary nodes take transmitted velocities.
    #[arg(long)]
    pub transmit_to_virtual: bool,
    /// Event sampling step, s.
    #[arg(long, default_value_t = 0.1)]
    pub sample_resolution: f64,
    /// Minimum free edge gap, m [default: 2 * ego radius + 0.2].
    #[arg(long)]
    pub width_threshold: Option<f64>,
    /// Funnel padding, m [default: ego radius + 0.1].
    #[arg(long)]
    pub padding: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub max_segments: usize,
    /// Sequence time threshold, s.
    #[arg(long, default_value_t = 10.0)]
    pub tau_threshold: f64,
    /// Planning cadence, s.
    #[arg(long, default_value_t = 0.1)]
    pub replan_interval: f64,
    /// Simulation step, s.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Search discount on edges the previous plan crossed, in [0, 1).
    #[arg(long, default_value_t = DEFAULT_ROUTE_DISCOUNT)]
    pub route_discount: f64,
}

impl PlannerArgs {
    pub fn config(&self) -> anyhow::Result<SimConfig> {
        let cfg = SimConfig {
            transmission: TransmissionConfig {
                alpha: self.alpha,
                beta: self.beta,
                passes: self.passes,
                to_virtual: self.transmit_to_virtual,
            },
            sample_resolution: self.sample_resolution,
            width_threshold: self.width_threshold,
            padding: self.padding,
            max_segments: self.max_segments,
            tau_threshold: self.tau_threshold,
            replan_interval: self.replan_interval,
            dt: self.dt,
            run_to_limit: false,
            route_discount: self.route_discount,
        };
        cfg.validate().map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Scenario files, or directories whose *.json files are read.
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    /// Methods to run, repeatable or comma separated [default: all].
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<MethodId>,
}

impl RunArgs {
    pub fn methods(&self) -> Vec<MethodId> {
        if self.method.is_empty() {
            return MethodId::ALL.to_vec();
        }
        let mut out = Vec::new();
        for &m in &self.method {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    /// Method the others are compared against.
    #[arg(long, default_value = "astar")]
    pub baseline: MethodId,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Scenario file.
    pub scenario: PathBuf,
    #[arg(long, default_value = "proposed")]
    pub method: MethodId,
    /// Output directory for frame-NNNN.svg files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub planner: PlannerArgs,
}
