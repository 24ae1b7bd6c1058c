use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sota_core::solver::Mode;

#[derive(Debug, Parser)]
#[command(
    name = "sota",
    version,
    about = "On-time arrival routing policies for transit networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate a network and distribution bundle from a GTFS feed.
    Ingest(IngestArgs),
    /// Solve for the origin utility at one budget or over a sweep.
    Solve(SolveArgs),
    /// Dump the board/wait decisions of a solved table.
    Policy(PolicyArgs),
    /// Monte Carlo evaluation of the extracted policy.
    Simulate(SimulateArgs),
    /// Adaptive policy against the least expected time path over budgets.
    Compare(CompareArgs),
    /// Work counters per instance, mode and budget.
    Bench(BenchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding the GTFS tables.
    #[arg(long)]
    pub gtfs: PathBuf,
    #[arg(long, default_value = "06:00-10:00")]
    pub window: String,
    /// Service day `YYYYMMDD`; all services run when omitted.
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long, default_value = "15s")]
    pub delta: String,
    /// Grid horizon.
    #[arg(long, default_value = "1h")]
    pub horizon: String,
    /// Range `LO:HI` the per-segment σ is drawn from.
    #[arg(long, default_value = "0.25:0.5")]
    pub sigma: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50.0)]
    pub road_speed: f64,
    #[arg(long, default_value_t = 80.0)]
    pub rail_speed: f64,
    /// Bundle output.
    #[arg(long)]
    pub out: PathBuf,
    /// Network output; defaults to `network.json` beside the bundle.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Calibration report output; printed when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct TripArgs {
    /// Network file, or `builtin:example1`, `builtin:syn3`, `builtin:low-diff:SEED`, `builtin:high-diff:SEED`.
    #[arg(long)]
    pub net: String,
    /// Bundle file; defaults to the one named by the network.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// `ORIGIN:DESTINATION` station ids.
    #[arg(long)]
    pub od: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct ModeArgs {
    #[arg(long, default_value = "plain")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.75)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.25)]
    pub beta: f64,
    /// Disable candidate-set pruning in the pruned modes.
    #[arg(long)]
    pub no_candidate_pruning: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub trip: TripArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Budget such as `22.5m`, or a bare tick count; defaults to the grid horizon.
    #[arg(long, conflicts_with = "budget_sweep")]
    pub budget: Option<String>,
    /// `LO:HI:STEP`, e.g. `10m:45m:2.5m`.
    #[arg(long)]
    pub budget_sweep: Option<String>,
    /// Summary JSON output; printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Full utility table dump.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[command(flatten)]
    pub trip: TripArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub budget: Option<String>,
    /// Only decisions at this station.
    #[arg(long)]
    pub station: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub trip: TripArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long, short, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also print the event log of this trajectory index.
    #[arg(long)]
    pub trajectory: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub trip: TripArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long, default_value = "10m:45m:2.5m")]
    pub budget_sweep: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instances: `syn3`, `example1`, `low-diff`, `high-diff`, or network files (with --od).
    #[arg(long, value_delimiter = ',', default_value = "syn3")]
    pub instances: Vec<String>,
    /// Seeds for the `low-diff` and `high-diff` generators.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "plain,dominance,heuristic")]
    pub modes: Vec<Mode>,
    #[arg(long, default_value = "10m:45m:2.5m")]
    pub budget_sweep: String,
    #[arg(long)]
    pub od: Option<String>,
    #[arg(long, default_value_t = 0.75)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.25)]
    pub beta: f64,
    /// Leave the wall-time column empty so reruns compare byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// CSV output; printed when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Extra networks as `ID=SOURCE`; `example1` and `syn3` are always loaded.
    #[arg(long = "net")]
    pub nets: Vec<String>,
    /// Concurrent solve jobs.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    /// Append session events to this JSON lines file.
    #[arg(long)]
    pub log: Option<PathBuf>,
}
