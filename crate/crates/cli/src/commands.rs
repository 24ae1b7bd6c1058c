use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sota_core::dist::{parse_duration_seconds, TimeGrid};
use sota_core::gtfs::{build_bundle, load_slice, CalibrationConfig, TimeWindow};
use sota_core::network::{ExpandedGraph, NodeId};
use sota_core::policy::{compare, extract_policy, let_path, sample_trajectory, simulate, CompareRow, LetLeg};
use sota_core::solver::{solve, HeuristicConfig, Mode, Solution, SolveConfig, SolveStats};

use crate::args::{BenchArgs, CompareArgs, IngestArgs, ModeArgs, PolicyArgs, SimulateArgs, SolveArgs, TripArgs};
use crate::manifest::RunManifest;
use crate::source::{builtin, load_network, parse_budget, parse_sweep, LoadedNetwork};

pub const SOLVE_SCHEMA: &str = "sota-solve/1";
pub const POLICY_SCHEMA: &str = "sota-policy/1";
pub const COMPARE_SCHEMA: &str = "sota-compare/1";

/// Writes `text` to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            written.push(p.to_path_buf());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn finish_manifest(
    path: Option<&Path>,
    mut manifest: RunManifest,
    inputs: &[PathBuf],
    written: &[PathBuf],
) -> Result<()> {
    if let Some(p) = path {
        manifest.add_inputs(inputs)?;
        manifest.add_outputs(written)?;
        manifest.save(p)?;
    }
    Ok(())
}

pub fn solve_config(mode: &ModeArgs, budget: usize) -> Result<SolveConfig> {
    let heuristics = HeuristicConfig {
        epsilon: mode.epsilon,
        beta: mode.beta,
        ..Default::default()
    };
    heuristics.validate()?;
    let mut cfg = SolveConfig::new(budget, mode.mode);
    cfg.heuristics = heuristics;
    if mode.no_candidate_pruning {
        cfg.candidate_pruning = Some(false);
    }
    Ok(cfg)
}

struct Prepared {
    net: LoadedNetwork,
    graph: ExpandedGraph,
}

fn prepare(trip: &TripArgs) -> Result<Prepared> {
    let net = load_network(&trip.net, trip.bundle.as_deref())?;
    let graph = net.graph(trip.od.as_deref())?;
    Ok(Prepared { net, graph })
}

fn budget_or_horizon(grid: &TimeGrid, text: Option<&str>) -> Result<usize> {
    match text {
        Some(t) => parse_budget(grid, t),
        None => Ok(grid.budget_ticks),
    }
}

fn manifest_for(command: &str, p: &Prepared, mode: Option<Mode>, config: impl Serialize) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, std::env::args().skip(2).collect());
    m.grid = Some(p.net.grid());
    m.mode = mode.map(|m| m.to_string());
    m.config = serde_json::to_value(config)?;
    Ok(m)
}

#[derive(Serialize)]
struct SweepPoint {
    budget_ticks: usize,
    budget_minutes: f64,
    root_utility: f64,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    schema: &'a str,
    network: &'a str,
    origin: &'a str,
    destination: &'a str,
    mode: Mode,
    grid: TimeGrid,
    budget_ticks: usize,
    budget_minutes: f64,
    root_utility: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sweep: Vec<SweepPoint>,
    stats: &'a SolveStats,
}

pub fn run_solve(args: &SolveArgs) -> Result<()> {
    let p = prepare(&args.trip)?;
    let grid = p.net.grid();
    let sweep = match &args.budget_sweep {
        Some(s) => parse_sweep(&grid, s)?,
        None => Vec::new(),
    };
    let budget = match sweep.last() {
        Some(&hi) => hi,
        None => budget_or_horizon(&grid, args.budget.as_deref())?,
    };
    let mut cfg = solve_config(&args.mode, budget)?;
    cfg.extra_roots = sweep.clone();
    let mut solution = solve(&p.graph, &cfg)?;
    let points: Vec<SweepPoint> = sweep
        .iter()
        .map(|&b| SweepPoint {
            budget_ticks: b,
            budget_minutes: grid.minutes(b),
            root_utility: solution.ensure_root(b),
        })
        .collect();
    let summary = SolveSummary {
        schema: SOLVE_SCHEMA,
        network: &p.net.id,
        origin: p.graph.station_id(p.graph.origin),
        destination: p.graph.station_id(p.graph.destination),
        mode: cfg.mode,
        grid,
        budget_ticks: budget,
        budget_minutes: grid.minutes(budget),
        root_utility: solution.root_utility(),
        stats: solution.stats(),
        sweep: points,
    };
    let mut written = Vec::new();
    emit(args.out.as_deref(), &json(&summary)?, &mut written)?;
    if let Some(path) = &args.csv {
        let mut csv = String::from("budget_ticks,budget_minutes,root_utility\n");
        for s in &summary.sweep {
            writeln!(csv, "{},{},{}", s.budget_ticks, s.budget_minutes, s.root_utility)?;
        }
        emit(Some(path), &csv, &mut written)?;
    }
    if let Some(path) = &args.table {
        emit(Some(path), &json(&solution.memo_entries())?, &mut written)?;
    }
    let manifest = manifest_for("solve", &p, Some(cfg.mode), &cfg)?;
    finish_manifest(args.manifest.as_deref(), manifest, &p.net.inputs, &written)
}

#[derive(Serialize)]
struct DecisionRow {
    line: String,
    rest: Vec<String>,
    t: usize,
    r: usize,
    decision: sota_core::solver::Decision,
    u_board: f64,
    u_wait: Option<f64>,
}

#[derive(Serialize)]
struct StationDecisions {
    station: String,
    lines: Vec<String>,
    decisions: Vec<DecisionRow>,
}

#[derive(Serialize)]
struct PolicyDump<'a> {
    schema: &'a str,
    network: &'a str,
    origin: &'a str,
    destination: &'a str,
    mode: Mode,
    approximate: bool,
    budget_ticks: usize,
    root_utility: f64,
    stations: Vec<StationDecisions>,
}

fn line_ids(graph: &ExpandedGraph, station: usize, set: u32) -> Vec<String> {
    (0..32)
        .filter(|k| set & (1 << k) != 0)
        .filter_map(|k| graph.line_id(station, k).map(str::to_string))
        .collect()
}

pub fn run_policy(args: &PolicyArgs) -> Result<()> {
    let p = prepare(&args.trip)?;
    let budget = budget_or_horizon(&p.net.grid(), args.budget.as_deref())?;
    let cfg = solve_config(&args.mode, budget)?;
    let solution = solve(&p.graph, &cfg)?;
    let policy = extract_policy(&solution);
    let only = match &args.station {
        Some(id) => Some(p.net.network.station_index(id)?),
        None => None,
    };
    let g = &p.graph;
    let mut stations: Vec<StationDecisions> = g
        .stations()
        .iter()
        .filter(|sn| only.is_none_or(|s| s == sn.station))
        .map(|sn| StationDecisions {
            station: g.station_id(sn.station).to_string(),
            lines: line_ids(g, sn.station, sn.full_set()),
            decisions: Vec::new(),
        })
        .collect();
    let mut entries = solution.memo_entries();
    entries.sort_by_key(|a| (a.node, a.t, a.r));
    for e in entries {
        let NodeId::Arrival { station, line, rest } = e.node else {
            continue;
        };
        let Some(out) = stations.iter_mut().find(|s| s.station == g.station_id(station)) else {
            continue;
        };
        let choice = solution.arrival(station, line, rest, e.t, e.r)?;
        out.decisions.push(DecisionRow {
            line: g.line_id(station, line).unwrap_or_default().to_string(),
            rest: line_ids(g, station, rest),
            t: e.t,
            r: e.r,
            decision: policy.decide(station, line, rest, e.t, e.r)?,
            u_board: choice.u_board,
            u_wait: choice.u_wait,
        });
    }
    let dump = PolicyDump {
        schema: POLICY_SCHEMA,
        network: &p.net.id,
        origin: g.station_id(g.origin),
        destination: g.station_id(g.destination),
        mode: cfg.mode,
        approximate: policy.is_approximate(),
        budget_ticks: budget,
        root_utility: policy.root_utility(),
        stations,
    };
    let mut written = Vec::new();
    emit(args.out.as_deref(), &json(&dump)?, &mut written)?;
    let manifest = manifest_for("policy", &p, Some(cfg.mode), &cfg)?;
    finish_manifest(args.manifest.as_deref(), manifest, &p.net.inputs, &written)
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let p = prepare(&args.trip)?;
    let budget = budget_or_horizon(&p.net.grid(), args.budget.as_deref())?;
    let cfg = solve_config(&args.mode, budget)?;
    let policy = extract_policy(&solve(&p.graph, &cfg)?);
    let report = simulate(&policy, args.n, args.seed)?;
    let mut out = serde_json::json!({
        "network": p.net.id,
        "mode": cfg.mode,
        "budget_ticks": budget,
        "root_utility": policy.root_utility(),
        "report": report,
    });
    if let Some(index) = args.trajectory {
        out["trajectory"] = serde_json::to_value(sample_trajectory(&policy, args.seed, index)?)?;
    }
    let mut written = Vec::new();
    emit(args.out.as_deref(), &json(&out)?, &mut written)?;
    if let Some(path) = &args.csv {
        let csv = format!(
            "n,successes,ci_lo,ci_hi,seed\n{},{},{},{},{}\n",
            report.n, report.successes, report.ci_lo, report.ci_hi, report.seed
        );
        emit(Some(path), &csv, &mut written)?;
    }
    let mut manifest = manifest_for("simulate", &p, Some(cfg.mode), &cfg)?;
    manifest.seeds = vec![args.seed];
    finish_manifest(args.manifest.as_deref(), manifest, &p.net.inputs, &written)
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    schema: &'a str,
    network: &'a str,
    mode: Mode,
    let_legs: &'a [LetLeg],
    let_expected_minutes: f64,
    peak: Option<&'a CompareRow>,
    rows: &'a [CompareRow],
}

pub fn run_compare(args: &CompareArgs) -> Result<()> {
    let p = prepare(&args.trip)?;
    let grid = p.net.grid();
    let budgets = parse_sweep(&grid, &args.budget_sweep)?;
    let mut cfg = solve_config(&args.mode, *budgets.last().expect("sweep is nonempty"))?;
    cfg.extra_roots = budgets.clone();
    let mut solution = solve(&p.graph, &cfg)?;
    let baseline = let_path(&p.net.network, p.graph.origin, p.graph.destination)?;
    let rows = compare(&mut solution, &baseline, &budgets)?;
    let peak = rows.iter().max_by(|a, b| a.diff.total_cmp(&b.diff));
    let out = CompareOutput {
        schema: COMPARE_SCHEMA,
        network: &p.net.id,
        mode: cfg.mode,
        let_legs: &baseline.legs,
        let_expected_minutes: baseline.expected_ticks * grid.delta_seconds / 60.0,
        peak,
        rows: &rows,
    };
    let mut written = Vec::new();
    emit(args.out.as_deref(), &json(&out)?, &mut written)?;
    if let Some(path) = &args.csv {
        emit(Some(path), &compare_csv(&rows)?, &mut written)?;
    }
    let manifest = manifest_for("compare", &p, Some(cfg.mode), &cfg)?;
    finish_manifest(args.manifest.as_deref(), manifest, &p.net.inputs, &written)
}

pub fn compare_csv(rows: &[CompareRow]) -> Result<String> {
    let mut csv = String::from("budget_ticks,budget_minutes,sota,let,diff\n");
    for r in rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.budget_ticks, r.budget_minutes, r.sota, r.let_value, r.diff
        )?;
    }
    Ok(csv)
}

/// Instances named on the bench command line, expanded over seeds.
fn bench_instances(args: &BenchArgs) -> Result<Vec<LoadedNetwork>> {
    let mut out = Vec::new();
    for name in &args.instances {
        match name.as_str() {
            "low-diff" | "high-diff" => {
                for seed in &args.seeds {
                    out.push(LoadedNetwork::from_instance(&builtin(&format!("{name}:{seed}"))?)?);
                }
            }
            "syn3" | "example1" => out.push(LoadedNetwork::from_instance(&builtin(name)?)?),
            path => out.push(load_network(path, None)?),
        }
    }
    Ok(out)
}

pub fn run_bench(args: &BenchArgs) -> Result<()> {
    let mut csv = String::from(
        "instance,mode,budget_ticks,budget_minutes,root_utility,wall_seconds,station_evaluations,station_partial,\
         theta_iterations,arrival_nodes,dom_cache_hits,nondom_cache_hits,no_better_line,candidate_prunes,exact_stops,h1,h2,h3\n",
    );
    for net in bench_instances(args)? {
        let graph = net.graph(args.od.as_deref())?;
        let grid = net.grid();
        let budgets = parse_sweep(&grid, &args.budget_sweep)?;
        for &mode in &args.modes {
            let mode_args = ModeArgs {
                mode,
                epsilon: args.epsilon,
                beta: args.beta,
                no_candidate_pruning: false,
            };
            for &b in &budgets {
                let cfg = solve_config(&mode_args, b)?;
                let start = Instant::now();
                let s: Solution = solve(&graph, &cfg)?;
                let wall = start.elapsed().as_secs_f64();
                let st = s.stats();
                let wall = if args.no_timing {
                    String::new()
                } else {
                    format!("{wall:.6}")
                };
                writeln!(
                    csv,
                    "{},{mode},{b},{},{},{wall},{},{},{},{},{},{},{},{},{},{},{},{}",
                    net.id,
                    grid.minutes(b),
                    s.root_utility(),
                    st.station_evaluations,
                    st.station_partial,
                    st.theta_iterations,
                    st.arrival_nodes,
                    st.dom_cache_hits,
                    st.nondom_cache_hits,
                    st.no_better_line,
                    st.candidate_prunes,
                    st.exact_stops,
                    st.h1,
                    st.h2,
                    st.h3
                )?;
            }
        }
    }
    emit(args.csv.as_deref(), &csv, &mut Vec::new())
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .with_context(|| format!("{what} must be LO:HI, got `{text}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn run_ingest(args: &IngestArgs) -> Result<()> {
    let delta = parse_duration_seconds(&args.delta)?;
    let horizon_seconds = parse_duration_seconds(&args.horizon)?;
    let horizon_ticks = TimeGrid::new(delta, 1)?.ticks_exact(horizon_seconds)?;
    let cfg = CalibrationConfig {
        sigma_range: parse_pair(&args.sigma, "--sigma")?,
        road_speed_kmh: args.road_speed,
        rail_speed_kmh: args.rail_speed,
        seed: args.seed,
        window: TimeWindow::parse(&args.window)?,
        service_date: args.date.clone(),
        delta_seconds: delta,
        horizon_ticks,
        ..Default::default()
    };
    cfg.validate()?;
    let slice = load_slice(&args.gtfs, &cfg)?;
    if slice.trips.is_empty() {
        bail!(sota_core::Error::Gtfs(format!(
            "no trips in the slice: {}",
            slice.warnings.join("; ")
        )));
    }
    let mut out = build_bundle(&slice, &cfg)?;
    let net_path = args
        .net
        .clone()
        .unwrap_or_else(|| args.out.with_file_name("network.json"));
    out.spec.bundle = Some(relative_to(&args.out, &net_path));
    let mut written = Vec::new();
    emit(Some(&args.out), &(out.bundle.to_json()? + "\n"), &mut written)?;
    emit(Some(&net_path), &(out.spec.to_json()? + "\n"), &mut written)?;
    emit(args.report.as_deref(), &json(&out.report)?, &mut written)?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.manifest {
        let mut m = RunManifest::new("ingest", std::env::args().skip(2).collect());
        m.grid = Some(cfg.grid()?);
        m.seeds = vec![cfg.seed];
        m.config = serde_json::to_value(&cfg)?;
        let mut inputs = Vec::new();
        for table in [
            "stops.txt",
            "routes.txt",
            "trips.txt",
            "stop_times.txt",
            "calendar.txt",
            "calendar_dates.txt",
        ] {
            let p = args.gtfs.join(table);
            if p.exists() {
                inputs.push(p);
            }
        }
        finish_manifest(Some(path), m, &inputs, &written)?;
    }
    Ok(())
}

/// Path of `target` as seen from the directory holding `from`.
fn relative_to(target: &Path, from: &Path) -> String {
    let (t, f) = (target.parent(), from.parent());
    if t == f {
        target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        std::path::absolute(target)
            .unwrap_or_else(|_| target.to_path_buf())
            .display()
            .to_string()
    }
}
