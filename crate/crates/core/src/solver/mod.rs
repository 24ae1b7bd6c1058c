//! Backward dynamic program over `(node, t, r)`.
//!
//! Values are probabilities of reaching the destination within the remaining
//! budget `t` (ticks); `r` is how long the passenger has already waited at the
//! current station. Three modes share one engine: plain evaluation, exact
//! dominance pruning, and dominance with heuristic early boarding.

mod dominance;
mod engine;
pub mod pruning;
pub(crate) mod store;

pub use dominance::DominanceCache;

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{feasibility_bounds, ExpandedGraph, FeasibilityBounds, NodeId};
use engine::StationState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Dominance,
    Heuristic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Plain, Mode::Dominance, Mode::Heuristic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Dominance => "dominance",
            Mode::Heuristic => "heuristic",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "dominance" => Ok(Mode::Dominance),
            "heuristic" => Ok(Mode::Heuristic),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Early-boarding rules used in [`Mode::Heuristic`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    /// Board when the line beats each waited-for line with at least this probability.
    pub epsilon: f64,
    /// Relaxation of the time-interval bound.
    pub beta: f64,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            epsilon: 0.75,
            beta: 1.25,
            h1: true,
            h2: true,
            h3: true,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and at least 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Budget `T` in ticks; the table covers every `t <= T`.
    pub budget: usize,
    pub mode: Mode,
    #[serde(default)]
    pub heuristics: HeuristicConfig,
    /// Candidate-set pruning in the pruned modes; on unless set to false.
    #[serde(default)]
    pub candidate_pruning: Option<bool>,
    /// Further budgets whose origin utility should be evaluated.
    #[serde(default)]
    pub extra_roots: Vec<usize>,
}

impl SolveConfig {
    pub fn new(budget: usize, mode: Mode) -> Self {
        SolveConfig {
            budget,
            mode,
            heuristics: HeuristicConfig::default(),
            candidate_pruning: None,
            extra_roots: Vec::new(),
        }
    }

    pub(crate) fn prune_candidates(&self) -> bool {
        match self.mode {
            Mode::Plain => false,
            Mode::Dominance | Mode::Heuristic => self.candidate_pruning.unwrap_or(true),
        }
    }
}

/// Work counters. Everything except `wall_seconds` is deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Station-node utilities evaluated to completion.
    pub station_evaluations: u64,
    /// Station-node evaluations started but cut short by the interval bound.
    pub station_partial: u64,
    pub theta_iterations: u64,
    pub arrival_nodes: u64,
    pub dom_cache_hits: u64,
    pub nondom_cache_hits: u64,
    /// Boarded outright because no remaining line beats the current one.
    pub no_better_line: u64,
    /// Waits whose candidate set shrank before evaluation.
    pub candidate_prunes: u64,
    /// Evaluations stopped early with an exact board decision.
    pub exact_stops: u64,
    pub h1: u64,
    pub h2: u64,
    pub h3: u64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Board,
    Wait,
}

/// Value and choice at an arrival node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArrivalChoice {
    pub value: f64,
    pub decision: Decision,
    pub u_board: f64,
    /// Waiting utility, when it was evaluated.
    pub u_wait: Option<f64>,
}

/// One memoized utility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoEntry {
    pub node: NodeId,
    pub t: usize,
    pub r: usize,
    pub value: f64,
}

/// A solved table plus the graph it was solved on.
#[derive(Clone, Debug)]
pub struct Solution {
    graph: Arc<ExpandedGraph>,
    bounds: FeasibilityBounds,
    config: SolveConfig,
    states: Vec<StationState>,
    roots: BTreeMap<usize, f64>,
    stats: SolveStats,
    started: u64,
}

/// Solves the graph for every budget up to `config.budget`.
pub fn solve(graph: &ExpandedGraph, config: &SolveConfig) -> Result<Solution> {
    let horizon = graph.budget_horizon();
    if config.budget > horizon {
        return Err(Error::BudgetExceedsGrid {
            budget: config.budget,
            horizon,
        });
    }
    if let Some(&b) = config.extra_roots.iter().find(|&&b| b > config.budget) {
        return Err(Error::BudgetExceedsGrid {
            budget: b,
            horizon: config.budget,
        });
    }
    config.heuristics.validate()?;
    let start = Instant::now();
    let graph = Arc::new(graph.clone());
    let bounds = feasibility_bounds(&graph);
    let mut solution = Solution::prepare(graph, bounds, config.clone());
    solution.run();
    let mut roots = vec![config.budget];
    roots.extend(config.extra_roots.iter().copied());
    for b in roots {
        solution.ensure_root(b);
    }
    solution.stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(solution)
}

impl Solution {
    pub fn graph(&self) -> &Arc<ExpandedGraph> {
        &self.graph
    }

    pub fn bounds(&self) -> &FeasibilityBounds {
        &self.bounds
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn budget(&self) -> usize {
        self.config.budget
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    /// Probability of on-time arrival from the origin with the full budget.
    pub fn root_utility(&self) -> f64 {
        self.roots.get(&self.config.budget).copied().unwrap_or(0.0)
    }

    /// Origin utility at a smaller budget, if it was requested.
    pub fn root_at(&self, budget: usize) -> Option<f64> {
        self.roots.get(&budget).copied()
    }

    /// Evaluates the origin utility at `budget` (at most the solved budget).
    pub fn ensure_root(&mut self, budget: usize) -> f64 {
        if let Some(&v) = self.roots.get(&budget) {
            return v;
        }
        let v = match (self.graph.origin_node(), self.graph.slot(self.graph.origin)) {
            (Some(NodeId::Station { set, .. }), Some(slot)) if budget <= self.config.budget => {
                self.station_value_lazy(slot, set, budget, 0)
            }
            _ => 0.0,
        };
        self.roots.insert(budget, v);
        self.stats.station_partial = self.started - self.stats.station_evaluations;
        v
    }

    /// Boarding utility of local line `line` at `station` with `t` ticks left.
    pub fn line_utility(&self, station: usize, line: usize, t: usize) -> Result<f64> {
        let slot = self.slot(station)?;
        let st = &self.states[slot];
        st.line_u
            .get(line)
            .and_then(|u| u.get(t))
            .copied()
            .ok_or_else(|| Error::MissingEntry(format!("line node {line} at station {station}, t = {t}")))
    }

    /// Outcome at `A^{line, rest}` in state `(t, r)`; states need `t + r <= budget`.
    pub fn arrival(&self, station: usize, line: usize, rest: u32, t: usize, r: usize) -> Result<ArrivalChoice> {
        let slot = self.slot(station)?;
        let m = self.graph.stations()[slot].m();
        if line >= m || rest >> m != 0 || rest & (1 << line) != 0 || t + r > self.config.budget {
            return Err(Error::MissingEntry(format!(
                "arrival node line {line}, rest {rest:#b} at station {station}, t = {t}, r = {r}"
            )));
        }
        let (value, board) = self.arrival_value(slot, line, rest, t, r);
        let u_board = self.states[slot].line_value(line, t);
        Ok(ArrivalChoice {
            value,
            decision: if board { Decision::Board } else { Decision::Wait },
            u_board,
            u_wait: self.station_value_cached(slot, rest, t, r),
        })
    }

    /// Waiting utility at `S^{set}` in state `(t, r)`, if it was evaluated.
    pub fn station_value(&self, station: usize, set: u32, t: usize, r: usize) -> Option<f64> {
        let slot = self.graph.slot(station)?;
        self.station_value_cached(slot, set, t, r)
    }

    pub(crate) fn state(&self, slot: usize) -> &StationState {
        &self.states[slot]
    }

    /// Waiting utility at `S^{set}` in state `(t, r)`, evaluating it if needed.
    pub fn station_utility(&mut self, station: usize, set: u32, t: usize, r: usize) -> Result<f64> {
        let slot = self.slot(station)?;
        let m = self.graph.stations()[slot].m();
        if set == 0 || set >> m != 0 || t + r > self.config.budget {
            return Err(Error::MissingEntry(format!(
                "station node set {set:#b} at station {station}, t = {t}, r = {r}"
            )));
        }
        let v = self.station_value_lazy(slot, set, t, r);
        self.stats.station_partial = self.started - self.stats.station_evaluations;
        Ok(v)
    }

    fn slot(&self, station: usize) -> Result<usize> {
        self.graph
            .slot(station)
            .ok_or_else(|| Error::MissingEntry(format!("station {station} has no decision nodes")))
    }

    /// Every line, arrival and completed station utility in the table.
    pub fn memo_entries(&self) -> Vec<MemoEntry> {
        let mut out = Vec::new();
        for (slot, sn) in self.graph.stations().iter().enumerate() {
            self.states[slot].entries(sn, &mut out);
        }
        out
    }
}
