//! Policies read off a solved table, and the tools that check them:
//! Monte Carlo simulation, exhaustive enumeration, and the least expected
//! time path baseline.

mod let_path;
mod oracle;
mod simulate;

pub use let_path::{compare, let_path, CompareRow, LetLeg, LetResult};
pub use oracle::{enumerate_oracle, oracle_estimate, DEFAULT_ORACLE_CAP};
pub use simulate::{sample_trajectory, simulate, SimulationReport, TrajectorySample, TripEvent};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::network::ExpandedGraph;
use crate::solver::store::Store;
use crate::solver::{Decision, Mode, Solution};

/// Decision table of one station, copied out of the solver.
#[derive(Clone, Debug)]
pub(crate) struct PolicyStation {
    pub(crate) alpha: Option<usize>,
    pub(crate) rmax: usize,
    pub(crate) alive: Vec<u32>,
    pub(crate) line_u: Vec<Vec<f64>>,
    pub(crate) board: Store<u8>,
}

/// Board or wait at every arrival-node state `(line, rest, t, r)`.
#[derive(Clone, Debug)]
pub struct Policy {
    graph: Arc<ExpandedGraph>,
    mode: Mode,
    budget: usize,
    root: f64,
    stations: Vec<PolicyStation>,
}

/// Copies the arrival-node decisions out of a solved table.
pub fn extract_policy(solution: &Solution) -> Policy {
    Policy {
        graph: Arc::clone(solution.graph()),
        mode: solution.mode(),
        budget: solution.budget(),
        root: solution.root_utility(),
        stations: solution.policy_tables(),
    }
}

impl Policy {
    pub fn graph(&self) -> &Arc<ExpandedGraph> {
        &self.graph
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Origin utility of the table the policy came from.
    pub fn root_utility(&self) -> f64 {
        self.root
    }

    /// Heuristic-mode tables may board where waiting is better.
    pub fn is_approximate(&self) -> bool {
        self.mode == Mode::Heuristic
    }

    /// Decision when local line `line` arrives at `station` and `rest` has
    /// not yet arrived, with `t` ticks left after `r` ticks of waiting.
    pub fn decide(&self, station: usize, line: usize, rest: u32, t: usize, r: usize) -> Result<Decision> {
        let gap = || {
            Error::MissingEntry(format!(
                "decision at station {station}, line {line}, rest {rest:#b}, t = {t}, r = {r}"
            ))
        };
        let slot = self.graph.slot(station).ok_or_else(gap)?;
        let sn = &self.graph.stations()[slot];
        if line >= sn.m() || rest & (1 << line) != 0 || rest >> sn.m() != 0 || t + r > self.budget {
            return Err(gap());
        }
        let ps = &self.stations[slot];
        if ps.alpha.is_none_or(|a| t < a) || r > ps.rmax {
            return Ok(Decision::Board);
        }
        let eff = rest & ps.alive.get(r).copied().unwrap_or(0);
        if eff == 0 {
            return Ok(Decision::Board);
        }
        match ps.board.get(sn.arrival_index(line, eff), t, r) {
            1 => Ok(Decision::Board),
            2 => Ok(Decision::Wait),
            _ => Err(gap()),
        }
    }

    /// Boarding utility of local line `line` at `station`.
    pub fn line_utility(&self, station: usize, line: usize, t: usize) -> f64 {
        self.graph
            .slot(station)
            .and_then(|slot| self.stations[slot].line_u.get(line))
            .and_then(|u| u.get(t))
            .copied()
            .unwrap_or(0.0)
    }

    /// The line of `arriving` a passenger would board: highest boarding
    /// utility, lowest local index on ties.
    pub fn preferred(&self, station: usize, arriving: u32, t: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in crate::network::bits(arriving) {
            let u = self.line_utility(station, k, t);
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((k, u));
            }
        }
        best.map(|(k, _)| k)
    }
}

impl Solution {
    pub(crate) fn policy_tables(&self) -> Vec<PolicyStation> {
        self.graph()
            .stations()
            .iter()
            .enumerate()
            .map(|(slot, sn)| self.state(slot).policy_table(sn, self.budget()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolveConfig};
    use crate::synth::example1;

    #[test]
    fn empty_rest_boards() {
        let g = example1().graph().unwrap();
        let p = extract_policy(&solve(&g, &SolveConfig::new(20, Mode::Plain)).unwrap());
        for line in 0..3 {
            for t in 0..=20 {
                assert_eq!(p.decide(0, line, 0, t, 0).unwrap(), Decision::Board);
            }
        }
        assert!(p.decide(0, 0, 0b001, 10, 0).is_err());
        assert!(p.decide(1, 0, 0, 10, 0).is_err());
    }
}
