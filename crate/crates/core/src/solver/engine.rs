use std::sync::Arc;

use super::dominance::DominanceCache;
use super::pruning::{heuristic_1_probability, improves, single_line_wait, single_line_wait_profile};
use super::store::Store;
use super::{MemoEntry, Mode, Solution, SolveConfig};
use crate::network::{bits, subsets, ExpandedGraph, FeasibilityBounds, NodeId, RideTarget, StationNodes};
use crate::policy::PolicyStation;

#[derive(Clone, Copy, Debug, Default)]
struct ArrivalEntry {
    value: f64,
    board: bool,
    set: bool,
}

#[derive(Clone, Copy, Debug, Default)]
enum StationEntry {
    #[default]
    Unknown,
    /// First-arrival ticks `1..=theta` are accumulated into `u_sum`.
    Partial {
        theta: u32,
        u_sum: f64,
    },
    Done(f64),
}

enum Eval {
    Value(f64),
    Dominated,
}

/// Memo for the nodes of one station.
#[derive(Clone, Debug)]
pub(crate) struct StationState {
    /// Minimum time to the destination from any node here.
    alpha: Option<usize>,
    /// Largest materialized waiting time.
    rmax: usize,
    pub(crate) line_u: Vec<Vec<f64>>,
    /// Lines that can still arrive after `r` ticks of waiting, per `r`.
    alive: Vec<u32>,
    arrivals: Store<ArrivalEntry>,
    stations: Store<StationEntry>,
}

impl StationState {
    fn new(sn: &StationNodes, alpha: Option<usize>, budget: usize) -> Self {
        let m = sn.m();
        let alpha = alpha.filter(|&a| a <= budget);
        let longest_wait = sn
            .lines
            .iter()
            .filter_map(|c| c.waiting.max_support())
            .max()
            .unwrap_or(0);
        let rmax = alpha.map_or(0, |a| longest_wait.min(budget - a));
        let alive = (0..=rmax)
            .map(|r| {
                sn.lines
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.survival.at(r) > 0.0)
                    .fold(0u32, |acc, (k, _)| acc | (1 << k))
            })
            .collect();
        StationState {
            alpha,
            rmax,
            line_u: vec![vec![0.0; budget + 1]; m],
            alive,
            arrivals: Store::new(m << (m - 1), budget + 1, rmax + 1),
            stations: Store::new((1 << m) - 1, budget + 1, rmax + 1),
        }
    }

    pub(crate) fn line_value(&self, line: usize, t: usize) -> f64 {
        self.line_u[line].get(t).copied().unwrap_or(0.0)
    }

    fn feasible(&self, t: usize) -> bool {
        self.alpha.is_some_and(|a| t >= a)
    }

    fn alive(&self, r: usize) -> u32 {
        self.alive.get(r).copied().unwrap_or(0)
    }

    /// Decisions of every computed arrival node: 1 board, 2 wait, 0 absent.
    pub(crate) fn policy_table(&self, sn: &StationNodes, budget: usize) -> PolicyStation {
        let m = sn.m();
        let nodes = m << (m - 1);
        let mut board = Store::new(nodes, budget + 1, self.rmax + 1);
        for t in 0..=budget {
            if !self.feasible(t) {
                continue;
            }
            for r in 0..=self.rmax.min(budget - t) {
                for idx in 0..nodes {
                    let e = self.arrivals.get(idx, t, r);
                    if e.set {
                        board.set(idx, t, r, if e.board { 1 } else { 2 });
                    }
                }
            }
        }
        PolicyStation {
            alpha: self.alpha,
            rmax: self.rmax,
            alive: self.alive.clone(),
            line_u: self.line_u.clone(),
            board,
        }
    }

    pub(crate) fn entries(&self, sn: &StationNodes, out: &mut Vec<MemoEntry>) {
        let y = sn.station;
        let tn = self.line_u.first().map_or(0, Vec::len);
        for (line, u) in self.line_u.iter().enumerate() {
            for (t, &value) in u.iter().enumerate() {
                out.push(MemoEntry {
                    node: NodeId::Line { station: y, line },
                    t,
                    r: 0,
                    value,
                });
            }
        }
        for t in 0..tn {
            for r in 0..=self.rmax {
                for line in 0..sn.m() {
                    for rest in subsets(sn.full_set() & !(1 << line)) {
                        let e = self.arrivals.get(sn.arrival_index(line, rest), t, r);
                        if e.set {
                            out.push(MemoEntry {
                                node: NodeId::Arrival { station: y, line, rest },
                                t,
                                r,
                                value: e.value,
                            });
                        }
                    }
                }
                for set in 1..=sn.full_set() {
                    if let StationEntry::Done(value) = self.stations.get(set as usize - 1, t, r) {
                        out.push(MemoEntry {
                            node: NodeId::Station { station: y, set },
                            t,
                            r,
                            value,
                        });
                    }
                }
            }
        }
    }
}

impl Solution {
    pub(super) fn prepare(graph: Arc<ExpandedGraph>, bounds: FeasibilityBounds, config: SolveConfig) -> Self {
        let states = graph
            .stations()
            .iter()
            .map(|sn| StationState::new(sn, bounds.get(sn.station), config.budget))
            .collect();
        Solution {
            graph,
            bounds,
            config,
            states,
            roots: Default::default(),
            stats: Default::default(),
            started: 0,
        }
    }

    /// Bottom-up over the budget: at each `t`, line nodes first (they only
    /// look at smaller budgets), then arrival nodes, whose station-node
    /// lookups are evaluated on demand.
    pub(super) fn run(&mut self) {
        let graph = Arc::clone(&self.graph);
        let budget = self.config.budget;
        let mut cache = DominanceCache::default();
        for t in 0..=budget {
            for (slot, sn) in graph.stations().iter().enumerate() {
                for i in 0..sn.m() {
                    let u = self.compute_line(sn, slot, i, t);
                    self.states[slot].line_u[i][t] = u;
                }
            }
            for (slot, sn) in graph.stations().iter().enumerate() {
                if !self.states[slot].feasible(t) {
                    continue;
                }
                let top = self.states[slot].rmax.min(budget - t);
                for r in 0..=top {
                    self.compute_arrivals(sn, slot, t, r, &mut cache);
                }
            }
        }
    }

    fn compute_line(&mut self, sn: &StationNodes, slot: usize, i: usize, t: usize) -> f64 {
        if !self.states[slot].feasible(t) {
            return 0.0;
        }
        let c = &sn.lines[i];
        let mut acc = 0.0;
        for (theta, p) in c.travel.support() {
            if theta > t {
                break;
            }
            acc += p * self.target_value(c.next, t - theta);
        }
        acc
    }

    fn target_value(&mut self, target: RideTarget, t: usize) -> f64 {
        match target {
            RideTarget::Destination => 1.0,
            RideTarget::Dead => 0.0,
            RideTarget::Arrival { station, line, rest } => {
                let slot = self.graph.slot(station).expect("ride target has decision nodes");
                self.arrival_value(slot, line, rest, t, 0).0
            }
            RideTarget::Station { station, set } => {
                let slot = self.graph.slot(station).expect("ride target has decision nodes");
                self.station_value_lazy(slot, set, t, 0)
            }
        }
    }

    /// `(value, board)` at `A^{i, rest}` in state `(t, r)`.
    pub(super) fn arrival_value(&self, slot: usize, i: usize, rest: u32, t: usize, r: usize) -> (f64, bool) {
        let st = &self.states[slot];
        if !st.feasible(t) {
            return (0.0, true);
        }
        let u = st.line_value(i, t);
        if r > st.rmax {
            return (u, true);
        }
        let eff = rest & st.alive(r);
        if eff == 0 {
            return (u, true);
        }
        let idx = self.graph.stations()[slot].arrival_index(i, eff);
        let e = st.arrivals.get(idx, t, r);
        debug_assert!(e.set, "arrival node read before it was computed");
        (e.value, e.board)
    }

    pub(super) fn station_value_cached(&self, slot: usize, set: u32, t: usize, r: usize) -> Option<f64> {
        let st = &self.states[slot];
        if !st.feasible(t) || r > st.rmax || t > self.config.budget {
            return Some(0.0);
        }
        let eff = set & st.alive(r);
        if eff == 0 {
            return Some(0.0);
        }
        match st.stations.get(eff as usize - 1, t, r) {
            StationEntry::Done(v) => Some(v),
            _ => None,
        }
    }

    pub(super) fn station_value_lazy(&mut self, slot: usize, set: u32, t: usize, r: usize) -> f64 {
        match self.evaluate_station(slot, set, t, r, None) {
            Eval::Value(v) => v,
            Eval::Dominated => unreachable!("evaluation without a stopping rule ran to completion"),
        }
    }

    /// Station-node utility. With `stop = (u_board, beta)` the first-arrival
    /// loop checks after each tick whether `beta * u_board` already covers
    /// the best the remaining ticks could add, and if so leaves the
    /// evaluation suspended and reports dominance.
    fn evaluate_station(&mut self, slot: usize, set: u32, t: usize, r: usize, stop: Option<(f64, f64)>) -> Eval {
        let graph = Arc::clone(&self.graph);
        let sn = &graph.stations()[slot];
        let st = &self.states[slot];
        if !st.feasible(t) || r > st.rmax {
            return Eval::Value(0.0);
        }
        let eff = set & st.alive(r);
        if eff == 0 {
            return Eval::Value(0.0);
        }
        let key = eff as usize - 1;
        let (start, mut u_sum) = match st.stations.get(key, t, r) {
            StationEntry::Done(v) => return Eval::Value(v),
            StationEntry::Partial { theta, u_sum } => (theta as usize, u_sum),
            StationEntry::Unknown => {
                self.started += 1;
                (0, 0.0)
            }
        };
        let lines: Vec<usize> = bits(eff).collect();
        let s0: Vec<f64> = lines.iter().map(|&k| sn.lines[k].survival.at(r)).collect();
        let mut w = vec![0.0; lines.len()];
        let mut ratio = vec![0.0; lines.len()];
        let mut theta = start;
        while theta < t {
            theta += 1;
            self.stats.theta_iterations += 1;
            let mut arriving = 0u32;
            let mut none = 1.0;
            let mut base = 1.0;
            let mut any_left = false;
            for (n, &k) in lines.iter().enumerate() {
                let c = &sn.lines[k];
                w[n] = c.waiting.at(r + theta) / s0[n];
                let s = c.survival.at(r + theta);
                any_left |= s > 0.0;
                ratio[n] = s / s0[n];
                none *= ratio[n];
                if w[n] > 0.0 {
                    arriving |= 1 << n;
                } else {
                    base *= ratio[n];
                }
            }
            let mut sub = arriving;
            while sub != 0 {
                let mut prob = base;
                let mut best: Option<usize> = None;
                for n in 0..lines.len() {
                    if arriving & (1 << n) == 0 {
                        continue;
                    }
                    if sub & (1 << n) != 0 {
                        prob *= w[n];
                        let better = best.is_none_or(|b| {
                            self.states[slot].line_value(lines[n], t - theta)
                                > self.states[slot].line_value(lines[b], t - theta)
                        });
                        if better {
                            best = Some(n);
                        }
                    } else {
                        prob *= ratio[n];
                    }
                }
                if prob > 0.0 {
                    let mut joint = 0u32;
                    for n in bits(sub) {
                        joint |= 1 << lines[n];
                    }
                    let j = lines[best.expect("nonempty arrival set")];
                    let (value, _) = self.arrival_value(slot, j, eff & !joint, t - theta, r + theta);
                    u_sum += prob * value;
                }
                sub = (sub - 1) & arriving;
            }
            if !any_left {
                break;
            }
            if let Some((u_board, beta)) = stop {
                if theta < t {
                    let st = &self.states[slot];
                    let u_max = lines
                        .iter()
                        .filter(|&&k| sn.lines[k].survival.at(r + theta) > 0.0)
                        .map(|&k| st.line_value(k, t - theta - 1))
                        .fold(0.0, f64::max);
                    let bound = u_sum + none * u_max;
                    let exact = u_board >= bound;
                    if exact || beta * u_board >= bound {
                        if exact {
                            self.stats.exact_stops += 1;
                        } else {
                            self.stats.h3 += 1;
                        }
                        let partial = StationEntry::Partial {
                            theta: theta as u32,
                            u_sum,
                        };
                        self.states[slot].stations.set(key, t, r, partial);
                        return Eval::Dominated;
                    }
                }
            }
        }
        self.stats.station_evaluations += 1;
        self.states[slot].stations.set(key, t, r, StationEntry::Done(u_sum));
        Eval::Value(u_sum)
    }

    fn compute_arrivals(&mut self, sn: &StationNodes, slot: usize, t: usize, r: usize, cache: &mut DominanceCache) {
        let alive = self.states[slot].alive(r);
        let full = sn.full_set();
        let mut order: Vec<(u32, usize)> = subsets(alive)
            .flat_map(|rest| bits(full & !rest).map(move |i| (rest, i)))
            .collect();
        {
            let st = &self.states[slot];
            order.sort_by(|a, b| {
                b.0.count_ones()
                    .cmp(&a.0.count_ones())
                    .then(a.0.cmp(&b.0))
                    .then(st.line_value(a.1, t).total_cmp(&st.line_value(b.1, t)))
                    .then(a.1.cmp(&b.1))
            });
        }
        cache.clear();
        for (rest, i) in order {
            self.stats.arrival_nodes += 1;
            let u = self.states[slot].line_value(i, t);
            let (value, board) = if rest == 0 {
                (u, true)
            } else if self.config.mode == Mode::Plain {
                let s = self.station_value_lazy(slot, rest, t, r);
                (u.max(s), u >= s)
            } else {
                self.pruned_arrival(sn, slot, rest, t, r, u, cache)
            };
            let idx = sn.arrival_index(i, rest);
            self.states[slot].arrivals.set(
                idx,
                t,
                r,
                ArrivalEntry {
                    value,
                    board,
                    set: true,
                },
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pruned_arrival(
        &mut self,
        sn: &StationNodes,
        slot: usize,
        rest: u32,
        t: usize,
        r: usize,
        u: f64,
        cache: &mut DominanceCache,
    ) -> (f64, bool) {
        if cache.implies_dom(u, rest) {
            self.stats.dom_cache_hits += 1;
            return (u, true);
        }
        if cache.implies_nondom(u, rest) {
            self.stats.nondom_cache_hits += 1;
            let s = self.station_value_lazy(slot, rest, t, r);
            return (u.max(s), u >= s);
        }
        let heuristic = self.config.mode == Mode::Heuristic;
        let h = self.config.heuristics;
        let st = &self.states[slot];
        let z: u32 = if t == 0 {
            rest
        } else {
            bits(rest)
                .filter(|&j| u < st.line_value(j, t - 1))
                .fold(0, |acc, j| acc | (1 << j))
        };
        let mut outcome: Option<f64> = None;
        if t >= 1 && z == 0 {
            self.stats.no_better_line += 1;
        } else if heuristic
            && h.h1
            && heuristic_1_probability(
                u,
                bits(z).map(|j| {
                    let c = &sn.lines[j];
                    (&c.waiting, &c.survival, &st.line_u[j][..])
                }),
                t,
                r,
            ) >= h.epsilon
        {
            self.stats.h1 += 1;
        } else if heuristic
            && h.h2
            && bits(rest).all(|j| {
                let c = &sn.lines[j];
                u >= single_line_wait(&c.waiting, &c.survival, &st.line_u[j], t, r)
            })
        {
            self.stats.h2 += 1;
        } else {
            let mut target = rest;
            if self.config.prune_candidates() && z != rest {
                let profiles: Vec<Vec<f64>> = bits(z)
                    .map(|j| {
                        let c = &sn.lines[j];
                        single_line_wait_profile(&c.waiting, &c.survival, &st.line_u[j], t, r)
                    })
                    .collect();
                let mut reduced = z;
                for k in bits(rest & !z) {
                    if profiles.iter().any(|p| improves(&st.line_u[k], p, t)) {
                        reduced |= 1 << k;
                    }
                }
                if reduced != rest {
                    self.stats.candidate_prunes += 1;
                    target = reduced;
                }
            }
            let beta = if heuristic && h.h3 { h.beta } else { 1.0 };
            if let Eval::Value(s) = self.evaluate_station(slot, target, t, r, Some((u, beta))) {
                if u < s {
                    outcome = Some(s);
                }
            }
        }
        match outcome {
            None => {
                cache.record_dom(u, rest);
                (u, true)
            }
            Some(s) => {
                cache.record_nondom(u, rest);
                (s, false)
            }
        }
    }
}
