use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use super::{ExpandedGraph, Network, NodeId};

/// Minimum realizable time to the destination, per station (`None` when unreachable).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityBounds {
    pub alpha: Vec<Option<usize>>,
}

impl FeasibilityBounds {
    pub fn get(&self, station: usize) -> Option<usize> {
        self.alpha.get(station).copied().flatten()
    }

    /// True when no realization can reach the destination within `t` ticks.
    pub fn infeasible(&self, station: usize, t: usize) -> bool {
        self.get(station).is_none_or(|a| t < a)
    }
}

/// Station-level minimum riding time to `destination`, ignoring waits.
pub fn physical_alpha(network: &Network, destination: usize) -> Vec<Option<usize>> {
    let n = network.stations.len();
    let mut back: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for line in &network.lines {
        for (k, pmf) in line.travel.iter().enumerate() {
            if let Some(w) = pmf.min_support() {
                back[line.stops[k + 1]].push((line.stops[k], w));
            }
        }
    }
    dijkstra(n, destination, |v| back[v].iter().copied())
}

/// Minimum realizable time from every node of `graph` to the destination;
/// a station's bound is the smallest over its nodes. Arrival links cost
/// one tick, riding links their pmf's minimum, boarding and alighting nothing.
pub fn feasibility_bounds(graph: &ExpandedGraph) -> FeasibilityBounds {
    let nodes = graph.nodes();
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut back: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for l in graph.links() {
        back[index[&l.to]].push((index[&l.from], l.min_ticks));
    }
    let dist = dijkstra(nodes.len(), index[&NodeId::Destination], |v| back[v].iter().copied());
    let mut alpha = vec![None; graph.network.stations.len()];
    alpha[graph.destination] = Some(0);
    for (node, d) in nodes.iter().zip(dist) {
        let station = match *node {
            NodeId::Station { station, .. } | NodeId::Arrival { station, .. } | NodeId::Line { station, .. } => station,
            NodeId::Destination => continue,
        };
        if let Some(d) = d {
            alpha[station] = Some(alpha[station].map_or(d, |a: usize| a.min(d)));
        }
    }
    FeasibilityBounds { alpha }
}

fn dijkstra<I>(n: usize, source: usize, edges: impl Fn(usize) -> I) -> Vec<Option<usize>>
where
    I: Iterator<Item = (usize, usize)>,
{
    let mut dist = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0);
    heap.push(Reverse((0usize, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].is_some_and(|best| d > best) {
            continue;
        }
        for (u, w) in edges(v) {
            let nd = d + w;
            if dist[u].is_none_or(|best| nd < best) {
                dist[u] = Some(nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DiscretePmf, DistributionBundle, TimeGrid};
    use crate::network::{LineSpec, NetworkSpec, StationSpec, SCHEMA};
    use std::sync::Arc;

    fn network() -> Arc<Network> {
        let grid = TimeGrid::new(60.0, 40).unwrap();
        let mut b = DistributionBundle::new(grid);
        b.insert("w", DiscretePmf::uniform(&grid, 2, 5).unwrap()).unwrap();
        b.insert("t3", DiscretePmf::uniform(&grid, 3, 6).unwrap()).unwrap();
        b.insert("t5", DiscretePmf::point(&grid, 5)).unwrap();
        let st = |s: &str| StationSpec {
            id: s.into(),
            name: s.into(),
            lat: None,
            lon: None,
        };
        let line = |id: &str, stops: &[&str], travel: &[&str]| LineSpec {
            id: id.into(),
            stops: stops.iter().map(|s| s.to_string()).collect(),
            travel: travel.iter().map(|s| s.to_string()).collect(),
            waiting: vec!["w".into(); travel.len()],
        };
        let spec = NetworkSpec {
            schema: SCHEMA.into(),
            stations: vec![st("A"), st("B"), st("C"), st("X")],
            lines: vec![
                line("1", &["A", "B", "C"], &["t3", "t5"]),
                line("2", &["B", "C"], &["t3"]),
                line("3", &["A", "X"], &["t5"]),
            ],
            grid: None,
            bundle: None,
        };
        Arc::new(Network::from_spec(&spec, &b).unwrap())
    }

    #[test]
    fn expanded_bounds() {
        let net = network();
        let g = ExpandedGraph::build(net.clone(), 0, 2).unwrap();
        let b = feasibility_bounds(&g);
        assert_eq!(b.get(2), Some(0));
        // B: best riding minimum to C is line 2's 3 ticks
        assert_eq!(b.get(1), Some(3));
        // A: ride line 1 to B (3) then line 1 onward (5) or line 2 after a wait (1 + 3)
        assert_eq!(b.get(0), Some(7));
        assert_eq!(b.get(3), None);
        assert!(b.infeasible(3, 40));
        assert!(b.infeasible(0, 6));
        assert!(!b.infeasible(0, 7));
    }

    #[test]
    fn dead_end_line_is_not_a_candidate() {
        let net = network();
        let g = ExpandedGraph::build(net.clone(), 0, 2).unwrap();
        let a = g.station(0).unwrap();
        assert_eq!(a.lines.len(), 1);
        assert_eq!(net.lines[a.lines[0].line].id, "1");
        assert!(g.station(3).is_none());
    }

    #[test]
    fn physical_alpha_ignores_waits() {
        let net = network();
        let alpha = physical_alpha(&net, 2);
        assert_eq!(alpha, vec![Some(6), Some(3), Some(0), None]);
    }
}
