use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{physical_alpha, Network, MAX_LINES_PER_STATION};
use crate::dist::{DiscretePmf, SurvivalTable};
use crate::error::{Error, Result};

/// Node of the expanded graph. Line indices and sets are local to the
/// station: bit `k` of a set is the station's `k`-th candidate line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeId {
    Station { station: usize, set: u32 },
    Arrival { station: usize, line: usize, rest: u32 },
    Line { station: usize, line: usize },
    Destination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Arrival,
    Riding,
    Boarding,
    Alighting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: LinkKind,
    /// Minimum realizable time of the link in ticks.
    pub min_ticks: usize,
}

/// Where a ride from one station to the next stop lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RideTarget {
    Destination,
    /// Still on board at `station`; the passenger may stay on or alight.
    Arrival {
        station: usize,
        line: usize,
        rest: u32,
    },
    /// The line offers nothing further: the passenger alights and waits.
    Station {
        station: usize,
        set: u32,
    },
    /// Nowhere to go from the next stop.
    Dead,
}

impl RideTarget {
    pub fn node(&self) -> Option<NodeId> {
        match *self {
            RideTarget::Destination => Some(NodeId::Destination),
            RideTarget::Arrival { station, line, rest } => Some(NodeId::Arrival { station, line, rest }),
            RideTarget::Station { station, set } => Some(NodeId::Station { station, set }),
            RideTarget::Dead => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateLine {
    /// Index into `Network::lines`.
    pub line: usize,
    /// Stop position of the station on the line.
    pub position: usize,
    pub travel: DiscretePmf,
    pub waiting: DiscretePmf,
    pub survival: SurvivalTable,
    pub next: RideTarget,
}

/// Decision nodes of one physical station.
#[derive(Clone, Debug, PartialEq)]
pub struct StationNodes {
    pub station: usize,
    pub lines: Vec<CandidateLine>,
}

impl StationNodes {
    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn full_set(&self) -> u32 {
        (1u32 << self.lines.len()) - 1
    }

    pub fn local(&self, line: usize) -> Option<usize> {
        self.lines.iter().position(|c| c.line == line)
    }

    /// Dense index of `A^{i, rest}`: `i·2^(m-1)` plus `rest` with bit `i` squeezed out.
    pub fn arrival_index(&self, i: usize, rest: u32) -> usize {
        let low = rest & ((1u32 << i) - 1);
        let high = (rest >> (i + 1)) << i;
        (i << (self.m() - 1)) + (low | high) as usize
    }
}

/// `(line nodes, station nodes, arrival nodes)` at a station with `m` candidate lines.
pub fn node_counts(m: usize) -> (usize, usize, usize) {
    if m == 0 {
        return (0, 0, 0);
    }
    (m, (1 << m) - 1, m << (m - 1))
}

/// Lines at `station` whose remaining stops reach a station with finite
/// minimum time to the destination, as `(line, position)` ordered by line id.
pub fn candidate_lines(network: &Network, station: usize, alpha: &[Option<usize>]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = network
        .lines_serving(station)
        .filter(|&(i, k)| {
            let line = &network.lines[i];
            for j in k + 1..line.stops.len() {
                if line.travel[j - 1].min_support().is_none() {
                    return false;
                }
                if alpha[line.stops[j]].is_some() {
                    return true;
                }
            }
            false
        })
        .collect();
    out.sort_by(|a, b| network.lines[a.0].id.cmp(&network.lines[b.0].id));
    out
}

/// The decision graph for one origin-destination pair.
#[derive(Clone, Debug)]
pub struct ExpandedGraph {
    pub network: Arc<Network>,
    pub origin: usize,
    pub destination: usize,
    stations: Vec<StationNodes>,
    slot: Vec<Option<usize>>,
}

impl ExpandedGraph {
    pub fn build(network: Arc<Network>, origin: usize, destination: usize) -> Result<Self> {
        let n = network.stations.len();
        if origin >= n {
            return Err(Error::UnknownStation(format!("#{origin}")));
        }
        if destination >= n {
            return Err(Error::UnknownStation(format!("#{destination}")));
        }
        if origin == destination {
            return Err(Error::InvalidParameter("origin and destination coincide".into()));
        }
        let alpha = physical_alpha(&network, destination);
        let mut sets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (y, set) in sets.iter_mut().enumerate() {
            if y == destination {
                continue;
            }
            *set = candidate_lines(&network, y, &alpha);
            if set.len() > MAX_LINES_PER_STATION {
                return Err(Error::Capacity {
                    station: network.stations[y].id.clone(),
                    lines: set.len(),
                    limit: MAX_LINES_PER_STATION,
                });
            }
        }
        let full = |y: usize| -> u32 { (1u32 << sets[y].len()) - 1 };
        let mut stations = Vec::new();
        let mut slot = vec![None; n];
        for y in 0..n {
            if sets[y].is_empty() {
                continue;
            }
            let lines = sets[y]
                .iter()
                .map(|&(i, k)| {
                    let line = &network.lines[i];
                    let z = line.stops[k + 1];
                    let next = if z == destination {
                        RideTarget::Destination
                    } else if let Some(local) = sets[z].iter().position(|&(j, _)| j == i) {
                        RideTarget::Arrival {
                            station: z,
                            line: local,
                            rest: full(z) & !(1u32 << local),
                        }
                    } else if !sets[z].is_empty() {
                        RideTarget::Station {
                            station: z,
                            set: full(z),
                        }
                    } else {
                        RideTarget::Dead
                    };
                    CandidateLine {
                        line: i,
                        position: k,
                        travel: line.travel[k].clone(),
                        waiting: line.waiting[k].clone(),
                        survival: line.waiting[k].survival(),
                        next,
                    }
                })
                .collect();
            slot[y] = Some(stations.len());
            stations.push(StationNodes { station: y, lines });
        }
        Ok(ExpandedGraph {
            network,
            origin,
            destination,
            stations,
            slot,
        })
    }

    /// Looks up stations by id.
    pub fn build_by_id(network: Arc<Network>, origin: &str, destination: &str) -> Result<Self> {
        let o = network.station_index(origin)?;
        let d = network.station_index(destination)?;
        ExpandedGraph::build(network, o, d)
    }

    pub fn budget_horizon(&self) -> usize {
        self.network.grid.budget_ticks
    }

    /// Stations that carry decision nodes.
    pub fn stations(&self) -> &[StationNodes] {
        &self.stations
    }

    pub fn station(&self, station: usize) -> Option<&StationNodes> {
        self.slot.get(station).copied().flatten().map(|k| &self.stations[k])
    }

    /// Position of `station` in [`ExpandedGraph::stations`].
    pub fn slot(&self, station: usize) -> Option<usize> {
        self.slot.get(station).copied().flatten()
    }

    pub fn origin_node(&self) -> Option<NodeId> {
        self.station(self.origin).map(|s| NodeId::Station {
            station: self.origin,
            set: s.full_set(),
        })
    }

    pub fn station_id(&self, station: usize) -> &str {
        &self.network.stations[station].id
    }

    pub fn line_id(&self, station: usize, local: usize) -> Option<&str> {
        let s = self.station(station)?;
        let c = s.lines.get(local)?;
        Some(&self.network.lines[c.line].id)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = vec![NodeId::Destination];
        for s in &self.stations {
            let y = s.station;
            for line in 0..s.m() {
                out.push(NodeId::Line { station: y, line });
            }
            for set in 1..=s.full_set() {
                out.push(NodeId::Station { station: y, set });
            }
            for line in 0..s.m() {
                let others = s.full_set() & !(1u32 << line);
                for rest in subsets(others) {
                    out.push(NodeId::Arrival { station: y, line, rest });
                }
            }
        }
        out
    }

    pub fn links(&self) -> Vec<Link> {
        let mut out = Vec::new();
        for s in &self.stations {
            let y = s.station;
            for set in 1..=s.full_set() {
                for i in bits(set) {
                    out.push(Link {
                        from: NodeId::Station { station: y, set },
                        to: NodeId::Arrival {
                            station: y,
                            line: i,
                            rest: set & !(1u32 << i),
                        },
                        kind: LinkKind::Arrival,
                        min_ticks: 1,
                    });
                }
            }
            for (i, c) in s.lines.iter().enumerate() {
                let others = s.full_set() & !(1u32 << i);
                for rest in subsets(others) {
                    let from = NodeId::Arrival {
                        station: y,
                        line: i,
                        rest,
                    };
                    out.push(Link {
                        from,
                        to: NodeId::Line { station: y, line: i },
                        kind: LinkKind::Boarding,
                        min_ticks: 0,
                    });
                    if rest != 0 {
                        out.push(Link {
                            from,
                            to: NodeId::Station { station: y, set: rest },
                            kind: LinkKind::Alighting,
                            min_ticks: 0,
                        });
                    }
                }
                if let (Some(to), Some(min)) = (c.next.node(), c.travel.min_support()) {
                    out.push(Link {
                        from: NodeId::Line { station: y, line: i },
                        to,
                        kind: LinkKind::Riding,
                        min_ticks: min,
                    });
                }
            }
        }
        out
    }

    /// True when the links of zero minimum time form no cycle.
    pub fn zero_time_acyclic(&self) -> bool {
        let links = self.links();
        let mut indeg: HashMap<NodeId, usize> = HashMap::new();
        let mut succ: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for l in links.iter().filter(|l| l.min_ticks == 0) {
            *indeg.entry(l.to).or_default() += 1;
            indeg.entry(l.from).or_default();
            succ.entry(l.from).or_default().push(l.to);
        }
        let mut queue: Vec<NodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut seen = 0;
        while let Some(n) = queue.pop() {
            seen += 1;
            for &t in succ.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indeg.get_mut(&t).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(t);
                }
            }
        }
        seen == indeg.len()
    }
}

/// Indices of the set bits of `mask`, ascending.
pub(crate) fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |k| mask & (1u32 << k) != 0)
}

/// All subsets of `mask`, including the empty set, in increasing numeric order.
pub(crate) fn subsets(mask: u32) -> impl Iterator<Item = u32> {
    (0..=mask).filter(move |s| s & !mask == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DistributionBundle, TimeGrid};
    use crate::network::{LineSpec, NetworkSpec, StationSpec, SCHEMA};

    /// `m` parallel lines from A to B, plus an A-B-C line when `through` is set.
    fn parallel(m: usize) -> Arc<Network> {
        let grid = TimeGrid::new(60.0, 30).unwrap();
        let mut b = DistributionBundle::new(grid);
        b.insert("w", DiscretePmf::uniform(&grid, 1, 4).unwrap()).unwrap();
        b.insert("t", DiscretePmf::point(&grid, 3)).unwrap();
        let stations = ["A", "B"]
            .iter()
            .map(|s| StationSpec {
                id: s.to_string(),
                name: s.to_string(),
                lat: None,
                lon: None,
            })
            .collect();
        let lines = (0..m)
            .map(|k| LineSpec {
                id: format!("L{k}"),
                stops: vec!["A".into(), "B".into()],
                travel: vec!["t".into()],
                waiting: vec!["w".into()],
            })
            .collect();
        let spec = NetworkSpec {
            schema: SCHEMA.into(),
            stations,
            lines,
            grid: None,
            bundle: None,
        };
        Arc::new(Network::from_spec(&spec, &b).unwrap())
    }

    #[test]
    fn node_counts_match_nodes() {
        for m in 1..=MAX_LINES_PER_STATION {
            let g = ExpandedGraph::build(parallel(m), 0, 1).unwrap();
            let nodes = g.nodes();
            let count = |f: fn(&NodeId) -> bool| nodes.iter().filter(|n| f(n)).count();
            let (l, s, a) = node_counts(m);
            assert_eq!(count(|n| matches!(n, NodeId::Line { .. })), l);
            assert_eq!(count(|n| matches!(n, NodeId::Station { .. })), s);
            assert_eq!(count(|n| matches!(n, NodeId::Arrival { .. })), a);
        }
        assert_eq!(node_counts(2), (2, 3, 4));
        assert_eq!(node_counts(3), (3, 7, 12));
    }

    #[test]
    fn capacity_is_enforced() {
        let err = ExpandedGraph::build(parallel(MAX_LINES_PER_STATION + 1), 0, 1).unwrap_err();
        assert!(matches!(err, Error::Capacity { lines: 9, .. }));
    }

    #[test]
    fn arrival_indices_are_dense() {
        let g = ExpandedGraph::build(parallel(4), 0, 1).unwrap();
        let s = g.station(0).unwrap();
        let mut seen = [false; 4 << 3];
        for i in 0..4 {
            for rest in subsets(s.full_set() & !(1 << i)) {
                let k = s.arrival_index(i, rest);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn arrival_nodes_have_one_boarding_and_at_most_one_alighting_link() {
        let g = ExpandedGraph::build(parallel(3), 0, 1).unwrap();
        let links = g.links();
        for n in g.nodes() {
            if let NodeId::Arrival { rest, .. } = n {
                let out: Vec<_> = links.iter().filter(|l| l.from == n).collect();
                assert_eq!(out.iter().filter(|l| l.kind == LinkKind::Boarding).count(), 1);
                let alight = out.iter().filter(|l| l.kind == LinkKind::Alighting).count();
                assert_eq!(alight, usize::from(rest != 0));
            }
        }
        assert!(g.zero_time_acyclic());
    }

    #[test]
    fn rebuild_is_stable() {
        let net = parallel(3);
        let a = ExpandedGraph::build(net.clone(), 0, 1).unwrap();
        let b = ExpandedGraph::build(net, 0, 1).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.links(), b.links());
    }

    #[test]
    fn origin_equal_destination_is_rejected() {
        assert!(ExpandedGraph::build(parallel(1), 0, 0).is_err());
    }
}
