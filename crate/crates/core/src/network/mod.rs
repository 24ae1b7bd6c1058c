//! Physical network description and its expansion into the decision graph.

mod bounds;
mod graph;

pub use bounds::{feasibility_bounds, physical_alpha, FeasibilityBounds};
pub(crate) use graph::{bits, subsets};
pub use graph::{
    candidate_lines, node_counts, CandidateLine, ExpandedGraph, Link, LinkKind, NodeId, RideTarget, StationNodes,
};

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dist::{DiscretePmf, DistributionBundle, TimeGrid};
use crate::error::{Error, Result};

pub const SCHEMA: &str = "sota-net/1";

/// Upper bound on candidate lines at one station; the node count grows as `m·2^(m-1)`.
pub const MAX_LINES_PER_STATION: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

/// One directed line. `travel[k]` is the pmf id of the ride from `stops[k]`
/// to `stops[k + 1]`; `waiting[k]` is the pmf id of the wait at `stops[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: String,
    pub stops: Vec<String>,
    pub travel: Vec<String>,
    pub waiting: Vec<String>,
}

/// JSON network document, schema `sota-net/1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub schema: String,
    pub stations: Vec<StationSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    /// Distribution bundle path, relative to the network file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<String>,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        if spec.schema != SCHEMA {
            return Err(Error::InvalidNetwork(format!(
                "unsupported schema `{}`, expected `{SCHEMA}`",
                spec.schema
            )));
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        NetworkSpec::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Resolves the bundle path relative to the directory holding `net_path`.
    pub fn bundle_path(&self, net_path: impl AsRef<Path>) -> Option<PathBuf> {
        let rel = self.bundle.as_ref()?;
        let base = net_path.as_ref().parent().unwrap_or_else(|| Path::new(""));
        Some(base.join(rel))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Station {
    pub id: String,
    pub name: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub id: String,
    pub stops: Vec<usize>,
    pub travel: Vec<DiscretePmf>,
    pub waiting: Vec<DiscretePmf>,
}

impl Line {
    /// Position of `station` in the stop list.
    pub fn position(&self, station: usize) -> Option<usize> {
        self.stops.iter().position(|&s| s == station)
    }
}

/// A validated network with every pmf resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub grid: TimeGrid,
    pub stations: Vec<Station>,
    pub lines: Vec<Line>,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn from_spec(spec: &NetworkSpec, bundle: &DistributionBundle) -> Result<Self> {
        if let Some(grid) = spec.grid {
            if grid != bundle.grid {
                return Err(Error::GridMismatch(format!(
                    "network declares {grid:?} but the bundle uses {:?}",
                    bundle.grid
                )));
            }
        }
        let mut index = HashMap::new();
        let mut stations = Vec::with_capacity(spec.stations.len());
        for s in &spec.stations {
            if index.insert(s.id.clone(), stations.len()).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate station id `{}`", s.id)));
            }
            stations.push(Station {
                id: s.id.clone(),
                name: s.name.clone(),
                lat: s.lat,
                lon: s.lon,
            });
        }
        let mut seen = HashSet::new();
        let mut lines = Vec::with_capacity(spec.lines.len());
        for l in &spec.lines {
            if !seen.insert(l.id.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate line id `{}`", l.id)));
            }
            lines.push(resolve_line(l, &index, bundle)?);
        }
        Ok(Network {
            grid: bundle.grid,
            stations,
            lines,
            index,
        })
    }

    /// Loads a network file and the bundle it references (or `bundle` if given).
    pub fn load(net_path: impl AsRef<Path>, bundle: Option<&Path>) -> Result<Self> {
        let spec = NetworkSpec::load(net_path.as_ref())?;
        let path = match bundle {
            Some(p) => p.to_path_buf(),
            None => spec
                .bundle_path(net_path.as_ref())
                .ok_or_else(|| Error::InvalidNetwork("network names no bundle and none was given".into()))?,
        };
        let bundle = DistributionBundle::load(&path)?;
        Network::from_spec(&spec, &bundle)
    }

    pub fn station_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownStation(id.to_string()))
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Lines that stop at `station` and continue to a later stop.
    pub fn lines_serving(&self, station: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter_map(move |(i, l)| l.position(station).filter(|&k| k + 1 < l.stops.len()).map(|k| (i, k)))
    }
}

fn resolve_line(l: &LineSpec, index: &HashMap<String, usize>, bundle: &DistributionBundle) -> Result<Line> {
    let bad = |msg: String| Error::InvalidNetwork(format!("line `{}`: {msg}", l.id));
    if l.stops.len() < 2 {
        return Err(bad("needs at least two stops".into()));
    }
    let n = l.stops.len() - 1;
    if l.travel.len() != n || l.waiting.len() != n {
        return Err(bad(format!(
            "{} stops need {n} travel and {n} waiting ids, got {} and {}",
            l.stops.len(),
            l.travel.len(),
            l.waiting.len()
        )));
    }
    let mut stops = Vec::with_capacity(l.stops.len());
    for s in &l.stops {
        let idx = *index.get(s).ok_or_else(|| Error::UnknownStation(s.clone()))?;
        if stops.contains(&idx) {
            return Err(bad(format!("visits station `{s}` twice")));
        }
        stops.push(idx);
    }
    let fetch = |id: &String, what: &str| -> Result<DiscretePmf> {
        let pmf = bundle.get(id)?;
        if !pmf.has_tick_floor() {
            return Err(bad(format!("{what} pmf `{id}` has mass at tick 0")));
        }
        Ok(pmf.clone())
    };
    let travel = l
        .travel
        .iter()
        .map(|id| fetch(id, "travel"))
        .collect::<Result<Vec<_>>>()?;
    let waiting = l
        .waiting
        .iter()
        .map(|id| fetch(id, "waiting"))
        .collect::<Result<Vec<_>>>()?;
    Ok(Line {
        id: l.id.clone(),
        stops,
        travel,
        waiting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> DistributionBundle {
        let grid = TimeGrid::new(60.0, 10).unwrap();
        let mut b = DistributionBundle::new(grid);
        b.insert("one", DiscretePmf::point(&grid, 1)).unwrap();
        b.insert("zero", DiscretePmf::point(&grid, 0)).unwrap();
        b
    }

    fn spec(stops: &[&str], travel: &str) -> NetworkSpec {
        let n = stops.len().saturating_sub(1);
        NetworkSpec {
            schema: SCHEMA.into(),
            stations: ["A", "B", "C"]
                .iter()
                .map(|s| StationSpec {
                    id: s.to_string(),
                    name: s.to_string(),
                    lat: None,
                    lon: None,
                })
                .collect(),
            lines: vec![LineSpec {
                id: "1".into(),
                stops: stops.iter().map(|s| s.to_string()).collect(),
                travel: vec![travel.to_string(); n],
                waiting: vec!["one".into(); n],
            }],
            grid: None,
            bundle: None,
        }
    }

    #[test]
    fn valid_network_resolves() {
        let net = Network::from_spec(&spec(&["A", "B", "C"], "one"), &bundle()).unwrap();
        assert_eq!(net.lines[0].stops, vec![0, 1, 2]);
        assert_eq!(net.lines_serving(1).collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(net.lines_serving(2).count(), 0);
    }

    #[test]
    fn rejects_malformed_lines() {
        let b = bundle();
        assert!(Network::from_spec(&spec(&["A"], "one"), &b).is_err());
        assert!(Network::from_spec(&spec(&["A", "B", "A"], "one"), &b).is_err());
        assert!(Network::from_spec(&spec(&["A", "Z"], "one"), &b).is_err());
        assert!(Network::from_spec(&spec(&["A", "B"], "missing"), &b).is_err());
        assert!(Network::from_spec(&spec(&["A", "B"], "zero"), &b).is_err());
    }

    #[test]
    fn schema_is_checked() {
        let mut s = spec(&["A", "B"], "one");
        s.schema = "other/2".into();
        let text = serde_json::to_string(&s).unwrap();
        assert!(NetworkSpec::from_json(&text).is_err());
    }
}
