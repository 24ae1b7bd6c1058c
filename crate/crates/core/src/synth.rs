//! Built-in instances: the two-station worked example, the 3-line network,
//! its random-mode variants, and small random networks for property tests.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{
    discretize_lognormal, propagate_headway, waiting_from_headway, BundleMeta, DiscretePmf, DistributionBundle,
    HeadwayModel, LognormalSpec, TimeGrid,
};
use crate::error::{Error, Result};
use crate::network::{ExpandedGraph, LineSpec, Network, NetworkSpec, StationSpec, SCHEMA};

/// A network, its bundle, and the trip to plan on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub spec: NetworkSpec,
    pub bundle: DistributionBundle,
    pub origin: String,
    pub destination: String,
    /// Budget in ticks; equal to the grid horizon for built-ins.
    pub budget: usize,
}

impl Instance {
    pub fn network(&self) -> Result<Arc<Network>> {
        Ok(Arc::new(Network::from_spec(&self.spec, &self.bundle)?))
    }

    pub fn graph(&self) -> Result<ExpandedGraph> {
        ExpandedGraph::build_by_id(self.network()?, &self.origin, &self.destination)
    }
}

fn station(id: &str) -> StationSpec {
    StationSpec {
        id: id.into(),
        name: id.into(),
        lat: None,
        lon: None,
    }
}

fn spec(stations: &[&str], lines: Vec<LineSpec>, grid: TimeGrid) -> NetworkSpec {
    NetworkSpec {
        schema: SCHEMA.into(),
        stations: stations.iter().map(|s| station(s)).collect(),
        lines,
        grid: Some(grid),
        bundle: None,
    }
}

/// Three direct lines from `O` to `D` on a one-minute grid with a 20 minute budget.
pub fn example1() -> Instance {
    let grid = TimeGrid::new(60.0, 20).expect("static grid");
    let waits: [&[(usize, f64)]; 3] = [
        &[(1, 0.05), (3, 0.05), (10, 0.9)],
        &[(5, 0.9), (15, 0.1)],
        &[(2, 0.5), (6, 0.5)],
    ];
    let travels: [&[(usize, f64)]; 3] = [&[(17, 0.8), (19, 0.1)], &[(15, 0.85)], &[(14, 0.6), (18, 0.1)]];
    let mut bundle = DistributionBundle::new(grid);
    let mut lines = Vec::new();
    for (k, (w, x)) in waits.iter().zip(travels).enumerate() {
        let id = (k + 1).to_string();
        bundle
            .insert(
                format!("wait/{id}/O"),
                DiscretePmf::from_points(&grid, w).expect("static pmf"),
            )
            .expect("grid matches");
        bundle
            .insert(
                format!("travel/{id}/O-D"),
                DiscretePmf::from_points(&grid, x).expect("static pmf"),
            )
            .expect("grid matches");
        lines.push(LineSpec {
            id: id.clone(),
            stops: vec!["O".into(), "D".into()],
            travel: vec![format!("travel/{id}/O-D")],
            waiting: vec![format!("wait/{id}/O")],
        });
    }
    Instance {
        name: "example1".into(),
        spec: spec(&["O", "D"], lines, grid),
        bundle,
        origin: "O".into(),
        destination: "D".into(),
        budget: 20,
    }
}

/// Parameters of the 3-line, 3-station network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Syn3Config {
    pub sigma: f64,
    pub delta_seconds: f64,
    pub budget_ticks: usize,
    /// Minimum realizable time of each segment, in ticks.
    pub shift: usize,
}

impl Default for Syn3Config {
    fn default() -> Self {
        Syn3Config {
            sigma: 0.25,
            delta_seconds: 15.0,
            budget_ticks: 180,
            shift: 1,
        }
    }
}

/// Origin headway, A→B and B→C scheduled times (minutes) of lines 1..3.
pub const SYN3_LINES: [(f64, f64, f64); 3] = [(10.0, 4.0, 5.0), (15.0, 4.0, 3.0), (12.0, 7.0, 4.0)];

/// Three lines through A, B, C with the attributes of [`SYN3_LINES`].
pub fn syn3(config: &Syn3Config) -> Result<Instance> {
    let mut inst = three_station(config, &SYN3_LINES.map(|(_, ab, bc)| (ab, bc)))?;
    inst.name = "syn3".into();
    Ok(inst)
}

/// Spread of sampled segment modes for [`random_modes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpread {
    /// Every mode in `[i, i + 1)` minutes for one `i` drawn from `1..=9`.
    LowDiff,
    /// Every mode in `[1, 10)` minutes.
    HighDiff,
}

impl std::str::FromStr for ModeSpread {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low-diff" => Ok(ModeSpread::LowDiff),
            "high-diff" => Ok(ModeSpread::HighDiff),
            other => Err(Error::InvalidParameter(format!("unknown mode spread `{other}`"))),
        }
    }
}

/// The 3-line network with segment modes drawn at random; headways are kept.
pub fn random_modes(spread: ModeSpread, seed: u64, config: &Syn3Config) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = match spread {
        ModeSpread::LowDiff => {
            let i = rng.gen_range(1..=9) as f64;
            (i, i + 1.0)
        }
        ModeSpread::HighDiff => (1.0, 10.0),
    };
    let mut modes = [(0.0, 0.0); 3];
    for m in modes.iter_mut() {
        *m = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    }
    let mut inst = three_station(config, &modes)?;
    inst.name = format!(
        "{}-{seed}",
        match spread {
            ModeSpread::LowDiff => "low-diff",
            ModeSpread::HighDiff => "high-diff",
        }
    );
    if let Some(meta) = inst.bundle.meta.as_mut() {
        meta.seed = Some(seed);
    }
    Ok(inst)
}

fn three_station(config: &Syn3Config, segments: &[(f64, f64); 3]) -> Result<Instance> {
    let grid = TimeGrid::new(config.delta_seconds, config.budget_ticks)?;
    let mut bundle = DistributionBundle::new(grid);
    let mut warnings = Vec::new();
    let mut lines = Vec::new();
    for (k, (&(headway, _, _), &(ab, bc))) in SYN3_LINES.iter().zip(segments).enumerate() {
        let id = (k + 1).to_string();
        let h = (headway * 60.0 / grid.delta_seconds).round() as usize;
        let mut legs = Vec::new();
        for (leg, minutes) in [("A-B", ab), ("B-C", bc)] {
            let spare = minutes * 60.0 - grid.seconds(config.shift);
            let mode = if spare < grid.delta_seconds {
                warnings.push(format!(
                    "line {id} {leg}: scheduled time below the minimum, mode clamped to one tick"
                ));
                grid.delta_seconds
            } else {
                spare
            };
            let spec = LognormalSpec::from_mode(mode, config.sigma, config.shift)?;
            let pmf = discretize_lognormal(&spec, &grid)?;
            bundle.insert(format!("travel/{id}/{leg}"), pmf.clone())?;
            legs.push(pmf);
        }
        let wait_a = waiting_from_headway(&HeadwayModel::deterministic(&grid, h))?;
        let cdf_b = propagate_headway(h, &legs[0])?;
        let wait_b = waiting_from_headway(&HeadwayModel::from_cdf(h, cdf_b))?;
        bundle.insert(format!("wait/{id}/A"), wait_a)?;
        bundle.insert(format!("wait/{id}/B"), wait_b)?;
        lines.push(LineSpec {
            id: id.clone(),
            stops: vec!["A".into(), "B".into(), "C".into()],
            travel: vec![format!("travel/{id}/A-B"), format!("travel/{id}/B-C")],
            waiting: vec![format!("wait/{id}/A"), format!("wait/{id}/B")],
        });
    }
    bundle.meta = Some(BundleMeta {
        source: Some("synthetic".into()),
        seed: None,
        warnings,
    });
    Ok(Instance {
        name: "three-station".into(),
        spec: spec(&["A", "B", "C"], lines, grid),
        bundle,
        origin: "A".into(),
        destination: "C".into(),
        budget: config.budget_ticks,
    })
}

/// Bounds for [`random_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomConfig {
    pub max_stations: usize,
    pub max_lines: usize,
    pub max_lines_per_station: usize,
    pub min_budget: usize,
    pub max_budget: usize,
    /// Largest number of support points of a generated pmf.
    pub max_support: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            max_stations: 4,
            max_lines: 4,
            max_lines_per_station: 3,
            min_budget: 10,
            max_budget: 80,
            max_support: 3,
        }
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, grid: &TimeGrid, lo: usize, hi: usize, max_support: usize) -> DiscretePmf {
    let n = rng.gen_range(1..=max_support);
    let mut ticks: Vec<usize> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    ticks.sort_unstable();
    ticks.dedup();
    let tail = if rng.gen_bool(0.3) {
        rng.gen_range(0.0..0.3)
    } else {
        0.0
    };
    let weights: Vec<f64> = ticks.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut mass = vec![0.0; grid.len()];
    for (&t, w) in ticks.iter().zip(&weights) {
        mass[t] += w / total * (1.0 - tail);
    }
    let inside: f64 = mass.iter().sum();
    DiscretePmf::new(mass, (1.0 - inside).max(0.0)).expect("generated pmf is valid")
}

/// A small random network. Station `S0` is the origin and the last station
/// the destination; lines visit random ordered subsets of the stations.
pub fn random_instance(seed: u64, config: &RandomConfig) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=config.max_stations.max(2));
    let budget = rng.gen_range(config.min_budget..=config.max_budget);
    let grid = TimeGrid::new(60.0, budget).expect("positive budget");
    let names: Vec<String> = (0..n).map(|k| format!("S{k}")).collect();
    let mut bundle = DistributionBundle::new(grid);
    let mut lines = Vec::new();
    let mut served = vec![0usize; n];
    let line_count = rng.gen_range(1..=config.max_lines);
    let longest_ride = (budget / 2).max(1);
    let longest_wait = (budget / 3).clamp(1, 15);
    let mut attempts = 0;
    while lines.len() < line_count && attempts < 50 {
        attempts += 1;
        let mut stops: Vec<usize> = (0..n).collect();
        stops.shuffle(&mut rng);
        let len = rng.gen_range(2..=n);
        stops.truncate(len);
        if rng.gen_bool(0.6) {
            stops.sort_unstable();
        }
        if stops[..len - 1]
            .iter()
            .any(|&s| served[s] >= config.max_lines_per_station)
        {
            continue;
        }
        for &s in &stops[..len - 1] {
            served[s] += 1;
        }
        let id = format!("L{}", lines.len());
        let mut travel = Vec::new();
        let mut waiting = Vec::new();
        for k in 0..len - 1 {
            let t_id = format!("travel/{id}/{k}");
            let w_id = format!("wait/{id}/{k}");
            let ride_hi = rng.gen_range(1..=longest_ride);
            bundle
                .insert(&t_id, random_pmf(&mut rng, &grid, 1, ride_hi, config.max_support))
                .expect("grid matches");
            bundle
                .insert(&w_id, random_pmf(&mut rng, &grid, 1, longest_wait, config.max_support))
                .expect("grid matches");
            travel.push(t_id);
            waiting.push(w_id);
        }
        lines.push(LineSpec {
            id,
            stops: stops.iter().map(|&s| names[s].clone()).collect(),
            travel,
            waiting,
        });
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Instance {
        name: format!("random-{seed}"),
        spec: spec(&refs, lines, grid),
        bundle,
        origin: names[0].clone(),
        destination: names[n - 1].clone(),
        budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_resolves() {
        let inst = example1();
        let g = inst.graph().unwrap();
        assert_eq!(g.station(0).unwrap().m(), 3);
    }

    #[test]
    fn syn3_pmfs_are_valid() {
        let inst = syn3(&Syn3Config::default()).unwrap();
        assert_eq!(inst.bundle.pmfs.len(), 12);
        for (id, pmf) in &inst.bundle.pmfs {
            assert!((pmf.total() - 1.0).abs() < 1e-9, "{id}");
            assert!(pmf.has_tick_floor(), "{id}");
        }
        // Deterministic origin headway of 10 minutes: uniform wait over 40 ticks.
        let w = inst.bundle.get("wait/1/A").unwrap();
        assert_eq!(w.max_support(), Some(40));
        assert!((w.at(17) - 1.0 / 40.0).abs() < 1e-12);
        // The A→B ride peaks near its scheduled 4 minutes.
        let x = inst.bundle.get("travel/1/A-B").unwrap();
        let peak = (0..=180).max_by(|&a, &b| x.at(a).total_cmp(&x.at(b))).unwrap();
        assert!((15..=17).contains(&peak), "peak at {peak}");
    }

    #[test]
    fn random_modes_are_seeded() {
        let c = Syn3Config::default();
        let a = random_modes(ModeSpread::LowDiff, 3, &c).unwrap();
        let b = random_modes(ModeSpread::LowDiff, 3, &c).unwrap();
        assert_eq!(a, b);
        assert!(random_modes(ModeSpread::HighDiff, 3, &c).unwrap().graph().is_ok());
    }

    #[test]
    fn random_instances_respect_bounds() {
        let c = RandomConfig::default();
        for seed in 0..100 {
            let inst = random_instance(seed, &c);
            let net = inst.network().unwrap();
            assert!(net.stations.len() <= 4);
            assert!(inst.budget <= 80);
            for s in 0..net.stations.len() {
                assert!(net.lines_serving(s).count() <= 3);
            }
            assert!(inst.graph().is_ok());
        }
    }
}
