//! Resolving networks, station pairs and durations from user input.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sota_core::dist::TimeGrid;
use sota_core::network::{ExpandedGraph, Network, NetworkSpec};
use sota_core::synth::{example1, random_modes, syn3, Instance, ModeSpread, Syn3Config};

/// Prefix naming a network built into the tool instead of a file.
pub const BUILTIN: &str = "builtin:";

/// A network ready to plan on, with the files it was read from.
#[derive(Clone, Debug)]
pub struct LoadedNetwork {
    pub id: String,
    pub network: Arc<Network>,
    /// Origin and destination used when none are given.
    pub default_od: Option<(String, String)>,
    pub inputs: Vec<PathBuf>,
}

impl LoadedNetwork {
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        Ok(LoadedNetwork {
            id: inst.name.clone(),
            network: inst.network()?,
            default_od: Some((inst.origin.clone(), inst.destination.clone())),
            inputs: Vec::new(),
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.network.grid
    }

    /// Builds the decision graph for `od` (`A:C`), or the default pair.
    pub fn graph(&self, od: Option<&str>) -> Result<ExpandedGraph> {
        let (o, d) = match od {
            Some(text) => parse_od(text)?,
            None => self.default_od.clone().with_context(|| {
                format!(
                    "network `{}` has no default trip; pass --od ORIGIN:DESTINATION",
                    self.id
                )
            })?,
        };
        Ok(ExpandedGraph::build_by_id(Arc::clone(&self.network), &o, &d)?)
    }
}

/// Built-in instances: `example1`, `syn3`, `low-diff:SEED`, `high-diff:SEED`.
pub fn builtin(name: &str) -> Result<Instance> {
    if let Some((spread, seed)) = name.split_once(':') {
        let spread: ModeSpread = spread.parse()?;
        let seed: u64 = seed.parse().with_context(|| format!("bad seed in `{name}`"))?;
        let mut inst = random_modes(spread, seed, &Syn3Config::default())?;
        inst.name = name.to_string();
        return Ok(inst);
    }
    match name {
        "example1" => Ok(example1()),
        "syn3" => Ok(syn3(&Syn3Config::default())?),
        other => bail!("unknown built-in network `{other}` (try example1, syn3, low-diff:SEED, high-diff:SEED)"),
    }
}

/// Loads `builtin:NAME` or a network file with its bundle.
pub fn load_network(source: &str, bundle: Option<&Path>) -> Result<LoadedNetwork> {
    if let Some(name) = source.strip_prefix(BUILTIN) {
        return LoadedNetwork::from_instance(&builtin(name)?);
    }
    let path = PathBuf::from(source);
    let spec = NetworkSpec::load(&path)?;
    let bundle_path = match bundle {
        Some(p) => p.to_path_buf(),
        None => spec
            .bundle_path(&path)
            .with_context(|| format!("{source} names no bundle; pass --bundle"))?,
    };
    let network = Network::load(&path, Some(&bundle_path))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string());
    Ok(LoadedNetwork {
        id,
        network: Arc::new(network),
        default_od: None,
        inputs: vec![path, bundle_path],
    })
}

/// `A:C` into station ids.
pub fn parse_od(text: &str) -> Result<(String, String)> {
    match text.split_once(':') {
        Some((o, d)) if !o.is_empty() && !d.is_empty() => Ok((o.to_string(), d.to_string())),
        _ => bail!("expected ORIGIN:DESTINATION, got `{text}`"),
    }
}

/// A duration with a unit (`22.5m`, `90s`, `1h`) or a bare tick count.
pub fn parse_budget(grid: &TimeGrid, text: &str) -> Result<usize> {
    let text = text.trim();
    if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(text.parse()?);
    }
    Ok(grid.parse_ticks(text)?)
}

/// `lo:hi:step` into the budgets `lo, lo + step, ..., hi`.
pub fn parse_sweep(grid: &TimeGrid, text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        bail!("expected LO:HI:STEP, got `{text}`");
    };
    let (lo, hi, step) = (
        parse_budget(grid, lo)?,
        parse_budget(grid, hi)?,
        parse_budget(grid, step)?,
    );
    if step == 0 || lo > hi {
        bail!("sweep `{text}` is empty");
    }
    Ok((lo..=hi).step_by(step).collect())
}
