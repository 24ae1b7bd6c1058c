use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::dist::DiscretePmf;
use crate::error::{Error, Result};
use crate::network::{bits, RideTarget};
use crate::solver::Decision;

/// Trajectories per RNG stream.
const CHUNK: usize = 4096;
const Z95: f64 = 1.959_963_984_540_054;

/// Success rate of a policy over seeded trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: u64,
    pub successes: u64,
    pub rate: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub std_error: f64,
    /// 95% Wilson score interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
}

impl SimulationReport {
    fn new(n: u64, successes: u64, seed: u64) -> Self {
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        SimulationReport {
            n,
            successes,
            rate: p,
            std_error: (p * (1.0 - p) / nf).sqrt(),
            ci_lo: (centre - half).max(0.0),
            ci_hi: (centre + half).min(1.0),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TripEvent {
    /// Lines (global indices) arriving together after `waited` ticks at `station`.
    Arrived {
        station: usize,
        lines: Vec<usize>,
        waited: usize,
        t: usize,
    },
    Board {
        station: usize,
        line: usize,
    },
    Decline {
        station: usize,
        lines: Vec<usize>,
    },
    Ride {
        from: usize,
        to: usize,
        ticks: usize,
    },
    StayOn {
        station: usize,
        line: usize,
    },
    Alight {
        station: usize,
    },
}

/// One simulated trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub events: Vec<TripEvent>,
    pub success: bool,
    /// Ticks to spare on arrival.
    pub slack: Option<usize>,
}

/// Inverse-cdf sampler; `None` is a draw beyond the horizon.
#[derive(Clone, Debug)]
struct Sampler {
    cum: Vec<f64>,
}

impl Sampler {
    fn new(pmf: &DiscretePmf) -> Self {
        let mut acc = 0.0;
        let cum = pmf
            .mass()
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Sampler { cum }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let u: f64 = rng.gen();
        let k = self.cum.partition_point(|&c| c <= u);
        (k < self.cum.len()).then_some(k)
    }
}

struct Samplers {
    /// `[slot][local line] -> (waiting, travel)`.
    lines: Vec<Vec<(Sampler, Sampler)>>,
}

impl Samplers {
    fn new(policy: &Policy) -> Self {
        let lines = policy
            .graph()
            .stations()
            .iter()
            .map(|sn| {
                sn.lines
                    .iter()
                    .map(|c| (Sampler::new(&c.waiting), Sampler::new(&c.travel)))
                    .collect()
            })
            .collect();
        Samplers { lines }
    }
}

enum Leg {
    Wait { station: usize, set: u32 },
    Ride { station: usize, line: usize },
}

fn trip(
    policy: &Policy,
    samplers: &Samplers,
    rng: &mut ChaCha8Rng,
    mut log: Option<&mut Vec<TripEvent>>,
) -> Result<Option<usize>> {
    let graph = policy.graph();
    let mut t = policy.budget();
    let mut leg = match graph.origin_node() {
        Some(crate::network::NodeId::Station { station, set }) => Leg::Wait { station, set },
        _ => return Ok(None),
    };
    let mut record = |e: TripEvent| {
        if let Some(log) = log.as_deref_mut() {
            log.push(e);
        }
    };
    loop {
        match leg {
            Leg::Wait { station, set } => {
                let slot = graph.slot(station).expect("waiting station has nodes");
                let sn = &graph.stations()[slot];
                let mut draws: Vec<(usize, usize)> = bits(set)
                    .filter_map(|k| samplers.lines[slot][k].0.draw(rng).map(|w| (w, k)))
                    .filter(|&(w, _)| w <= t)
                    .collect();
                draws.sort_unstable();
                let mut remaining = set;
                let mut boarded = None;
                let mut k = 0;
                while k < draws.len() {
                    let theta = draws[k].0;
                    let mut joint = 0u32;
                    while k < draws.len() && draws[k].0 == theta {
                        joint |= 1 << draws[k].1;
                        k += 1;
                    }
                    let left = t - theta;
                    record(TripEvent::Arrived {
                        station,
                        lines: bits(joint).map(|j| sn.lines[j].line).collect(),
                        waited: theta,
                        t: left,
                    });
                    let j = policy.preferred(station, joint, left).expect("nonempty arrival");
                    remaining &= !joint;
                    match policy.decide(station, j, remaining, left, theta)? {
                        Decision::Board => {
                            record(TripEvent::Board {
                                station,
                                line: sn.lines[j].line,
                            });
                            t = left;
                            boarded = Some(j);
                            break;
                        }
                        Decision::Wait => record(TripEvent::Decline {
                            station,
                            lines: bits(joint).map(|j| sn.lines[j].line).collect(),
                        }),
                    }
                }
                match boarded {
                    Some(line) => leg = Leg::Ride { station, line },
                    None => return Ok(None),
                }
            }
            Leg::Ride { station, line } => {
                let slot = graph.slot(station).expect("riding station has nodes");
                let c = &graph.stations()[slot].lines[line];
                let Some(theta) = samplers.lines[slot][line].1.draw(rng).filter(|&x| x <= t) else {
                    return Ok(None);
                };
                t -= theta;
                let to = graph.network.lines[c.line].stops[c.position + 1];
                record(TripEvent::Ride {
                    from: station,
                    to,
                    ticks: theta,
                });
                leg = match c.next {
                    RideTarget::Destination => return Ok(Some(t)),
                    RideTarget::Dead => return Ok(None),
                    RideTarget::Station { station, set } => {
                        record(TripEvent::Alight { station });
                        Leg::Wait { station, set }
                    }
                    RideTarget::Arrival { station, line, rest } => match policy.decide(station, line, rest, t, 0)? {
                        Decision::Board => {
                            record(TripEvent::StayOn { station, line: c.line });
                            Leg::Ride { station, line }
                        }
                        Decision::Wait => {
                            record(TripEvent::Alight { station });
                            Leg::Wait { station, set: rest }
                        }
                    },
                };
            }
        }
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `n` trips under `policy`. Trips are split into fixed chunks, each
/// with its own RNG stream of `seed`, so the result does not depend on the
/// number of worker threads.
///
/// Every line's first arrival is drawn once per station visit; lines that
/// arrive in the same tick are seen together and the passenger may board
/// the best of them or let them all go.
pub fn simulate(policy: &Policy, n: u64, seed: u64) -> Result<SimulationReport> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "simulation needs at least one trajectory".into(),
        ));
    }
    let samplers = Samplers::new(policy);
    let chunks = (n as usize).div_ceil(CHUNK);
    let counts: Vec<Result<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let size = CHUNK.min(n as usize - c * CHUNK);
            let mut wins = 0;
            for _ in 0..size {
                let before = rng.clone();
                match trip(policy, &samplers, &mut rng, None) {
                    Ok(slack) => wins += slack.is_some() as u64,
                    Err(e) => {
                        let mut replay = before;
                        let mut events = Vec::new();
                        let _ = trip(policy, &samplers, &mut replay, Some(&mut events));
                        return Err(Error::PolicyGap {
                            message: e.to_string(),
                            trajectory: serde_json::to_string(&events).unwrap_or_default(),
                        });
                    }
                }
            }
            Ok(wins)
        })
        .collect();
    let mut successes = 0;
    for c in counts {
        successes += c?;
    }
    Ok(SimulationReport::new(n, successes, seed))
}

/// One trip with its event log, drawn from stream `index` of `seed`.
pub fn sample_trajectory(policy: &Policy, seed: u64, index: u64) -> Result<TrajectorySample> {
    let samplers = Samplers::new(policy);
    let mut rng = stream(seed, index);
    let mut events = Vec::new();
    let slack = trip(policy, &samplers, &mut rng, Some(&mut events))?;
    Ok(TrajectorySample {
        events,
        success: slack.is_some(),
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::TimeGrid;

    #[test]
    fn sampler_follows_cdf() {
        let g = TimeGrid::new(60.0, 4).unwrap();
        let pmf = DiscretePmf::from_points(&g, &[(1, 0.5), (3, 0.25)]).unwrap();
        let s = Sampler::new(&pmf);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            match s.draw(&mut rng) {
                Some(1) => counts[0] += 1,
                Some(3) => counts[1] += 1,
                None => counts[2] += 1,
                Some(other) => panic!("drew {other}"),
            }
        }
        assert!((counts[0] as f64 / 40_000.0 - 0.5).abs() < 0.01);
        assert!((counts[1] as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn wilson_interval_brackets_rate() {
        let r = SimulationReport::new(1000, 800, 0);
        assert!(r.ci_lo < 0.8 && 0.8 < r.ci_hi);
        let zero = SimulationReport::new(10, 0, 0);
        assert_eq!(zero.ci_lo, 0.0);
        assert!(zero.ci_hi > 0.0);
    }
}
