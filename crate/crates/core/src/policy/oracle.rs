use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::network::Network;

/// Default limit on the number of joint first-arrival tuples.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

/// Number of joint first-arrival tuples the oracle enumerates at `r = 0`,
/// summed over stations: the product of `support + 1` (the `+1` is "not
/// within the horizon") over every line serving the station.
pub fn oracle_estimate(network: &Network) -> u128 {
    (0..network.stations.len())
        .filter(|&y| network.lines_serving(y).next().is_some())
        .map(|y| {
            network
                .lines_serving(y)
                .map(|(i, k)| network.lines[i].waiting[k].support().count() as u128 + 1)
                .product::<u128>()
        })
        .sum()
}

/// Exact on-time probability of the best adaptive strategy, by backward
/// induction over the tree of joint first-arrival times.
///
/// The oracle does not reuse the expanded graph: every line serving a
/// station is waited for, and at each visit the joint arrival tuple of all
/// outstanding lines is enumerated outright from the conditioned pmfs.
pub fn enumerate_oracle(network: &Network, origin: usize, destination: usize, budget: usize, cap: u128) -> Result<f64> {
    if budget > network.grid.budget_ticks {
        return Err(Error::BudgetExceedsGrid {
            budget,
            horizon: network.grid.budget_ticks,
        });
    }
    if network.lines.len() > 64 {
        return Err(Error::InvalidParameter("the oracle handles at most 64 lines".into()));
    }
    let estimate = oracle_estimate(network);
    if estimate > cap {
        return Err(Error::SupportExplosion { estimate, cap });
    }
    let mut oracle = Oracle {
        network,
        destination,
        waits: HashMap::new(),
        rides: HashMap::new(),
    };
    let all = oracle.serving(origin, None);
    Ok(oracle.wait(origin, all, budget, 0))
}

struct Oracle<'a> {
    network: &'a Network,
    destination: usize,
    waits: HashMap<(usize, u64, usize, usize), f64>,
    rides: HashMap<(usize, usize, usize), f64>,
}

impl Oracle<'_> {
    /// Lines leaving `station`, as a bit set over global line indices.
    fn serving(&self, station: usize, except: Option<usize>) -> u64 {
        self.network
            .lines_serving(station)
            .filter(|&(i, _)| Some(i) != except)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Value of being on line `i` as it leaves stop position `k` with `t` left.
    fn ride(&mut self, i: usize, k: usize, t: usize) -> f64 {
        if let Some(&v) = self.rides.get(&(i, k, t)) {
            return v;
        }
        let line = &self.network.lines[i];
        let z = line.stops[k + 1];
        let mut total = 0.0;
        for (theta, p) in line.travel[k].support() {
            if theta > t {
                break;
            }
            let left = t - theta;
            let after = if z == self.destination {
                1.0
            } else {
                let stay = if k + 2 < line.stops.len() {
                    self.ride(i, k + 1, left)
                } else {
                    0.0
                };
                let set = self.serving(z, Some(i));
                stay.max(self.wait(z, set, left, 0))
            };
            total += p * after;
        }
        self.rides.insert((i, k, t), total);
        total
    }

    /// Value of waiting at `station` for the lines in `set`, `r` ticks in.
    fn wait(&mut self, station: usize, set: u64, t: usize, r: usize) -> f64 {
        if set == 0 || t == 0 {
            return 0.0;
        }
        if let Some(&v) = self.waits.get(&(station, set, t, r)) {
            return v;
        }
        // Conditional first-arrival outcomes of each outstanding line; `None`
        // stands for "not within the horizon".
        let mut outcomes: Vec<(usize, Vec<(Option<usize>, f64)>)> = Vec::new();
        for i in (0..64).filter(|i| set & (1u64 << i) != 0) {
            let line = &self.network.lines[i];
            let k = line.position(station).expect("serving line stops here");
            let pmf = &line.waiting[k];
            let beyond: f64 = pmf.mass()[(r + 1).min(pmf.len())..].iter().sum::<f64>() + pmf.tail();
            if beyond <= 0.0 {
                continue;
            }
            let mut o: Vec<(Option<usize>, f64)> = pmf
                .support()
                .filter(|&(w, _)| w > r)
                .map(|(w, p)| (Some(w - r), p / beyond))
                .collect();
            if pmf.tail() > 0.0 {
                o.push((None, pmf.tail() / beyond));
            }
            outcomes.push((i, o));
        }
        let mut total = 0.0;
        let mut pick = vec![0usize; outcomes.len()];
        'tuples: loop {
            let mut prob = 1.0;
            let mut first: Option<usize> = None;
            for (n, (_, o)) in outcomes.iter().enumerate() {
                let (w, p) = o[pick[n]];
                prob *= p;
                if let Some(w) = w {
                    first = Some(first.map_or(w, |f| f.min(w)));
                }
            }
            if let Some(theta) = first.filter(|&f| f <= t) {
                let left = t - theta;
                let mut arrived = 0u64;
                let mut board = 0.0f64;
                for (n, (i, o)) in outcomes.iter().enumerate() {
                    if o[pick[n]].0 == Some(theta) {
                        arrived |= 1 << i;
                        let k = self.network.lines[*i]
                            .position(station)
                            .expect("serving line stops here");
                        board = board.max(self.ride(*i, k, left));
                    }
                }
                let keep_waiting = self.wait(station, set & !arrived, left, r + theta);
                total += prob * board.max(keep_waiting);
            }
            for n in 0..pick.len() {
                pick[n] += 1;
                if pick[n] < outcomes[n].1.len() {
                    continue 'tuples;
                }
                pick[n] = 0;
            }
            break;
        }
        self.waits.insert((station, set, t, r), total);
        total
    }
}
