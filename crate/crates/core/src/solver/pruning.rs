//! Dominance tests and heuristic rules evaluated at arrival nodes.
//!
//! Utility slices are indexed by remaining budget and must cover `0..=t`.

use crate::dist::{DiscretePmf, SurvivalTable};

/// Expected utility of waiting for a single line from state `(t, r)` and boarding it.
pub fn single_line_wait(waiting: &DiscretePmf, survival: &SurvivalTable, u_line: &[f64], t: usize, r: usize) -> f64 {
    let s = survival.at(r);
    if s <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for theta in 1..=t {
        let w = waiting.at(r + theta);
        if w > 0.0 {
            acc += w * u_line[t - theta];
        }
    }
    acc / s
}

/// [`single_line_wait`] at every state `(t - γ, r + γ)`, `γ = 0..=t`.
pub fn single_line_wait_profile(
    waiting: &DiscretePmf,
    survival: &SurvivalTable,
    u_line: &[f64],
    t: usize,
    r: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; t + 1];
    let mut numerator = 0.0;
    for gamma in (0..=t).rev() {
        if gamma < t {
            numerator += waiting.at(r + gamma + 1) * u_line[t - gamma - 1];
        }
        let s = survival.at(r + gamma);
        out[gamma] = if s > 0.0 { numerator / s } else { 0.0 };
    }
    out
}

/// Line `k` improves `j` when boarding `k` at some state `(t - γ, r + γ)`
/// beats waiting for `j` alone from there. `profile_j` comes from
/// [`single_line_wait_profile`].
pub fn improves(u_k: &[f64], profile_j: &[f64], t: usize) -> bool {
    (0..=t).any(|gamma| u_k[t - gamma] > profile_j[gamma])
}

/// Boarding now beats boarding any waited-for line one tick later.
pub fn subproblem_dominated(u_board: f64, others_prev: impl IntoIterator<Item = f64>) -> bool {
    others_prev.into_iter().all(|u| u_board >= u)
}

/// Probability that boarding now is no worse than boarding each line of
/// `z` on its own arrival, treating the lines as independent.
pub fn heuristic_1_probability<'a>(
    u_board: f64,
    z: impl IntoIterator<Item = (&'a DiscretePmf, &'a SurvivalTable, &'a [f64])>,
    t: usize,
    r: usize,
) -> f64 {
    let mut p = 1.0;
    for (waiting, survival, u_line) in z {
        let s = survival.at(r);
        if s <= 0.0 {
            continue;
        }
        let mut q = 0.0;
        for theta in 1..=t {
            if u_board >= u_line[t - theta] {
                q += waiting.at(r + theta);
            }
        }
        p *= q / s;
    }
    p
}
