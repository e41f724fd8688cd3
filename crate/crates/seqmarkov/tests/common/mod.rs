//! Shared test utilities: an exhaustive-enumeration oracle for HMM
//! inference, tiny panel builders, and seeded random model generators.
#![allow(dead_code)] // each test binary uses a different subset
#![allow(clippy::needless_range_loop)]
//!
//! The oracle computes likelihoods, posterior marginals, and best paths by
//! enumerating every hidden-state path; it never touches the forward,
//! backward, or Viterbi recursions it is used to check.

use rand::Rng;
use seqmarkov::hmm::{EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::seqdata::{Alphabet, Cell, SequenceSet};

pub fn state_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("State {i}")).collect()
}

pub fn symbol_labels(m: usize) -> Vec<String> {
    (0..m).map(|i| char::from(b'a' + i as u8).to_string()).collect()
}

/// Build a panel over symbols 'a', 'b', ... where '?' is unknown and '%'
/// padding.
pub fn panel(m: usize, rows: &[&str]) -> SequenceSet {
    let alphabet = Alphabet::new(symbol_labels(m)).unwrap();
    let rows = rows
        .iter()
        .map(|r| {
            r.chars()
                .map(|c| match c {
                    '?' => Cell::Unknown,
                    '%' => Cell::Padding,
                    c => Cell::Symbol((c as u8 - b'a') as usize),
                })
                .collect()
        })
        .collect();
    SequenceSet::from_rows(alphabet, rows).unwrap()
}

/// Random dense HMM with `s` hidden states over `m` symbols.
pub fn random_hmm<R: Rng>(s: usize, m: usize, rng: &mut R) -> HiddenMarkovModel {
    let dist = |n: usize, rng: &mut R| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    };
    HiddenMarkovModel::new(
        Alphabet::new(symbol_labels(m)).unwrap(),
        state_labels(s),
        ProbabilityVector::new(dist(s, rng), state_labels(s)).unwrap(),
        TransitionMatrix::new((0..s).map(|_| dist(s, rng)).collect(), state_labels(s)).unwrap(),
        EmissionMatrix::new((0..s).map(|_| dist(m, rng)).collect()).unwrap(),
    )
    .unwrap()
}

/// Random observation row of length `t` over `m` symbols; cells turn
/// unknown with probability `p_unknown`.
pub fn random_row<R: Rng>(t: usize, m: usize, p_unknown: f64, rng: &mut R) -> Vec<Cell> {
    (0..t)
        .map(|_| {
            if rng.random::<f64>() < p_unknown {
                Cell::Unknown
            } else {
                Cell::Symbol(rng.random_range(0..m))
            }
        })
        .collect()
}

fn emission_probability(h: &HiddenMarkovModel, state: usize, cell: Cell) -> f64 {
    match cell {
        Cell::Symbol(m) => h.emissions.get(state, m),
        _ => 1.0,
    }
}

fn path_probability(h: &HiddenMarkovModel, path: &[usize], row: &[Cell]) -> f64 {
    let mut p = h.initial.get(path[0]) * emission_probability(h, path[0], row[0]);
    for t in 1..path.len() {
        p *= h.transitions.get(path[t - 1], path[t]) * emission_probability(h, path[t], row[t]);
    }
    p
}

fn all_paths(s: usize, t: usize) -> Vec<Vec<usize>> {
    let mut paths: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..t {
        let mut next = Vec::with_capacity(paths.len() * s);
        for p in &paths {
            for state in 0..s {
                let mut q = p.clone();
                q.push(state);
                next.push(q);
            }
        }
        paths = next;
    }
    paths
}

/// Log-likelihood by summing the probability of every hidden path.
pub fn enum_log_likelihood(h: &HiddenMarkovModel, row: &[Cell]) -> f64 {
    let len = row.iter().position(|c| *c == Cell::Padding).unwrap_or(row.len());
    if len == 0 {
        return 0.0;
    }
    let total: f64 = all_paths(h.n_states(), len)
        .iter()
        .map(|p| path_probability(h, p, &row[..len]))
        .sum();
    total.ln()
}

/// Posterior marginals `γ_t(s)` by path enumeration.
pub fn enum_posteriors(h: &HiddenMarkovModel, row: &[Cell]) -> Vec<Vec<f64>> {
    let len = row.iter().position(|c| *c == Cell::Padding).unwrap_or(row.len());
    let s = h.n_states();
    let mut gamma = vec![vec![0.0; s]; len];
    let mut total = 0.0;
    for path in all_paths(s, len) {
        let p = path_probability(h, &path, &row[..len]);
        total += p;
        for (t, &state) in path.iter().enumerate() {
            gamma[t][state] += p;
        }
    }
    for row in &mut gamma {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    gamma
}

/// Best path by enumeration, applying the decoder's documented tie rule
/// (smallest state index at the final state and at every backtrack step).
///
/// The prefix scores are maxima over explicitly enumerated prefix paths,
/// each summed left to right on its own; no recursion is shared with the
/// implementation under test. The backtrack then greedily picks the
/// smallest maximizing predecessor, which is exactly what the tie rule
/// prescribes.
pub fn enum_viterbi(h: &HiddenMarkovModel, row: &[Cell]) -> (Vec<usize>, f64) {
    let len = row.iter().position(|c| *c == Cell::Padding).unwrap_or(row.len());
    if len == 0 {
        return (Vec::new(), 0.0);
    }
    let s_count = h.n_states();
    // prefix_best[t][s]: best left-to-right log score over all enumerated
    // prefixes of length t+1 ending in state s.
    let mut prefix_best = vec![vec![f64::NEG_INFINITY; s_count]; len];
    for t in 0..len {
        for path in all_paths(s_count, t + 1) {
            let mut logp = h.initial.get(path[0]).ln()
                + emission_probability(h, path[0], row[0]).ln();
            for u in 1..=t {
                logp += h.transitions.get(path[u - 1], path[u]).ln();
                logp += emission_probability(h, path[u], row[u]).ln();
            }
            let end = path[t];
            if logp > prefix_best[t][end] {
                prefix_best[t][end] = logp;
            }
        }
    }
    let mut last = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (s, &v) in prefix_best[len - 1].iter().enumerate() {
        if v > best {
            best = v;
            last = s;
        }
    }
    let mut states = vec![last; len];
    for t in (1..len).rev() {
        let mut arg = 0usize;
        let mut arg_best = f64::NEG_INFINITY;
        for r in 0..s_count {
            let v = prefix_best[t - 1][r] + h.transitions.get(r, states[t]).ln();
            if v > arg_best {
                arg_best = v;
                arg = r;
            }
        }
        states[t - 1] = arg;
    }
    (states, best)
}
