//! Hidden Markov model inference in log space: forward/backward likelihoods,
//! posterior smoothing, Viterbi decoding, and the Baum-Welch EM update.
//!
//! Missing-data conventions, applied uniformly across all recursions:
//! unknown cells contribute an emission factor of 1 (log term 0) and are
//! excluded from emission-count accumulation; padding cells terminate a
//! sequence. Parameters that are exactly 0 stay exactly 0 through EM
//! (structural zeros), and rows with no expected mass are left unchanged.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{format_prob, sample_index, MarkovModel, ProbabilityVector, TransitionMatrix};
use crate::seqdata::{Alphabet, Cell, SequenceSet};

/// Numerically stable `ln Σ exp(x_i)`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Row-stochastic S×M matrix mapping hidden states to observed symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmissionMatrixRepr", into = "EmissionMatrixRepr")]
pub struct EmissionMatrix {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EmissionMatrixRepr {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<EmissionMatrixRepr> for EmissionMatrix {
    type Error = Error;
    fn try_from(r: EmissionMatrixRepr) -> Result<Self> {
        EmissionMatrix::new(r.rows)
    }
}

impl From<EmissionMatrix> for EmissionMatrixRepr {
    fn from(m: EmissionMatrix) -> Self {
        EmissionMatrixRepr { rows: m.rows }
    }
}

impl EmissionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("emission matrix must be non-empty".into()));
        }
        let m = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInput(format!(
                    "emission row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidInput(format!("emission row {i} has a bad entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("emission row {i} sums to {sum}, not 1")));
            }
        }
        Ok(EmissionMatrix { rows })
    }

    /// The identity matrix: hidden states emit themselves. Embeds a Markov
    /// model over observed states into the HMM engine.
    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        EmissionMatrix { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, state: usize, symbol: usize) -> f64 {
        self.rows[state][symbol]
    }
}

/// Hidden Markov model: initial and transition distributions over `S` hidden
/// states plus an emission matrix onto the observed alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenMarkovModel {
    pub alphabet: Alphabet,
    pub state_labels: Vec<String>,
    pub initial: ProbabilityVector,
    pub transitions: TransitionMatrix,
    pub emissions: EmissionMatrix,
}

impl HiddenMarkovModel {
    pub fn new(
        alphabet: Alphabet,
        state_labels: Vec<String>,
        initial: ProbabilityVector,
        transitions: TransitionMatrix,
        emissions: EmissionMatrix,
    ) -> Result<Self> {
        let s = state_labels.len();
        if initial.len() != s || transitions.n_states() != s || emissions.n_states() != s {
            return Err(Error::DimensionMismatch(format!(
                "{s} state labels, initial {}, transitions {}, emission rows {}",
                initial.len(),
                transitions.n_states(),
                emissions.n_states()
            )));
        }
        if emissions.n_symbols() != alphabet.len() {
            return Err(Error::DimensionMismatch(format!(
                "emission matrix has {} symbols, alphabet has {}",
                emissions.n_symbols(),
                alphabet.len()
            )));
        }
        Ok(HiddenMarkovModel { alphabet, state_labels, initial, transitions, emissions })
    }

    /// Embed a Markov model as an HMM with identity emissions.
    pub fn from_markov(m: &MarkovModel) -> Self {
        HiddenMarkovModel {
            alphabet: m.alphabet.clone(),
            state_labels: m.alphabet.symbols().to_vec(),
            initial: m.initial.clone(),
            transitions: m.transitions.clone(),
            emissions: EmissionMatrix::identity(m.alphabet.len()),
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    /// Draw `n` fully observed sequences of length `t`.
    pub fn simulate<R: Rng>(&self, n: usize, t: usize, rng: &mut R) -> Result<SequenceSet> {
        Ok(self.simulate_with_paths(n, t, rng)?.0)
    }

    /// Like [`simulate`](Self::simulate), also returning the hidden paths.
    pub fn simulate_with_paths<R: Rng>(
        &self,
        n: usize,
        t: usize,
        rng: &mut R,
    ) -> Result<(SequenceSet, Vec<Vec<usize>>)> {
        let mut paths = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut path = Vec::with_capacity(t);
            let mut row = Vec::with_capacity(t);
            let mut state = sample_index(self.initial.entries(), rng);
            for step in 0..t {
                if step > 0 {
                    state = sample_index(self.transitions.row(state), rng);
                }
                path.push(state);
                row.push(Cell::Symbol(sample_index(self.emissions.row(state), rng)));
            }
            paths.push(path);
            rows.push(row);
        }
        Ok((SequenceSet::from_rows(self.alphabet.clone(), rows)?, paths))
    }
}

impl fmt::Display for HiddenMarkovModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym_width =
            self.alphabet.symbols().iter().map(|l| l.len()).max().unwrap_or(0).max(6);
        let state_width = self.state_labels.iter().map(|l| l.len()).max().unwrap_or(0).max(4);
        writeln!(f, "Initial probabilities :")?;
        for l in &self.state_labels {
            write!(f, " {l:>sym_width$}")?;
        }
        writeln!(f)?;
        for p in self.initial.entries() {
            write!(f, " {:>sym_width$}", format_prob(*p))?;
        }
        writeln!(f)?;
        writeln!(f)?;
        writeln!(f, "Transition probabilities :")?;
        writeln!(f, "{:state_width$}  to", "")?;
        write!(f, "{:<state_width$}  ", "from")?;
        for l in &self.state_labels {
            write!(f, " {l:>sym_width$}")?;
        }
        writeln!(f)?;
        for (r, label) in self.state_labels.iter().enumerate() {
            write!(f, "  {label:<state_width$}")?;
            for p in self.transitions.row(r) {
                write!(f, " {:>sym_width$}", format_prob(*p))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "Emission probabilities :")?;
        write!(f, "{:<state_width$}  ", "state")?;
        for l in self.alphabet.symbols() {
            write!(f, " {l:>sym_width$}")?;
        }
        writeln!(f)?;
        for (s, label) in self.state_labels.iter().enumerate() {
            write!(f, "  {label:<state_width$}")?;
            for p in self.emissions.row(s) {
                write!(f, " {:>sym_width$}", format_prob(*p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Effective sequence length: cells before the first padding cell.
fn effective_len(row: &[Cell]) -> usize {
    row.iter().position(|c| *c == Cell::Padding).unwrap_or(row.len())
}

/// Log-parameter tables of a model, computed once per sweep so the hot
/// recursions never call `ln` on probabilities.
pub(crate) struct LogModel {
    s_count: usize,
    m_count: usize,
    log_initial: Vec<f64>,
    /// Row-major `[r * S + s]`.
    log_transitions: Vec<f64>,
    /// Row-major `[s * M + m]`.
    log_emissions: Vec<f64>,
}

impl LogModel {
    pub fn new(h: &HiddenMarkovModel) -> Self {
        let s_count = h.n_states();
        let m_count = h.alphabet.len();
        let mut log_transitions = Vec::with_capacity(s_count * s_count);
        for r in 0..s_count {
            log_transitions.extend(h.transitions.row(r).iter().map(|p| p.ln()));
        }
        let mut log_emissions = Vec::with_capacity(s_count * m_count);
        for r in 0..s_count {
            log_emissions.extend(h.emissions.row(r).iter().map(|p| p.ln()));
        }
        LogModel {
            s_count,
            m_count,
            log_initial: h.initial.entries().iter().map(|p| p.ln()).collect(),
            log_transitions,
            log_emissions,
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.m_count
    }

    #[inline]
    fn log_transition(&self, from: usize, to: usize) -> f64 {
        self.log_transitions[from * self.s_count + to]
    }

    /// `ln b_s(y_t)` for an observed symbol, 0 for an unknown cell.
    #[inline]
    fn log_emission(&self, state: usize, cell: Cell) -> f64 {
        match cell {
            Cell::Symbol(m) => self.log_emissions[state * self.m_count + m],
            _ => 0.0,
        }
    }
}

/// Result of a forward pass over one sequence.
#[derive(Debug, Clone)]
pub struct LogForward {
    /// `ln P(y_1..y_L)`; 0 for an empty sequence, −∞ if impossible.
    pub log_likelihood: f64,
    /// `table[t][s] = ln P(y_1..y_t, z_t = s)`, one row per non-padding cell.
    pub table: Vec<Vec<f64>>,
}

/// Forward recursion in log space over one sequence (one panel row).
pub fn log_forward(h: &HiddenMarkovModel, row: &[Cell]) -> LogForward {
    log_forward_with(&LogModel::new(h), row)
}

pub(crate) fn log_forward_with(lm: &LogModel, row: &[Cell]) -> LogForward {
    let len = effective_len(row);
    let s_count = lm.s_count;
    let mut table = Vec::with_capacity(len);
    if len == 0 {
        return LogForward { log_likelihood: 0.0, table };
    }
    let mut alpha: Vec<f64> = (0..s_count)
        .map(|s| lm.log_initial[s] + lm.log_emission(s, row[0]))
        .collect();
    table.push(alpha.clone());
    let mut scratch = vec![0.0; s_count];
    for &cell in &row[1..len] {
        let next: Vec<f64> = (0..s_count)
            .map(|s| {
                for (r, v) in scratch.iter_mut().enumerate() {
                    *v = alpha[r] + lm.log_transition(r, s);
                }
                log_sum_exp(&scratch) + lm.log_emission(s, cell)
            })
            .collect();
        alpha = next;
        table.push(alpha.clone());
    }
    LogForward { log_likelihood: log_sum_exp(&alpha), table }
}

/// Backward recursion in log space; `table[t][s] = ln P(y_{t+1}..y_L | z_t = s)`.
pub fn log_backward(h: &HiddenMarkovModel, row: &[Cell]) -> Vec<Vec<f64>> {
    log_backward_with(&LogModel::new(h), row)
}

pub(crate) fn log_backward_with(lm: &LogModel, row: &[Cell]) -> Vec<Vec<f64>> {
    let len = effective_len(row);
    let s_count = lm.s_count;
    if len == 0 {
        return Vec::new();
    }
    let mut table = vec![vec![0.0; s_count]; len];
    let mut scratch = vec![0.0; s_count];
    for t in (0..len - 1).rev() {
        let next_cell = row[t + 1];
        for r in 0..s_count {
            for (s, v) in scratch.iter_mut().enumerate() {
                *v = lm.log_transition(r, s)
                    + lm.log_emission(s, next_cell)
                    + table[t + 1][s];
            }
            table[t][r] = log_sum_exp(&scratch);
        }
    }
    table
}

/// Posterior state marginals `γ_t(s)` for one sequence, with its
/// log-likelihood. Rows of the returned table each sum to 1.
pub fn posterior_marginals(h: &HiddenMarkovModel, row: &[Cell]) -> (f64, Vec<Vec<f64>>) {
    let fwd = log_forward(h, row);
    let bwd = log_backward(h, row);
    let ll = fwd.log_likelihood;
    let gamma = fwd
        .table
        .iter()
        .zip(&bwd)
        .map(|(a, b)| {
            a.iter().zip(b).map(|(x, y)| (x + y - ll).exp()).collect()
        })
        .collect();
    (ll, gamma)
}

/// A decoded hidden-state path, aligned to the non-padding cells of one
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenPath {
    pub states: Vec<usize>,
    pub log_probability: f64,
}

/// Most probable hidden path per sequence (Viterbi). Ties are broken toward
/// the smallest state index at every backtrack step, and at the final state.
/// Sequences impossible under the model get a best-effort path with
/// log-probability −∞.
pub fn viterbi(h: &HiddenMarkovModel, s: &SequenceSet) -> Result<Vec<HiddenPath>> {
    if *s.alphabet() != h.alphabet {
        return Err(Error::DimensionMismatch("model and data alphabets differ".into()));
    }
    let lm = LogModel::new(h);
    Ok(s.rows().map(|row| viterbi_path_with(&lm, row)).collect())
}

/// Viterbi decoding of a single sequence.
pub fn viterbi_path(h: &HiddenMarkovModel, row: &[Cell]) -> HiddenPath {
    viterbi_path_with(&LogModel::new(h), row)
}

pub(crate) fn viterbi_path_with(lm: &LogModel, row: &[Cell]) -> HiddenPath {
    let len = effective_len(row);
    let s_count = lm.s_count;
    if len == 0 {
        return HiddenPath { states: Vec::new(), log_probability: 0.0 };
    }
    let mut delta: Vec<f64> = (0..s_count)
        .map(|s| lm.log_initial[s] + lm.log_emission(s, row[0]))
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(len.saturating_sub(1));
    for &cell in &row[1..len] {
        let mut next = vec![f64::NEG_INFINITY; s_count];
        let mut arg = vec![0usize; s_count];
        for (s, (nv, av)) in next.iter_mut().zip(arg.iter_mut()).enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_r = 0usize;
            for (r, &d) in delta.iter().enumerate() {
                let v = d + lm.log_transition(r, s);
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            *nv = best + lm.log_emission(s, cell);
            *av = best_r;
        }
        back.push(arg);
        delta = next;
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0usize;
    for (s, &d) in delta.iter().enumerate() {
        if d > best {
            best = d;
            last = s;
        }
    }
    let mut states = vec![last; len];
    for t in (1..len).rev() {
        states[t - 1] = back[t - 1][states[t]];
    }
    HiddenPath { states, log_probability: best }
}

/// Expected sufficient statistics of one sequence (optionally weighted),
/// merged associatively across sequences.
#[derive(Debug, Clone)]
pub(crate) struct ExpectedCounts {
    pub initial: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Number of sequences whose likelihood was −∞ and were skipped.
    pub skipped: usize,
}

impl ExpectedCounts {
    pub fn zero(s: usize, m: usize) -> Self {
        ExpectedCounts {
            initial: vec![0.0; s],
            transitions: vec![vec![0.0; s]; s],
            emissions: vec![vec![0.0; m]; s],
            log_likelihood: 0.0,
            skipped: 0,
        }
    }

    pub fn merge(&mut self, other: &ExpectedCounts) {
        self.merge_counts(other);
        self.log_likelihood += other.log_likelihood;
        self.skipped += other.skipped;
    }

    /// Merge only the count fields, leaving the likelihood bookkeeping alone.
    pub fn merge_counts(&mut self, other: &ExpectedCounts) {
        for (a, b) in self.initial.iter_mut().zip(&other.initial) {
            *a += b;
        }
        for (ar, br) in self.transitions.iter_mut().zip(&other.transitions) {
            for (a, b) in ar.iter_mut().zip(br) {
                *a += b;
            }
        }
        for (ar, br) in self.emissions.iter_mut().zip(&other.emissions) {
            for (a, b) in ar.iter_mut().zip(br) {
                *a += b;
            }
        }
    }

    /// Scale the count fields by a responsibility weight.
    pub fn scale(&mut self, weight: f64) {
        for a in &mut self.initial {
            *a *= weight;
        }
        for row in &mut self.transitions {
            for a in row {
                *a *= weight;
            }
        }
        for row in &mut self.emissions {
            for a in row {
                *a *= weight;
            }
        }
    }
}

/// Forward-backward pass over one sequence, accumulating expected counts
/// scaled by `weight`. A weight of 0 still reports the log-likelihood.
pub(crate) fn row_expected_counts_with(
    lm: &LogModel,
    m_count: usize,
    row: &[Cell],
    weight: f64,
) -> ExpectedCounts {
    let s_count = lm.s_count;
    let mut out = ExpectedCounts::zero(s_count, m_count);
    let len = effective_len(row);
    if len == 0 {
        return out;
    }
    let fwd = log_forward_with(lm, row);
    let ll = fwd.log_likelihood;
    if !ll.is_finite() {
        out.log_likelihood = f64::NEG_INFINITY;
        out.skipped = 1;
        return out;
    }
    out.log_likelihood = ll;
    if weight == 0.0 {
        return out;
    }
    let bwd = log_backward_with(lm, row);

    for (s, b) in bwd[0].iter().enumerate() {
        let g = (fwd.table[0][s] + b - ll).exp();
        out.initial[s] += weight * g;
    }
    for (t, &cell) in row[..len].iter().enumerate() {
        if let Cell::Symbol(m) = cell {
            for (s, b) in bwd[t].iter().enumerate() {
                let g = (fwd.table[t][s] + b - ll).exp();
                out.emissions[s][m] += weight * g;
            }
        }
    }
    for t in 0..len - 1 {
        let next_cell = row[t + 1];
        for r in 0..s_count {
            let a_t = fwd.table[t][r];
            if a_t == f64::NEG_INFINITY {
                continue;
            }
            for (s, b) in bwd[t + 1].iter().enumerate() {
                let log_a = lm.log_transition(r, s);
                if log_a == f64::NEG_INFINITY {
                    continue;
                }
                let xi = (a_t + log_a + lm.log_emission(s, next_cell) + b - ll).exp();
                out.transitions[r][s] += weight * xi;
            }
        }
    }
    out
}

/// Accumulate expected counts over a whole panel, in parallel with a fixed
/// merge order so results are identical for any worker count.
pub(crate) fn panel_expected_counts(h: &HiddenMarkovModel, s: &SequenceSet) -> ExpectedCounts {
    let lm = LogModel::new(h);
    let m_count = h.alphabet.len();
    let per_row: Vec<ExpectedCounts> = s
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| row_expected_counts_with(&lm, m_count, row, 1.0))
        .collect();
    let mut total = ExpectedCounts::zero(h.n_states(), m_count);
    for c in &per_row {
        if c.skipped > 0 {
            total.skipped += c.skipped;
            continue;
        }
        total.merge(c);
    }
    total
}

/// Renormalize a row of expected counts, keeping the previous row when no
/// mass was accumulated. Structural zeros of `old` are asserted unchanged.
pub(crate) fn normalize_or_keep(counts: &[f64], old: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return old.to_vec();
    }
    counts
        .iter()
        .zip(old)
        .map(|(&c, &o)| {
            let p = c / total;
            debug_assert!(o != 0.0 || p == 0.0, "structural zero violated");
            p
        })
        .collect()
}

/// Total log-likelihood of a panel under an HMM.
pub fn total_log_likelihood(h: &HiddenMarkovModel, s: &SequenceSet) -> f64 {
    let lm = LogModel::new(h);
    let per_row: Vec<f64> = s
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| log_forward_with(&lm, row).log_likelihood)
        .collect();
    per_row.iter().sum()
}

/// One Baum-Welch update. Returns the re-estimated model and the
/// log-likelihood of the input model (before the update).
pub fn em_step(h: &HiddenMarkovModel, s: &SequenceSet) -> Result<(HiddenMarkovModel, f64)> {
    if *s.alphabet() != h.alphabet {
        return Err(Error::DimensionMismatch("model and data alphabets differ".into()));
    }
    let counts = panel_expected_counts(h, s);
    let updated = reestimate(h, &counts)?;
    let ll = if counts.skipped > 0 { f64::NEG_INFINITY } else { counts.log_likelihood };
    Ok((updated, ll))
}

pub(crate) fn reestimate(h: &HiddenMarkovModel, counts: &ExpectedCounts) -> Result<HiddenMarkovModel> {
    let initial = ProbabilityVector::new(
        normalize_or_keep(&counts.initial, h.initial.entries()),
        h.state_labels.clone(),
    )?;
    let trans_rows: Vec<Vec<f64>> = counts
        .transitions
        .iter()
        .zip(h.transitions.rows())
        .map(|(c, o)| normalize_or_keep(c, o))
        .collect();
    let transitions = TransitionMatrix::new(trans_rows, h.state_labels.clone())?;
    let emis_rows: Vec<Vec<f64>> = counts
        .emissions
        .iter()
        .zip(h.emissions.rows())
        .map(|(c, o)| normalize_or_keep(c, o))
        .collect();
    let emissions = EmissionMatrix::new(emis_rows)?;
    HiddenMarkovModel::new(
        h.alphabet.clone(),
        h.state_labels.clone(),
        initial,
        transitions,
        emissions,
    )
}

/// Stopping control for EM iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmControl {
    pub max_iterations: usize,
    /// Threshold on the relative log-likelihood change
    /// `(ℓ_i − ℓ_{i−1}) / max(|ℓ_{i−1}|, 1)`.
    pub relative_tolerance: f64,
}

impl Default for EmControl {
    fn default() -> Self {
        EmControl { max_iterations: 1000, relative_tolerance: 1e-10 }
    }
}

/// Convergence diagnostics of an EM run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmResult {
    #[serde(rename = "logLik")]
    pub log_lik: f64,
    pub iterations: usize,
    pub change: f64,
    /// Per-iteration log-likelihood trace (not serialized).
    #[serde(skip)]
    pub history: Vec<f64>,
}

pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    (new - old) / old.abs().max(1.0)
}

/// Iterate [`em_step`] until the relative log-likelihood change drops below
/// tolerance or the iteration budget runs out.
pub fn em_fit(
    h: &HiddenMarkovModel,
    s: &SequenceSet,
    control: &EmControl,
) -> Result<(HiddenMarkovModel, EmResult)> {
    let mut model = h.clone();
    let mut history = Vec::new();
    let mut ll_prev = f64::NAN;
    let mut iterations = 0usize;
    loop {
        let (next, ll) = em_step(&model, s)?;
        if iterations == 0 && !ll.is_finite() {
            return Err(Error::Estimation(format!(
                "log-likelihood is {ll} at the starting values"
            )));
        }
        history.push(ll);
        if iterations > 0 {
            let change = relative_change(ll, ll_prev);
            if change < control.relative_tolerance {
                return Ok((model, EmResult { log_lik: ll, iterations, change, history }));
            }
        }
        ll_prev = ll;
        model = next;
        iterations += 1;
        if iterations >= control.max_iterations {
            let ll_final = total_log_likelihood(&model, s);
            let change = relative_change(ll_final, ll_prev);
            history.push(ll_final);
            return Ok((model, EmResult { log_lik: ll_final, iterations, change, history }));
        }
    }
}
