//! First-order Markov models: probability primitives plus closed-form
//! estimation of initial and transition probabilities from a sequence panel.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{Alphabet, Cell, SequenceSet};

const ROW_SUM_TOL: f64 = 1e-9;

/// A labeled probability distribution (entries sum to 1 within 1e-9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbabilityVectorRepr", into = "ProbabilityVectorRepr")]
pub struct ProbabilityVector {
    entries: Vec<f64>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ProbabilityVectorRepr {
    entries: Vec<f64>,
    labels: Vec<String>,
}

impl TryFrom<ProbabilityVectorRepr> for ProbabilityVector {
    type Error = Error;
    fn try_from(r: ProbabilityVectorRepr) -> Result<Self> {
        ProbabilityVector::new(r.entries, r.labels)
    }
}

impl From<ProbabilityVector> for ProbabilityVectorRepr {
    fn from(v: ProbabilityVector) -> Self {
        ProbabilityVectorRepr { entries: v.entries, labels: v.labels }
    }
}

fn check_distribution(entries: &[f64], what: &str) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must have at least one entry")));
    }
    if entries.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = entries.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        check_distribution(&entries, "probability vector")?;
        if labels.len() != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} entries",
                labels.len(),
                entries.len()
            )));
        }
        Ok(ProbabilityVector { entries, labels })
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        ProbabilityVector::new(vec![1.0 / n as f64; n], labels)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }
}

/// A labeled row-stochastic square matrix; rows are origin states, columns
/// destination states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionMatrixRepr", into = "TransitionMatrixRepr")]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TransitionMatrixRepr {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl TryFrom<TransitionMatrixRepr> for TransitionMatrix {
    type Error = Error;
    fn try_from(r: TransitionMatrixRepr) -> Result<Self> {
        TransitionMatrix::new(r.rows, r.labels)
    }
}

impl From<TransitionMatrix> for TransitionMatrixRepr {
    fn from(m: TransitionMatrix) -> Self {
        TransitionMatrixRepr { rows: m.rows, labels: m.labels }
    }
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("transition matrix must be non-empty".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!("{} labels for {} rows", labels.len(), n)));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "transition matrix is not square: row {i} has {} entries for {n} states",
                    row.len()
                )));
            }
            check_distribution(row, &format!("transition row {i}"))?;
        }
        Ok(TransitionMatrix { rows, labels })
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// First-order Markov model: initial distribution plus one time-homogeneous
/// transition matrix over the observed alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub alphabet: Alphabet,
    pub initial: ProbabilityVector,
    pub transitions: TransitionMatrix,
}

impl MarkovModel {
    pub fn new(
        alphabet: Alphabet,
        initial: ProbabilityVector,
        transitions: TransitionMatrix,
    ) -> Result<Self> {
        if initial.len() != alphabet.len() || transitions.n_states() != alphabet.len() {
            return Err(Error::DimensionMismatch(format!(
                "alphabet has {} symbols, initial has {}, transitions have {}",
                alphabet.len(),
                initial.len(),
                transitions.n_states()
            )));
        }
        Ok(MarkovModel { alphabet, initial, transitions })
    }

    /// Draw `n` sequences of length `t` from the model.
    pub fn simulate<R: Rng>(&self, n: usize, t: usize, rng: &mut R) -> Result<SequenceSet> {
        let rows = (0..n)
            .map(|_| {
                let mut row = Vec::with_capacity(t);
                let mut state = sample_index(self.initial.entries(), rng);
                row.push(Cell::Symbol(state));
                for _ in 1..t {
                    state = sample_index(self.transitions.row(state), rng);
                    row.push(Cell::Symbol(state));
                }
                row
            })
            .collect();
        SequenceSet::from_rows(self.alphabet.clone(), rows)
    }
}

pub(crate) fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Per-row estimation notes attached to closed-form fits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimationNote {
    /// An origin state with zero observed transitions; its row was filled
    /// with the uniform distribution.
    UniformFallbackRow { state: usize },
    /// No sequence starts with an observed symbol; the initial distribution
    /// was filled with the uniform distribution.
    UniformFallbackInitial,
    /// A sequence with no observed cells; it contributes nothing.
    EmptySequence { row: usize },
}

/// A fitted Markov model together with its estimation notes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmEstimate {
    pub model: MarkovModel,
    pub notes: Vec<EstimationNote>,
}

/// Exact integer pair counts: `counts[r][s]` is the number of adjacent
/// observed pairs r→s, pooled over all sequences; `first[s]` counts observed
/// first-column symbols. Pairs touching unknown or padding cells are skipped.
pub fn transition_counts(s: &SequenceSet) -> (Vec<Vec<u64>>, Vec<u64>) {
    let m = s.alphabet().len();
    let mut counts = vec![vec![0u64; m]; m];
    let mut first = vec![0u64; m];
    for row in s.rows() {
        if let Cell::Symbol(sym) = row[0] {
            first[sym] += 1;
        }
        for pair in row.windows(2) {
            if let (Cell::Symbol(a), Cell::Symbol(b)) = (pair[0], pair[1]) {
                counts[a][b] += 1;
            }
        }
    }
    (counts, first)
}

/// Closed-form maximum-likelihood fit of the first-order Markov model:
/// count observed transitions from each state and scale by the total
/// outgoing count. Rows without observations fall back to uniform and are
/// noted.
pub fn estimate_mm(s: &SequenceSet) -> Result<MmEstimate> {
    let m = s.alphabet().len();
    let (counts, first) = transition_counts(s);
    let total_pairs: u64 = counts.iter().flatten().sum();
    let total_first: u64 = first.iter().sum();
    if total_pairs == 0 && total_first == 0 {
        return Err(Error::Estimation(
            "no observed first states or transitions; all cells missing".into(),
        ));
    }

    let mut notes: Vec<EstimationNote> = s
        .rows()
        .enumerate()
        .filter(|(_, row)| !row.iter().any(|c| c.is_symbol()))
        .map(|(i, _)| EstimationNote::EmptySequence { row: i })
        .collect();

    let initial = if total_first > 0 {
        s.first_state_distribution()?
    } else {
        notes.push(EstimationNote::UniformFallbackInitial);
        ProbabilityVector::uniform(s.alphabet().symbols().to_vec())?
    };

    let mut rows = Vec::with_capacity(m);
    for (r, row_counts) in counts.iter().enumerate() {
        let origin_total: u64 = row_counts.iter().sum();
        if origin_total == 0 {
            notes.push(EstimationNote::UniformFallbackRow { state: r });
            rows.push(vec![1.0 / m as f64; m]);
        } else {
            rows.push(row_counts.iter().map(|&c| c as f64 / origin_total as f64).collect());
        }
    }
    let transitions = TransitionMatrix::new(rows, s.alphabet().symbols().to_vec())?;
    let model = MarkovModel::new(s.alphabet().clone(), initial, transitions)?;
    Ok(MmEstimate { model, notes })
}

/// Log-likelihood of a panel under a Markov model: per sequence, the log
/// initial probability of the first observed symbol plus the log transition
/// probability of every adjacent observed pair. Pairs touching unknown or
/// padding cells contribute nothing. An observed event with probability 0
/// yields −∞ rather than an error.
pub fn mm_log_likelihood(model: &MarkovModel, s: &SequenceSet) -> Result<f64> {
    if model.alphabet != *s.alphabet() {
        return Err(Error::DimensionMismatch("model and data alphabets differ".into()));
    }
    let mut total = 0.0;
    for row in s.rows() {
        if let Some(sym) = row.iter().find_map(|c| c.symbol()) {
            total += model.initial.get(sym).ln();
        }
        for pair in row.windows(2) {
            if let (Cell::Symbol(a), Cell::Symbol(b)) = (pair[0], pair[1]) {
                total += model.transitions.get(a, b).ln();
            }
        }
    }
    Ok(total)
}

pub(crate) fn format_prob(x: f64) -> String {
    format!("{x:.4}")
}

fn write_header_row(f: &mut fmt::Formatter<'_>, indent: usize, labels: &[String], width: usize) -> fmt::Result {
    write!(f, "{:indent$}", "")?;
    for l in labels {
        write!(f, " {l:>width$}")?;
    }
    writeln!(f)
}

impl fmt::Display for MarkovModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.alphabet.symbols();
        let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(6);
        writeln!(f, "Initial probabilities :")?;
        write_header_row(f, 0, labels, width)?;
        for p in self.initial.entries() {
            write!(f, " {:>width$}", format_prob(*p))?;
        }
        writeln!(f)?;
        writeln!(f)?;
        writeln!(f, "Transition probabilities :")?;
        let row_width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(4);
        writeln!(f, "{:row_width$}  to", "")?;
        write!(f, "{:<row_width$}  ", "from")?;
        for l in labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        for (r, label) in labels.iter().enumerate() {
            write!(f, "  {label:<row_width$}")?;
            for p in self.transitions.row(r) {
                write!(f, " {:>width$}", format_prob(*p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::Cell::{Padding, Symbol, Unknown};

    fn lh() -> Alphabet {
        Alphabet::new(vec!["L", "H"]).unwrap()
    }

    fn parse_rows(rows: &[&str]) -> Vec<Vec<Cell>> {
        rows.iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        'L' => Symbol(0),
                        'H' => Symbol(1),
                        '?' => Unknown,
                        '%' => Padding,
                        other => panic!("bad cell {other}"),
                    })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn table1() -> SequenceSet {
        SequenceSet::from_rows(
            lh(),
            parse_rows(&["LLLHLHLHHH", "LHHLHLHLLH", "HHLHLLHLHH", "HHLLLHLLLH"]),
        )
        .unwrap()
    }

    #[test]
    fn achievement_grid_reproduces_printed_matrix() {
        let fit = estimate_mm(&table1()).unwrap();
        assert_eq!(fit.model.initial.entries(), [0.5, 0.5]);
        assert_eq!(fit.model.transitions.row(0), [0.4, 0.6]);
        assert_eq!(fit.model.transitions.row(1), [0.625, 0.375]);
        assert!(fit.notes.is_empty());
    }

    #[test]
    fn single_symbol_sequence_gets_uniform_fallback_row() {
        let set = SequenceSet::from_rows(lh(), parse_rows(&["LLLL"])).unwrap();
        let fit = estimate_mm(&set).unwrap();
        assert_eq!(fit.model.initial.entries(), [1.0, 0.0]);
        assert_eq!(fit.model.transitions.row(0), [1.0, 0.0]);
        assert_eq!(fit.model.transitions.row(1), [0.5, 0.5]);
        assert_eq!(fit.notes, vec![EstimationNote::UniformFallbackRow { state: 1 }]);
    }

    #[test]
    fn pairs_touching_unknown_are_skipped() {
        let set = SequenceSet::from_rows(lh(), parse_rows(&["L?H"])).unwrap();
        let fit = estimate_mm(&set).unwrap();
        assert_eq!(fit.model.initial.entries(), [1.0, 0.0]);
        assert_eq!(fit.model.transitions.row(0), [0.5, 0.5]);
        assert_eq!(fit.model.transitions.row(1), [0.5, 0.5]);
        assert_eq!(fit.notes.len(), 2);
    }

    #[test]
    fn all_missing_panel_errors() {
        let set = SequenceSet::from_rows(lh(), parse_rows(&["??", "?%"])).unwrap();
        assert!(estimate_mm(&set).is_err());
    }

    #[test]
    fn log_likelihood_of_certain_path_is_zero() {
        let model = MarkovModel::new(
            lh(),
            ProbabilityVector::new(vec![1.0, 0.0], vec!["L".into(), "H".into()]).unwrap(),
            TransitionMatrix::new(
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
                vec!["L".into(), "H".into()],
            )
            .unwrap(),
        )
        .unwrap();
        let set = SequenceSet::from_rows(lh(), parse_rows(&["LLL"])).unwrap();
        assert_eq!(mm_log_likelihood(&model, &set).unwrap(), 0.0);
    }

    #[test]
    fn log_likelihood_matches_direct_arithmetic() {
        let fit = estimate_mm(&table1()).unwrap();
        let set = SequenceSet::from_rows(lh(), parse_rows(&["LH"])).unwrap();
        let ll = mm_log_likelihood(&fit.model, &set).unwrap();
        let expected = 0.5f64.ln() + 0.6f64.ln();
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll - (-1.204)).abs() < 5e-4);
    }

    #[test]
    fn impossible_event_yields_neg_infinity() {
        let model = MarkovModel::new(
            lh(),
            ProbabilityVector::new(vec![1.0, 0.0], vec!["L".into(), "H".into()]).unwrap(),
            TransitionMatrix::new(
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
                vec!["L".into(), "H".into()],
            )
            .unwrap(),
        )
        .unwrap();
        let set = SequenceSet::from_rows(lh(), parse_rows(&["LH"])).unwrap();
        assert_eq!(mm_log_likelihood(&model, &set).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn estimate_rows_are_stochastic() {
        let fit = estimate_mm(&table1()).unwrap();
        for r in 0..2 {
            let sum: f64 = fit.model.transitions.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn display_uses_printed_layout() {
        let fit = estimate_mm(&table1()).unwrap();
        let text = fit.model.to_string();
        assert!(text.starts_with("Initial probabilities :\n"));
        assert!(text.contains("Transition probabilities :"));
        assert!(text.contains("from"));
        assert!(text.contains("0.6250"));
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        use rand::SeedableRng;
        let fit = estimate_mm(&table1()).unwrap();
        let mut rng1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = fit.model.simulate(5, 12, &mut rng1).unwrap();
        let b = fit.model.simulate(5, 12, &mut rng2).unwrap();
        assert_eq!(a, b);
    }
}
