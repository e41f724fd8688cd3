//! Softmax re-parameterization of probability rows for unconstrained
//! optimization. Each row maps its nonzero entries onto free reals with the
//! first nonzero entry pinned at logit 0; structural zeros are excluded from
//! the parameterization entirely.

use crate::error::Result;
use crate::hmm::{EmissionMatrix, ExpectedCounts, HiddenMarkovModel};
use crate::markov::{ProbabilityVector, TransitionMatrix};

/// Free-parameter layout of one probability row.
#[derive(Debug, Clone)]
pub(crate) struct RowPacking {
    /// Indices of the nonzero entries; the first one is the pinned entry.
    support: Vec<usize>,
}

impl RowPacking {
    pub fn of(row: &[f64]) -> Self {
        RowPacking { support: (0..row.len()).filter(|&j| row[j] != 0.0).collect() }
    }

    pub fn n_free(&self) -> usize {
        self.support.len().saturating_sub(1)
    }

    pub fn pack_into(&self, row: &[f64], out: &mut Vec<f64>) {
        let pinned = row[self.support[0]];
        for &j in &self.support[1..] {
            out.push((row[j] / pinned).ln());
        }
    }

    /// Softmax over the support (pinned logit 0), zeros elsewhere.
    pub fn unpack(&self, theta: &[f64], len: usize) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.n_free());
        let mut row = vec![0.0; len];
        let max = theta.iter().copied().fold(0.0f64, f64::max);
        let mut total = (-max).exp();
        let mut exps = Vec::with_capacity(theta.len());
        for &t in theta {
            let e = (t - max).exp();
            exps.push(e);
            total += e;
        }
        row[self.support[0]] = (-max).exp() / total;
        for (&j, e) in self.support[1..].iter().zip(exps) {
            row[j] = e / total;
        }
        row
    }

    /// Log-likelihood gradient with respect to the free logits of this row:
    /// `E_j − p_j · Σ E` for every free entry `j`, from expected counts `E`
    /// and current probabilities `p`.
    pub fn gradient_into(&self, counts: &[f64], probs: &[f64], out: &mut Vec<f64>) {
        let total: f64 = self.support.iter().map(|&j| counts[j]).sum();
        for &j in &self.support[1..] {
            out.push(counts[j] - probs[j] * total);
        }
    }
}

/// Packing of a whole HMM (initial row, transition rows, emission rows).
#[derive(Debug, Clone)]
pub(crate) struct HmmPacking {
    initial: RowPacking,
    transitions: Vec<RowPacking>,
    emissions: Vec<RowPacking>,
}

impl HmmPacking {
    pub fn of(h: &HiddenMarkovModel) -> Self {
        HmmPacking {
            initial: RowPacking::of(h.initial.entries()),
            transitions: h.transitions.rows().iter().map(|r| RowPacking::of(r)).collect(),
            emissions: h.emissions.rows().iter().map(|r| RowPacking::of(r)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.initial.n_free()
            + self.transitions.iter().map(RowPacking::n_free).sum::<usize>()
            + self.emissions.iter().map(RowPacking::n_free).sum::<usize>()
    }

    pub fn pack_into(&self, h: &HiddenMarkovModel, out: &mut Vec<f64>) {
        self.initial.pack_into(h.initial.entries(), out);
        for (packing, row) in self.transitions.iter().zip(h.transitions.rows()) {
            packing.pack_into(row, out);
        }
        for (packing, row) in self.emissions.iter().zip(h.emissions.rows()) {
            packing.pack_into(row, out);
        }
    }

    /// Rebuild a model from free parameters, using `template` for labels,
    /// alphabet, and row lengths.
    pub fn unpack(&self, theta: &[f64], template: &HiddenMarkovModel) -> Result<HiddenMarkovModel> {
        let s = template.n_states();
        let m = template.alphabet.len();
        let mut offset = 0usize;
        let mut take = |n: usize| {
            let slice = &theta[offset..offset + n];
            offset += n;
            slice
        };
        let initial = self.initial.unpack(take(self.initial.n_free()), s);
        let trans_rows: Vec<Vec<f64>> =
            self.transitions.iter().map(|p| p.unpack(take(p.n_free()), s)).collect();
        let emis_rows: Vec<Vec<f64>> =
            self.emissions.iter().map(|p| p.unpack(take(p.n_free()), m)).collect();
        debug_assert_eq!(offset, theta.len());
        HiddenMarkovModel::new(
            template.alphabet.clone(),
            template.state_labels.clone(),
            ProbabilityVector::new(initial, template.state_labels.clone())?,
            TransitionMatrix::new(trans_rows, template.state_labels.clone())?,
            EmissionMatrix::new(emis_rows)?,
        )
    }

    /// Gradient of the log-likelihood with respect to the free parameters,
    /// assembled from expected counts at the current model.
    pub fn gradient_into(
        &self,
        counts: &ExpectedCounts,
        current: &HiddenMarkovModel,
        out: &mut Vec<f64>,
    ) {
        self.initial.gradient_into(&counts.initial, current.initial.entries(), out);
        for ((packing, row), probs) in
            self.transitions.iter().zip(&counts.transitions).zip(current.transitions.rows())
        {
            packing.gradient_into(row, probs, out);
        }
        for ((packing, row), probs) in
            self.emissions.iter().zip(&counts.emissions).zip(current.emissions.rows())
        {
            packing.gradient_into(row, probs, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::Alphabet;

    fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("S{i}")).collect()
    }

    #[test]
    fn pack_unpack_round_trips_probabilities() {
        let h = HiddenMarkovModel::new(
            Alphabet::new(vec!["a", "b", "c"]).unwrap(),
            labels(2),
            ProbabilityVector::new(vec![0.25, 0.75], labels(2)).unwrap(),
            TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.0, 1.0]], labels(2)).unwrap(),
            EmissionMatrix::new(vec![vec![0.2, 0.5, 0.3], vec![0.0, 0.4, 0.6]]).unwrap(),
        )
        .unwrap();
        let packing = HmmPacking::of(&h);
        let mut theta = Vec::with_capacity(packing.dim());
        packing.pack_into(&h, &mut theta);
        assert_eq!(theta.len(), packing.dim());
        let back = packing.unpack(&theta, &h).unwrap();
        assert!((back.initial.get(0) - 0.25).abs() < 1e-12);
        assert_eq!(back.transitions.get(1, 0), 0.0);
        assert_eq!(back.transitions.get(1, 1), 1.0);
        assert_eq!(back.emissions.get(1, 0), 0.0);
        for s in 0..2 {
            for t in 0..2 {
                assert!((back.transitions.get(s, t) - h.transitions.get(s, t)).abs() < 1e-12);
            }
            for m in 0..3 {
                assert!((back.emissions.get(s, m) - h.emissions.get(s, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_constrained_rows_have_no_parameters() {
        let row = RowPacking::of(&[0.0, 1.0, 0.0]);
        assert_eq!(row.n_free(), 0);
        assert_eq!(row.unpack(&[], 3), vec![0.0, 1.0, 0.0]);
    }
}
