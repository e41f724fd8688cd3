//! Log-likelihood accounting and BIC for model comparison.
//!
//! Conventions: `n` is the number of observed (non-missing, non-padding)
//! cells of the panel, and a probability row with `z` nonzero entries
//! contributes `z − 1` free parameters; structural zeros are never counted.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hmm::{total_log_likelihood, HiddenMarkovModel};
use crate::markov::{mm_log_likelihood, MarkovModel};
use crate::mixture::{mixture_log_likelihood, ClusterModel, MixtureModel};
use crate::seqdata::{CovariateFrame, SequenceSet};

/// A scored model: `bic = −2·logL + p·ln(n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelScore {
    pub log_likelihood: f64,
    pub free_parameters: usize,
    pub n_observations: usize,
    pub bic: f64,
}

/// Compose a score from its parts, fixing the BIC formula.
pub fn bic_score(log_likelihood: f64, free_parameters: usize, n_observations: usize) -> ModelScore {
    let bic = -2.0 * log_likelihood + free_parameters as f64 * (n_observations as f64).ln();
    ModelScore { log_likelihood, free_parameters, n_observations, bic }
}

fn row_free_parameters(row: &[f64]) -> usize {
    row.iter().filter(|&&p| p != 0.0).count().saturating_sub(1)
}

/// Number of free parameters of a model under the nonzero-minus-one row
/// convention.
pub trait FreeParameters {
    fn free_parameters(&self) -> usize;
}

impl FreeParameters for MarkovModel {
    fn free_parameters(&self) -> usize {
        row_free_parameters(self.initial.entries())
            + self.transitions.rows().iter().map(|r| row_free_parameters(r)).sum::<usize>()
    }
}

impl FreeParameters for HiddenMarkovModel {
    fn free_parameters(&self) -> usize {
        row_free_parameters(self.initial.entries())
            + self.transitions.rows().iter().map(|r| row_free_parameters(r)).sum::<usize>()
            + self.emissions.rows().iter().map(|r| row_free_parameters(r)).sum::<usize>()
    }
}

impl FreeParameters for ClusterModel {
    fn free_parameters(&self) -> usize {
        match self {
            ClusterModel::Markov(m) => m.free_parameters(),
            ClusterModel::Hidden(h) => h.free_parameters(),
        }
    }
}

impl FreeParameters for MixtureModel {
    fn free_parameters(&self) -> usize {
        let submodels: usize = self.clusters.iter().map(|c| c.free_parameters()).sum();
        let coefficient_rows = self.coefficients.values().len();
        submodels + coefficient_rows * (self.n_clusters() - 1)
    }
}

pub fn bic_markov(model: &MarkovModel, s: &SequenceSet) -> Result<ModelScore> {
    let ll = mm_log_likelihood(model, s)?;
    Ok(bic_score(ll, model.free_parameters(), observed_n(s)?))
}

pub fn bic_hmm(model: &HiddenMarkovModel, s: &SequenceSet) -> Result<ModelScore> {
    let ll = total_log_likelihood(model, s);
    Ok(bic_score(ll, model.free_parameters(), observed_n(s)?))
}

pub fn bic_mixture(
    model: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
) -> Result<ModelScore> {
    let ll = mixture_log_likelihood(model, cov, s)?;
    Ok(bic_score(ll, model.free_parameters(), observed_n(s)?))
}

fn observed_n(s: &SequenceSet) -> Result<usize> {
    let n = s.observed_cell_count();
    if n == 0 {
        return Err(crate::error::Error::Estimation(
            "no observed cells; BIC is undefined".into(),
        ));
    }
    Ok(n)
}
