//! Mixture Markov and mixture hidden Markov models: K cluster submodels
//! joined into one block model, covariate-dependent cluster priors through
//! multinomial-logistic coefficients, EM estimation with a Newton M-step for
//! the coefficients, and posterior membership summaries.

mod logistic;

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{
    log_forward_with, reestimate, row_expected_counts_with, EmControl, EmResult, EmissionMatrix,
    ExpectedCounts, HiddenMarkovModel, LogModel,
};
use crate::markov::{sample_index, MarkovModel, ProbabilityVector, TransitionMatrix};
use crate::seqdata::{Alphabet, Cell, CovariateFrame, SequenceSet};

pub(crate) use logistic::softmax_probabilities;

/// Which covariates enter the cluster-membership model and whether a common
/// intercept is included.
///
/// Expansion rule: with the intercept off, every categorical covariate
/// expands to one indicator column per level; with the intercept on, the
/// first level of each covariate is absorbed as the reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub covariates: Vec<String>,
    pub intercept: bool,
}

impl DesignSpec {
    /// Intercept-only design (no covariates).
    pub fn intercept_only() -> Self {
        DesignSpec { covariates: Vec::new(), intercept: true }
    }

    pub fn without_intercept(covariates: Vec<String>) -> Self {
        DesignSpec { covariates, intercept: false }
    }

    /// Labels of the design columns implied by this spec on a frame.
    pub fn column_labels(&self, cov: &CovariateFrame) -> Result<Vec<String>> {
        let mut labels = Vec::new();
        if self.intercept {
            labels.push("(Intercept)".to_string());
        }
        for name in &self.covariates {
            let factor = cov
                .factor(name)
                .ok_or_else(|| Error::InvalidInput(format!("covariate {name:?} not in frame")))?;
            let skip = usize::from(self.intercept);
            for level in factor.levels.iter().skip(skip) {
                labels.push(format!("{name}{level}"));
            }
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput(
                "design has no columns; add covariates or the intercept".into(),
            ));
        }
        Ok(labels)
    }

    /// N×P indicator design matrix for the frame.
    pub fn design_matrix(&self, cov: &CovariateFrame) -> Result<Vec<Vec<f64>>> {
        let p = self.column_labels(cov)?.len();
        let n = cov.n_subjects();
        let mut rows = vec![Vec::with_capacity(p); n];
        if self.intercept {
            for row in &mut rows {
                row.push(1.0);
            }
        }
        for name in &self.covariates {
            let factor = cov.factor(name).expect("validated by column_labels");
            let skip = usize::from(self.intercept);
            for (i, row) in rows.iter_mut().enumerate() {
                let value = factor.values[i];
                for level in skip..factor.levels.len() {
                    row.push(if value == level { 1.0 } else { 0.0 });
                }
            }
        }
        Ok(rows)
    }
}

/// Multinomial-logistic coefficients: rows are design columns, columns are
/// clusters, and the first (reference) cluster column is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientMatrixRepr", into = "CoefficientMatrixRepr")]
pub struct CoefficientMatrix {
    values: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    cluster_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientMatrixRepr {
    values: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    cluster_labels: Vec<String>,
}

impl TryFrom<CoefficientMatrixRepr> for CoefficientMatrix {
    type Error = Error;
    fn try_from(r: CoefficientMatrixRepr) -> Result<Self> {
        CoefficientMatrix::new(r.values, r.row_labels, r.cluster_labels)
    }
}

impl From<CoefficientMatrix> for CoefficientMatrixRepr {
    fn from(c: CoefficientMatrix) -> Self {
        CoefficientMatrixRepr {
            values: c.values,
            row_labels: c.row_labels,
            cluster_labels: c.cluster_labels,
        }
    }
}

impl CoefficientMatrix {
    pub fn new(
        values: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        cluster_labels: Vec<String>,
    ) -> Result<Self> {
        if values.len() != row_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient rows for {} design columns",
                values.len(),
                row_labels.len()
            )));
        }
        let k = cluster_labels.len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient row {i} has {} entries for {k} clusters",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("coefficient row {i} has a non-finite entry")));
            }
            if row[0] != 0.0 {
                return Err(Error::InvalidInput(
                    "reference cluster column of the coefficient matrix must be zero".into(),
                ));
            }
        }
        Ok(CoefficientMatrix { values, row_labels, cluster_labels })
    }

    pub fn zeros(row_labels: Vec<String>, cluster_labels: Vec<String>) -> Self {
        let values = vec![vec![0.0; cluster_labels.len()]; row_labels.len()];
        CoefficientMatrix { values, row_labels, cluster_labels }
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }
}

/// One mixture component: a Markov model over observed states (MMM) or a
/// hidden Markov model (MHMM). Markov components run on the shared HMM
/// engine through an identity-emission embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterModel {
    Markov(MarkovModel),
    Hidden(HiddenMarkovModel),
}

impl ClusterModel {
    pub fn alphabet(&self) -> &Alphabet {
        match self {
            ClusterModel::Markov(m) => &m.alphabet,
            ClusterModel::Hidden(h) => &h.alphabet,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            ClusterModel::Markov(m) => m.alphabet.len(),
            ClusterModel::Hidden(h) => h.n_states(),
        }
    }

    /// The component as an HMM over hidden states (identity emissions for a
    /// Markov component).
    pub fn as_hmm(&self) -> HiddenMarkovModel {
        match self {
            ClusterModel::Markov(m) => HiddenMarkovModel::from_markov(m),
            ClusterModel::Hidden(h) => h.clone(),
        }
    }

    pub(crate) fn replace_from_hmm(&self, h: HiddenMarkovModel) -> Result<ClusterModel> {
        match self {
            ClusterModel::Markov(m) => Ok(ClusterModel::Markov(MarkovModel::new(
                m.alphabet.clone(),
                ProbabilityVector::new(h.initial.entries().to_vec(), m.alphabet.symbols().to_vec())?,
                TransitionMatrix::new(h.transitions.rows().to_vec(), m.alphabet.symbols().to_vec())?,
            )?)),
            ClusterModel::Hidden(_) => Ok(ClusterModel::Hidden(h)),
        }
    }
}

/// K cluster submodels plus the coefficient matrix that links covariates to
/// prior cluster memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureModelRepr", into = "MixtureModelRepr")]
pub struct MixtureModel {
    pub clusters: Vec<ClusterModel>,
    pub cluster_labels: Vec<String>,
    pub coefficients: CoefficientMatrix,
    pub design: DesignSpec,
}

#[derive(Serialize, Deserialize)]
struct MixtureModelRepr {
    clusters: Vec<ClusterModel>,
    cluster_labels: Vec<String>,
    coefficients: CoefficientMatrix,
    design: DesignSpec,
}

impl TryFrom<MixtureModelRepr> for MixtureModel {
    type Error = Error;
    fn try_from(r: MixtureModelRepr) -> Result<Self> {
        MixtureModel::new(r.clusters, r.cluster_labels, r.coefficients, r.design)
    }
}

impl From<MixtureModel> for MixtureModelRepr {
    fn from(m: MixtureModel) -> Self {
        MixtureModelRepr {
            clusters: m.clusters,
            cluster_labels: m.cluster_labels,
            coefficients: m.coefficients,
            design: m.design,
        }
    }
}

impl MixtureModel {
    pub fn new(
        clusters: Vec<ClusterModel>,
        cluster_labels: Vec<String>,
        coefficients: CoefficientMatrix,
        design: DesignSpec,
    ) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one cluster".into()));
        }
        if cluster_labels.len() != clusters.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} clusters",
                cluster_labels.len(),
                clusters.len()
            )));
        }
        if coefficients.n_clusters() != clusters.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix has {} cluster columns for {} clusters",
                coefficients.n_clusters(),
                clusters.len()
            )));
        }
        let alphabet = clusters[0].alphabet();
        if clusters.iter().any(|c| c.alphabet() != alphabet) {
            return Err(Error::InvalidInput("clusters must share one alphabet".into()));
        }
        Ok(MixtureModel { clusters, cluster_labels, coefficients, design })
    }

    /// Build a mixture with zero coefficients whose design columns are
    /// derived from `design` applied to the covariate frame.
    pub fn with_zero_coefficients(
        clusters: Vec<ClusterModel>,
        cluster_labels: Vec<String>,
        design: DesignSpec,
        cov: &CovariateFrame,
    ) -> Result<Self> {
        let row_labels = design.column_labels(cov)?;
        let coefficients = CoefficientMatrix::zeros(row_labels, cluster_labels.clone());
        MixtureModel::new(clusters, cluster_labels, coefficients, design)
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.clusters[0].alphabet()
    }

    /// Draw one sequence of length `t` per subject in the frame; returns the
    /// panel and the generating cluster of each subject.
    pub fn simulate<R: Rng>(
        &self,
        cov: &CovariateFrame,
        t: usize,
        rng: &mut R,
    ) -> Result<(SequenceSet, Vec<usize>)> {
        let priors = cluster_priors(&self.coefficients, &self.design, cov)?;
        let hmms: Vec<HiddenMarkovModel> = self.clusters.iter().map(|c| c.as_hmm()).collect();
        let mut assignments = Vec::with_capacity(priors.len());
        let mut rows = Vec::with_capacity(priors.len());
        for prior in &priors {
            let k = sample_index(prior, rng);
            assignments.push(k);
            let one = hmms[k].simulate(1, t, rng)?;
            rows.push(one.row(0).to_vec());
        }
        let set = SequenceSet::new(self.alphabet().clone(), cov.ids().to_vec(), rows)?;
        Ok((set, assignments))
    }
}

impl fmt::Display for MixtureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, cluster) in self.cluster_labels.iter().zip(&self.clusters) {
            writeln!(f, "Cluster: {label}")?;
            match cluster {
                ClusterModel::Markov(m) => write!(f, "{m}")?,
                ClusterModel::Hidden(h) => write!(f, "{h}")?,
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Prior cluster-membership probabilities: row i is the softmax over
/// clusters of `x_iᵀ · coefficients`, the reference cluster having logit 0.
pub fn cluster_priors(
    coefficients: &CoefficientMatrix,
    design: &DesignSpec,
    cov: &CovariateFrame,
) -> Result<Vec<Vec<f64>>> {
    let labels = design.column_labels(cov)?;
    if labels != coefficients.row_labels() {
        return Err(Error::DimensionMismatch(format!(
            "design columns {labels:?} do not match coefficient rows {:?}",
            coefficients.row_labels()
        )));
    }
    let matrix = design.design_matrix(cov)?;
    Ok(softmax_probabilities(&matrix, coefficients.values()))
}

/// The joint block structure of a mixture: a block-diagonal transition
/// matrix over all cluster states with stacked emissions. Combined with a
/// subject's prior membership vector it yields that subject's joint HMM.
#[derive(Debug, Clone)]
pub struct BlockModel {
    pub alphabet: Alphabet,
    pub state_labels: Vec<String>,
    /// Cluster index of every block state.
    pub cluster_of_state: Vec<usize>,
    pub transitions: TransitionMatrix,
    pub emissions: EmissionMatrix,
    submodel_initials: Vec<Vec<f64>>,
}

/// Assemble the block view of a mixture (cluster transitions on the block
/// diagonal, zeros off-block, emissions stacked).
pub fn joint_block_model(m: &MixtureModel) -> Result<BlockModel> {
    let hmms: Vec<HiddenMarkovModel> = m.clusters.iter().map(|c| c.as_hmm()).collect();
    let total: usize = hmms.iter().map(|h| h.n_states()).sum();
    let mut state_labels = Vec::with_capacity(total);
    let mut cluster_of_state = Vec::with_capacity(total);
    let mut trans_rows = Vec::with_capacity(total);
    let mut emis_rows = Vec::with_capacity(total);
    let mut offset = 0usize;
    for (k, h) in hmms.iter().enumerate() {
        let s_k = h.n_states();
        for s in 0..s_k {
            state_labels.push(format!("{}:{}", m.cluster_labels[k], h.state_labels[s]));
            cluster_of_state.push(k);
            let mut row = vec![0.0; total];
            row[offset..offset + s_k].copy_from_slice(h.transitions.row(s));
            trans_rows.push(row);
            emis_rows.push(h.emissions.row(s).to_vec());
        }
        offset += s_k;
    }
    Ok(BlockModel {
        alphabet: m.alphabet().clone(),
        state_labels: state_labels.clone(),
        cluster_of_state,
        transitions: TransitionMatrix::new(trans_rows, state_labels)?,
        emissions: EmissionMatrix::new(emis_rows)?,
        submodel_initials: hmms.iter().map(|h| h.initial.entries().to_vec()).collect(),
    })
}

impl BlockModel {
    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    /// The joint HMM of one subject: block initial probabilities are the
    /// subject's prior membership times the submodel initial probabilities.
    pub fn subject_hmm(&self, prior: &[f64]) -> Result<HiddenMarkovModel> {
        if prior.len() != self.submodel_initials.len() {
            return Err(Error::DimensionMismatch(format!(
                "prior has {} entries for {} clusters",
                prior.len(),
                self.submodel_initials.len()
            )));
        }
        let mut initial = Vec::with_capacity(self.n_states());
        for (w, init) in prior.iter().zip(&self.submodel_initials) {
            initial.extend(init.iter().map(|p| w * p));
        }
        HiddenMarkovModel::new(
            self.alphabet.clone(),
            self.state_labels.clone(),
            ProbabilityVector::new(initial, self.state_labels.clone())?,
            self.transitions.clone(),
            self.emissions.clone(),
        )
    }
}

/// Posterior cluster memberships of every subject, with the total mixture
/// log-likelihood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorMemberships {
    /// N×K grid; rows sum to 1.
    pub grid: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Subjects whose sequence has zero likelihood under every cluster;
    /// their posterior row falls back to the prior.
    pub degenerate_subjects: Vec<usize>,
}

/// Per-subject posterior memberships: `posterior_ik ∝ prior_ik · L_k(i)`,
/// computed in log space and normalized per row.
pub fn posterior_memberships(
    m: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
) -> Result<PosteriorMemberships> {
    check_mixture_data(m, cov, s)?;
    let priors = cluster_priors(&m.coefficients, &m.design, cov)?;
    let hmms: Vec<HiddenMarkovModel> = m.clusters.iter().map(|c| c.as_hmm()).collect();
    let log_models: Vec<LogModel> = hmms.iter().map(LogModel::new).collect();
    let rows: Vec<&[Cell]> = s.rows().collect();
    let per_subject: Vec<(Vec<f64>, f64, bool)> = rows
        .par_iter()
        .zip(priors.par_iter())
        .map(|(row, prior)| {
            let lls: Vec<f64> = log_models
                .iter()
                .map(|lm| log_forward_with(lm, row).log_likelihood)
                .collect();
            subject_posterior(prior, &lls)
        })
        .collect();
    let mut grid = Vec::with_capacity(per_subject.len());
    let mut total = 0.0;
    let mut degenerate = Vec::new();
    for (i, (post, ll, bad)) in per_subject.into_iter().enumerate() {
        if bad {
            degenerate.push(i);
        }
        grid.push(post);
        total += ll;
    }
    Ok(PosteriorMemberships { grid, log_likelihood: total, degenerate_subjects: degenerate })
}

/// Normalized posterior row from a prior row and per-cluster log-likelihoods.
/// Returns (posterior, subject log-likelihood, degenerate flag).
fn subject_posterior(prior: &[f64], lls: &[f64]) -> (Vec<f64>, f64, bool) {
    let scores: Vec<f64> =
        prior.iter().zip(lls).map(|(w, ll)| if *w > 0.0 { w.ln() + ll } else { f64::NEG_INFINITY }).collect();
    let total = crate::hmm::log_sum_exp(&scores);
    if total == f64::NEG_INFINITY {
        return (prior.to_vec(), f64::NEG_INFINITY, true);
    }
    (scores.iter().map(|s| (s - total).exp()).collect(), total, false)
}

/// Total mixture log-likelihood `Σ_i ln Σ_k prior_ik · L_k(i)`.
pub fn mixture_log_likelihood(
    m: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
) -> Result<f64> {
    Ok(posterior_memberships(m, cov, s)?.log_likelihood)
}

fn check_mixture_data(m: &MixtureModel, cov: &CovariateFrame, s: &SequenceSet) -> Result<()> {
    if m.alphabet() != s.alphabet() {
        return Err(Error::DimensionMismatch("mixture and data alphabets differ".into()));
    }
    cov.check_alignment(s)?;
    Ok(())
}

/// One E-step sweep: per-cluster expected counts (responsibility-weighted),
/// posterior grid, and the total log-likelihood of the current model.
pub(crate) struct MixtureSweep {
    pub(crate) counts: Vec<ExpectedCounts>,
    pub(crate) posteriors: Vec<Vec<f64>>,
    pub(crate) log_likelihood: f64,
}

pub(crate) fn mixture_e_step(
    hmms: &[HiddenMarkovModel],
    priors: &[Vec<f64>],
    s: &SequenceSet,
) -> MixtureSweep {
    let rows: Vec<&[Cell]> = s.rows().collect();
    let log_models: Vec<LogModel> = hmms.iter().map(LogModel::new).collect();
    let per_subject: Vec<(Vec<ExpectedCounts>, Vec<f64>, f64)> = rows
        .par_iter()
        .zip(priors.par_iter())
        .map(|(row, prior)| {
            let mut counts: Vec<ExpectedCounts> = log_models
                .iter()
                .map(|lm| row_expected_counts_with(lm, lm.n_symbols(), row, 1.0))
                .collect();
            let lls: Vec<f64> = counts.iter().map(|c| c.log_likelihood).collect();
            let (post, ll, _) = subject_posterior(prior, &lls);
            for (c, w) in counts.iter_mut().zip(&post) {
                c.scale(*w);
            }
            (counts, post, ll)
        })
        .collect();

    let mut totals: Vec<ExpectedCounts> = hmms
        .iter()
        .map(|h| ExpectedCounts::zero(h.n_states(), h.alphabet.len()))
        .collect();
    let mut posteriors = Vec::with_capacity(per_subject.len());
    let mut log_likelihood = 0.0;
    for (counts, post, ll) in per_subject {
        for (total, c) in totals.iter_mut().zip(&counts) {
            if c.skipped == 0 {
                total.merge_counts(c);
            }
        }
        posteriors.push(post);
        log_likelihood += ll;
    }
    MixtureSweep { counts: totals, posteriors, log_likelihood }
}

/// EM for mixtures: submodel parameters are re-estimated from
/// responsibility-weighted expected counts (blocks never mix, structural
/// zeros are preserved) and coefficients by Newton-Raphson on the weighted
/// multinomial-logistic likelihood with posteriors as soft labels.
///
/// A numerically singular Hessian in the Newton step fails the whole fit
/// attempt with [`Error::SingularHessian`]; restart controllers treat that
/// as a failed round.
pub fn em_fit_mixture(
    m: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
    control: &EmControl,
) -> Result<(MixtureModel, EmResult)> {
    check_mixture_data(m, cov, s)?;
    let design_matrix = m.design.design_matrix(cov)?;
    let mut model = m.clone();
    let mut history = Vec::new();
    let mut ll_prev = f64::NAN;
    let mut iterations = 0usize;
    loop {
        let hmms: Vec<HiddenMarkovModel> = model.clusters.iter().map(|c| c.as_hmm()).collect();
        let priors = cluster_priors(&model.coefficients, &model.design, cov)?;
        let sweep = mixture_e_step(&hmms, &priors, s);
        let ll = sweep.log_likelihood;
        if iterations == 0 && !ll.is_finite() {
            return Err(Error::Estimation(format!(
                "mixture log-likelihood is {ll} at the starting values"
            )));
        }
        history.push(ll);
        if iterations > 0 {
            let change = crate::hmm::relative_change(ll, ll_prev);
            if change < control.relative_tolerance {
                return Ok((model, EmResult { log_lik: ll, iterations, change, history }));
            }
        }
        ll_prev = ll;

        // M-step: submodels from weighted counts, coefficients by Newton.
        let mut clusters = Vec::with_capacity(model.clusters.len());
        for ((cluster, hmm), counts) in
            model.clusters.iter().zip(&hmms).zip(&sweep.counts)
        {
            clusters.push(cluster.replace_from_hmm(reestimate(hmm, counts)?)?);
        }
        let newton = logistic::fit_weighted_multinomial(
            &design_matrix,
            &sweep.posteriors,
            model.coefficients.values(),
        )?;
        let coefficients = CoefficientMatrix::new(
            newton,
            model.coefficients.row_labels().to_vec(),
            model.coefficients.cluster_labels().to_vec(),
        )?;
        model = MixtureModel::new(clusters, model.cluster_labels, coefficients, model.design)?;

        iterations += 1;
        if iterations >= control.max_iterations {
            let ll_final = mixture_log_likelihood(&model, cov, s)?;
            let change = crate::hmm::relative_change(ll_final, ll_prev);
            history.push(ll_final);
            return Ok((model, EmResult { log_lik: ll_final, iterations, change, history }));
        }
    }
}

/// Summary of a fitted mixture: prior means, most-probable-cluster counts,
/// the classification table, per-subject membership grids, and coefficient
/// estimates with standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSummary {
    pub cluster_labels: Vec<String>,
    pub coefficients: CoefficientMatrix,
    /// P×K grid of standard errors (reference column zero), from the inverse
    /// observed information of the multinomial-logistic likelihood at the
    /// fitted coefficients (conditional on the fitted memberships).
    pub coefficient_std_errors: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub bic: f64,
    /// Column means of the prior membership grid.
    pub prior_means: Vec<f64>,
    pub most_probable_counts: Vec<usize>,
    pub most_probable_proportions: Vec<f64>,
    /// Row k: mean posterior vector over subjects whose most probable
    /// cluster is k; `None` when no subject is assigned to cluster k.
    pub classification_table: Vec<Option<Vec<f64>>>,
    pub prior_probabilities: Vec<Vec<f64>>,
    pub posterior_probabilities: Vec<Vec<f64>>,
}

/// Most probable cluster per posterior row; ties go to the lowest index.
pub fn most_probable_clusters(posteriors: &[Vec<f64>]) -> Vec<usize> {
    posteriors
        .iter()
        .map(|row| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for (k, &p) in row.iter().enumerate() {
                if p > best {
                    best = p;
                    arg = k;
                }
            }
            arg
        })
        .collect()
}

pub fn summarize(m: &MixtureModel, cov: &CovariateFrame, s: &SequenceSet) -> Result<MixtureSummary> {
    check_mixture_data(m, cov, s)?;
    let k = m.n_clusters();
    let n = s.n_sequences();
    let priors = cluster_priors(&m.coefficients, &m.design, cov)?;
    let post = posterior_memberships(m, cov, s)?;

    let mut prior_means = vec![0.0; k];
    for row in &priors {
        for (mean, p) in prior_means.iter_mut().zip(row) {
            *mean += p / n as f64;
        }
    }

    let assignment = most_probable_clusters(&post.grid);
    let mut counts = vec![0usize; k];
    for &a in &assignment {
        counts[a] += 1;
    }
    let proportions = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let mut table: Vec<Option<Vec<f64>>> = vec![None; k];
    for (cluster, row) in table.iter_mut().enumerate() {
        if counts[cluster] == 0 {
            continue;
        }
        let mut mean = vec![0.0; k];
        for (i, post_row) in post.grid.iter().enumerate() {
            if assignment[i] == cluster {
                for (m_entry, p) in mean.iter_mut().zip(post_row) {
                    *m_entry += p / counts[cluster] as f64;
                }
            }
        }
        *row = Some(mean);
    }

    let design_matrix = m.design.design_matrix(cov)?;
    let coefficient_std_errors =
        logistic::standard_errors(&design_matrix, m.coefficients.values())?;

    let score = crate::modelselect::bic_mixture(m, cov, s)?;

    Ok(MixtureSummary {
        cluster_labels: m.cluster_labels.clone(),
        coefficients: m.coefficients.clone(),
        coefficient_std_errors,
        log_likelihood: post.log_likelihood,
        bic: score.bic,
        prior_means,
        most_probable_counts: counts,
        most_probable_proportions: proportions,
        classification_table: table,
        prior_probabilities: priors,
        posterior_probabilities: post.grid,
    })
}

impl fmt::Display for MixtureSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.cluster_labels.len();
        writeln!(f, "Covariate effects :")?;
        writeln!(f, "{} is the reference.", self.cluster_labels[0])?;
        for cluster in 1..k {
            writeln!(f)?;
            writeln!(f, "{} :", self.cluster_labels[cluster])?;
            writeln!(f, "{:<12} {:>9}  {:>10}", "", "Estimate", "Std. error")?;
            for (p, label) in self.coefficients.row_labels().iter().enumerate() {
                writeln!(
                    f,
                    "{label:<12} {:>9.4} {:>11.3}",
                    self.coefficients.values()[p][cluster],
                    self.coefficient_std_errors[p][cluster],
                )?;
            }
        }
        writeln!(f)?;
        writeln!(f, "Log-likelihood: {:.3}   BIC: {:.3}", self.log_likelihood, self.bic)?;
        writeln!(f)?;
        let width = self.cluster_labels.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
        writeln!(f, "Means of prior cluster probabilities :")?;
        for l in &self.cluster_labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        for p in &self.prior_means {
            write!(f, " {:>width$.3}", p)?;
        }
        writeln!(f)?;
        writeln!(f)?;
        writeln!(f, "Most probable clusters :")?;
        write!(f, "{:<12}", "")?;
        for l in &self.cluster_labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        write!(f, "{:<12}", "count")?;
        for c in &self.most_probable_counts {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f)?;
        write!(f, "{:<12}", "proportion")?;
        for p in &self.most_probable_proportions {
            write!(f, " {:>width$.3}", p)?;
        }
        writeln!(f)?;
        writeln!(f)?;
        writeln!(f, "Classification table :")?;
        writeln!(f, "Mean cluster probabilities (in columns) by the most probable cluster (rows)")?;
        writeln!(f)?;
        write!(f, "{:<width$}", "")?;
        for l in &self.cluster_labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        for (row_label, row) in self.cluster_labels.iter().zip(&self.classification_table) {
            write!(f, "{row_label:<width$}")?;
            match row {
                Some(values) => {
                    for v in values {
                        write!(f, " {:>width$.5}", v)?;
                    }
                }
                None => {
                    for _ in 0..k {
                        write!(f, " {:>width$}", "-")?;
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::Factor;

    fn lh() -> Alphabet {
        Alphabet::new(vec!["L", "H"]).unwrap()
    }

    fn mm(pi: [f64; 2], a: [[f64; 2]; 2]) -> MarkovModel {
        let labels = vec!["L".to_string(), "H".to_string()];
        MarkovModel::new(
            lh(),
            ProbabilityVector::new(pi.to_vec(), labels.clone()).unwrap(),
            TransitionMatrix::new(a.iter().map(|r| r.to_vec()).collect(), labels).unwrap(),
        )
        .unwrap()
    }

    fn gpa_frame() -> CovariateFrame {
        let ids: Vec<String> = (1..=3).map(|i| i.to_string()).collect();
        let gpa = Factor::from_values(
            "GPA",
            vec!["Low".into(), "Middle".into(), "High".into()],
            &["Low".into(), "Middle".into(), "High".into()],
        )
        .unwrap();
        CovariateFrame::new(ids, vec![gpa]).unwrap()
    }

    fn roles_coefficients() -> CoefficientMatrix {
        CoefficientMatrix::new(
            vec![
                vec![0.0, 1.9221, 1.670],
                vec![0.0, 0.3901, 0.411],
                vec![0.0, -0.0451, -0.667],
            ],
            vec!["GPALow".into(), "GPAMiddle".into(), "GPAHigh".into()],
            vec!["Mainly leader".into(), "Isolate/mediator".into(), "Mediator/leader".into()],
        )
        .unwrap()
    }

    #[test]
    fn cluster_priors_reproduce_printed_tables() {
        let design = DesignSpec::without_intercept(vec!["GPA".into()]);
        let priors = cluster_priors(&roles_coefficients(), &design, &gpa_frame()).unwrap();
        let expected = [
            [0.07605453, 0.5198587, 0.4040868],
            [0.25090105, 0.3705958, 0.3785031],
            [0.40497185, 0.3870997, 0.2079285],
        ];
        for (row, want) in priors.iter().zip(expected) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (p, w) in row.iter().zip(want) {
                assert!((p - w).abs() < 5e-4, "{p} vs {w}");
            }
        }
    }

    #[test]
    fn zero_coefficients_give_uniform_priors() {
        let design = DesignSpec::without_intercept(vec!["GPA".into()]);
        let coef = CoefficientMatrix::zeros(
            vec!["GPALow".into(), "GPAMiddle".into(), "GPAHigh".into()],
            vec!["a".into(), "b".into(), "c".into()],
        );
        let priors = cluster_priors(&coef, &design, &gpa_frame()).unwrap();
        for row in priors {
            for p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn priors_are_invariant_to_common_column_shifts() {
        let design = DesignSpec::without_intercept(vec!["GPA".into()]);
        let base = roles_coefficients();
        let priors = cluster_priors(&base, &design, &gpa_frame()).unwrap();
        // Shift all logits of one design row by a constant via the softmax
        // argument directly: equivalent per-row shift leaves the softmax
        // unchanged.
        let mut shifted_rows = base.values().to_vec();
        let shift = 3.25;
        let matrix = design.design_matrix(&gpa_frame()).unwrap();
        let logits_equal = softmax_probabilities(
            &matrix,
            &shifted_rows
                .iter_mut()
                .map(|row| {
                    row.iter().map(|v| v + shift).collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>(),
        );
        for (a, b) in priors.iter().zip(&logits_equal) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_matrix_rejects_nonzero_reference() {
        let bad = CoefficientMatrix::new(
            vec![vec![0.1, 0.2]],
            vec!["(Intercept)".into()],
            vec!["a".into(), "b".into()],
        );
        assert!(bad.is_err());
    }

    fn two_cluster_mmm() -> (MixtureModel, CovariateFrame) {
        let low = mm([0.9, 0.1], [[0.8, 0.2], [0.4, 0.6]]);
        let high = mm([0.1, 0.9], [[0.6, 0.4], [0.1, 0.9]]);
        let cov = CovariateFrame::ids_only(vec!["1".into(), "2".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(low), ClusterModel::Markov(high)],
            vec!["Cluster 1".into(), "Cluster 2".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        (model, cov)
    }

    #[test]
    fn block_model_of_single_cluster_is_the_submodel() {
        let low = mm([0.9, 0.1], [[0.8, 0.2], [0.4, 0.6]]);
        let cov = CovariateFrame::ids_only(vec!["1".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(low.clone())],
            vec!["only".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let block = joint_block_model(&model).unwrap();
        let joint = block.subject_hmm(&[1.0]).unwrap();
        assert_eq!(joint.transitions.rows(), low.transitions.rows());
        assert_eq!(joint.initial.entries(), low.initial.entries());
    }

    #[test]
    fn block_model_is_block_diagonal() {
        let (model, _) = two_cluster_mmm();
        let block = joint_block_model(&model).unwrap();
        assert_eq!(block.n_states(), 4);
        for r in 0..2 {
            for c in 2..4 {
                assert_eq!(block.transitions.get(r, c), 0.0);
                assert_eq!(block.transitions.get(c, r), 0.0);
            }
        }
    }

    #[test]
    fn subject_initial_is_prior_times_submodel_initial() {
        let a = mm([1.0, 0.0], [[0.8, 0.2], [0.4, 0.6]]);
        let b = mm([1.0, 0.0], [[0.6, 0.4], [0.1, 0.9]]);
        let cov = CovariateFrame::ids_only(vec!["1".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(a), ClusterModel::Markov(b)],
            vec!["A".into(), "B".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let block = joint_block_model(&model).unwrap();
        let joint = block.subject_hmm(&[0.3, 0.7]).unwrap();
        assert_eq!(joint.initial.entries(), [0.3, 0.0, 0.7, 0.0]);
    }

    fn panel(rows: &[&str]) -> SequenceSet {
        let rows = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        'L' => Cell::Symbol(0),
                        'H' => Cell::Symbol(1),
                        '?' => Cell::Unknown,
                        other => panic!("bad cell {other}"),
                    })
                    .collect()
            })
            .collect();
        SequenceSet::from_rows(lh(), rows).unwrap()
    }

    #[test]
    fn single_cluster_posteriors_are_one() {
        let low = mm([0.9, 0.1], [[0.8, 0.2], [0.4, 0.6]]);
        let cov = CovariateFrame::ids_only(vec!["1".into(), "2".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(low)],
            vec!["only".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let data = panel(&["LLHH", "HHLL"]);
        let post = posterior_memberships(&model, &cov, &data).unwrap();
        for row in post.grid {
            assert_eq!(row, vec![1.0]);
        }
    }

    #[test]
    fn identical_submodels_give_uniform_posteriors() {
        let low = mm([0.5, 0.5], [[0.8, 0.2], [0.4, 0.6]]);
        let cov = CovariateFrame::ids_only(vec!["1".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(low.clone()), ClusterModel::Markov(low)],
            vec!["a".into(), "b".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let data = panel(&["LLHH"]);
        let post = posterior_memberships(&model, &cov, &data).unwrap();
        assert!((post.grid[0][0] - 0.5).abs() < 1e-12);
        assert!((post.grid[0][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posteriors_match_direct_arithmetic_on_a_toy_mixture() {
        let (model, cov) = two_cluster_mmm();
        let data = panel(&["LLLL", "HHHH"]);
        let post = posterior_memberships(&model, &cov, &data).unwrap();

        // L_k computed by multiplying chain probabilities directly.
        let like = |m: &MarkovModel, syms: &[usize]| {
            let mut p = m.initial.get(syms[0]);
            for w in syms.windows(2) {
                p *= m.transitions.get(w[0], w[1]);
            }
            p
        };
        let (a, b) = match (&model.clusters[0], &model.clusters[1]) {
            (ClusterModel::Markov(a), ClusterModel::Markov(b)) => (a.clone(), b.clone()),
            _ => unreachable!(),
        };
        for (i, syms) in [[0usize, 0, 0, 0], [1usize, 1, 1, 1]].iter().enumerate() {
            let la = like(&a, syms);
            let lb = like(&b, syms);
            let expected = la * 0.5 / (la * 0.5 + lb * 0.5);
            assert!((post.grid[i][0] - expected).abs() < 1e-12);
        }
        // Block-model likelihood agrees with the mixture likelihood.
        let block = joint_block_model(&model).unwrap();
        for (i, row) in data.rows().enumerate() {
            let joint = block.subject_hmm(&[0.5, 0.5]).unwrap();
            let ll_joint = crate::hmm::log_forward(&joint, row).log_likelihood;
            let direct = {
                let syms: Vec<usize> = row.iter().map(|c| c.symbol().unwrap()).collect();
                (like(&a, &syms) * 0.5 + like(&b, &syms) * 0.5).ln()
            };
            assert!((ll_joint - direct).abs() < 1e-10, "subject {i}");
        }
    }

    #[test]
    fn degenerate_subject_is_reported_with_prior_fallback() {
        let a = mm([1.0, 0.0], [[1.0, 0.0], [0.5, 0.5]]);
        let b = mm([1.0, 0.0], [[1.0, 0.0], [0.5, 0.5]]);
        let cov = CovariateFrame::ids_only(vec!["1".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(a), ClusterModel::Markov(b)],
            vec!["a".into(), "b".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let data = panel(&["LH"]);
        let post = posterior_memberships(&model, &cov, &data).unwrap();
        assert_eq!(post.degenerate_subjects, vec![0]);
        assert_eq!(post.grid[0], vec![0.5, 0.5]);
        assert_eq!(post.log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn summary_of_single_cluster_is_trivial() {
        let low = mm([0.9, 0.1], [[0.8, 0.2], [0.4, 0.6]]);
        let cov = CovariateFrame::ids_only(vec!["1".into(), "2".into()]);
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(low)],
            vec!["only".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let data = panel(&["LLHH", "HHLL"]);
        let summary = summarize(&model, &cov, &data).unwrap();
        assert_eq!(summary.prior_means, vec![1.0]);
        assert_eq!(summary.most_probable_proportions, vec![1.0]);
        assert_eq!(summary.classification_table, vec![Some(vec![1.0])]);
    }

    #[test]
    fn classification_table_matches_brute_force_grouping() {
        let (model, _) = two_cluster_mmm();
        let cov = CovariateFrame::ids_only((1..=4).map(|i| i.to_string()).collect());
        let data = panel(&["LLLL", "HHHH", "LLHL", "HHLH"]);
        let summary = summarize(&model, &cov, &data).unwrap();
        let post = posterior_memberships(&model, &cov, &data).unwrap();
        let assignment = most_probable_clusters(&post.grid);
        for cluster in 0..2 {
            let members: Vec<&Vec<f64>> = post
                .grid
                .iter()
                .zip(&assignment)
                .filter(|(_, a)| **a == cluster)
                .map(|(row, _)| row)
                .collect();
            match &summary.classification_table[cluster] {
                Some(row) => {
                    let sum: f64 = row.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-9);
                    for (k, v) in row.iter().enumerate() {
                        let mean: f64 =
                            members.iter().map(|r| r[k]).sum::<f64>() / members.len() as f64;
                        assert!((v - mean).abs() < 1e-12);
                    }
                }
                None => assert!(members.is_empty()),
            }
        }
    }

    #[test]
    fn em_on_single_cluster_reduces_to_closed_form_estimate() {
        let data = panel(&["LLHH", "HHLL", "LHLH", "HLHL", "LLHL"]);
        let start = mm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]);
        let cov = CovariateFrame::ids_only(data.ids().to_vec());
        let model = MixtureModel::with_zero_coefficients(
            vec![ClusterModel::Markov(start)],
            vec!["only".into()],
            DesignSpec::intercept_only(),
            &cov,
        )
        .unwrap();
        let (fitted, result) =
            em_fit_mixture(&model, &cov, &data, &EmControl::default()).unwrap();
        let direct = crate::markov::estimate_mm(&data).unwrap().model;
        match &fitted.clusters[0] {
            ClusterModel::Markov(m) => {
                for s in 0..2 {
                    assert!((m.initial.get(s) - direct.initial.get(s)).abs() < 1e-9);
                    for t in 0..2 {
                        assert!(
                            (m.transitions.get(s, t) - direct.transitions.get(s, t)).abs() < 1e-9
                        );
                    }
                }
            }
            _ => unreachable!(),
        }
        let direct_ll = crate::markov::mm_log_likelihood(&direct, &data).unwrap();
        assert!((result.log_lik - direct_ll).abs() < 1e-9);
    }

    #[test]
    fn mixture_em_trace_is_monotone() {
        let (model, _) = two_cluster_mmm();
        let cov = CovariateFrame::ids_only((1..=4).map(|i| i.to_string()).collect());
        let data = panel(&["LLLL", "HHHH", "LLHL", "H?LH"]);
        let (_, result) = em_fit_mixture(&model, &cov, &data, &EmControl::default()).unwrap();
        for pair in result.history.windows(2) {
            assert!(pair[1] - pair[0] >= -1e-9, "trace decreased: {pair:?}");
        }
    }

    #[test]
    fn posterior_argmax_survives_a_shared_unknown_column() {
        let (model, _) = two_cluster_mmm();
        let cov = CovariateFrame::ids_only((1..=4).map(|i| i.to_string()).collect());
        let data = panel(&["LLLL", "HHHH", "LLHL", "HHLH"]);
        let padded = panel(&["LLLL?", "HHHH?", "LLHL?", "HHLH?"]);
        let base = posterior_memberships(&model, &cov, &data).unwrap();
        let with_pad = posterior_memberships(&model, &cov, &padded).unwrap();
        assert_eq!(
            most_probable_clusters(&base.grid),
            most_probable_clusters(&with_pad.grid)
        );
    }
}
