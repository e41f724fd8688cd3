//! Estimation control: seeded random starting values, restart orchestration
//! with a likelihood ledger, and direct numerical maximum likelihood over
//! softmax-parameterized models.

mod direct;
mod lbfgs;
mod softmax;

pub use direct::{direct_ml_fit_hmm, direct_ml_fit_mixture, GlobalControl, Termination};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{em_fit, EmControl, EmResult, EmissionMatrix, HiddenMarkovModel};
use crate::markov::{MarkovModel, ProbabilityVector, TransitionMatrix};
use crate::mixture::{em_fit_mixture, ClusterModel, CoefficientMatrix, MixtureModel};
use crate::seqdata::{CovariateFrame, SequenceSet};

/// Restart behaviour of an EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartControl {
    /// Number of additional rounds beyond the user-provided starting values.
    pub times: usize,
    /// How many of the best per-round log-likelihoods to keep in the ledger.
    pub n_optimum: usize,
    pub seed: u64,
    /// Two final log-likelihoods within this absolute distance count as the
    /// same optimum when reporting how often the best one was found.
    pub tolerance: f64,
}

impl Default for RestartControl {
    fn default() -> Self {
        RestartControl { times: 0, n_optimum: 25, seed: 0, tolerance: 1e-4 }
    }
}

impl RestartControl {
    pub fn with_seed(times: usize, seed: u64) -> Self {
        RestartControl { times, seed, ..RestartControl::default() }
    }
}

/// Deterministic per-round seed derived from the master seed (SplitMix64
/// finalizer over the pair).
pub fn round_seed(master: u64, round: u64) -> u64 {
    let mut z = master ^ round.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundFailure {
    pub round: usize,
    pub message: String,
}

/// Outcome of a multi-round estimation run: the best model, the descending
/// per-round likelihood ledger (failed rounds as −∞), per-round failure
/// diagnostics, and the RNG provenance needed to reproduce the run.
///
/// Serialization covers the diagnostics only; the model is written to its
/// own artifact.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = ""))]
pub struct FitReport<M> {
    #[serde(skip_serializing)]
    pub model: M,
    #[serde(rename = "logLik")]
    pub log_likelihood: f64,
    /// Diagnostics of the best round.
    pub result: EmResult,
    pub best_opt_restart: Vec<f64>,
    pub failures: Vec<RoundFailure>,
    pub best_round: usize,
    /// How many rounds reached the best optimum (within the control's
    /// tolerance).
    pub optimum_count: usize,
    pub master_seed: u64,
    pub round_seeds: Vec<u64>,
    pub termination: Termination,
    /// True when a wall-clock budget cut the run short; such runs are not
    /// reproducible even with a fixed seed.
    pub wall_clock_bound: bool,
}

/// Run `times + 1` estimation rounds: round 0 from the provided model,
/// later rounds from `make_start(round_seed(seed, round))`. Failed rounds
/// are ledgered as −∞ and reported; ties are resolved toward the earliest
/// round. Rounds run in parallel but merge in round order, so the report is
/// identical for any worker count.
pub fn run_restarts<M, FStart, FFit>(
    start: &M,
    control: &RestartControl,
    make_start: FStart,
    fit: FFit,
) -> Result<FitReport<M>>
where
    M: Clone + Send + Sync,
    FStart: Fn(u64) -> Result<M> + Sync,
    FFit: Fn(M) -> Result<(M, EmResult)> + Sync,
{
    if control.n_optimum == 0 {
        return Err(Error::InvalidInput("n_optimum must be at least 1".into()));
    }
    let rounds = control.times + 1;
    let round_seeds: Vec<u64> =
        (0..rounds as u64).map(|r| round_seed(control.seed, r)).collect();
    let outcomes: Vec<std::result::Result<(M, EmResult), String>> = (0..rounds)
        .into_par_iter()
        .map(|round| {
            let starting = if round == 0 {
                Ok(start.clone())
            } else {
                make_start(round_seeds[round])
            };
            starting.and_then(&fit).map_err(|e| e.to_string())
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut failures = Vec::new();
    let mut ledger = Vec::with_capacity(rounds);
    for (round, outcome) in outcomes.iter().enumerate() {
        match outcome {
            Ok((_, result)) => {
                ledger.push(result.log_lik);
                let better = match best {
                    None => true,
                    Some((_, ll)) => result.log_lik > ll,
                };
                if better {
                    best = Some((round, result.log_lik));
                }
            }
            Err(message) => {
                ledger.push(f64::NEG_INFINITY);
                failures.push(RoundFailure { round, message: message.clone() });
            }
        }
    }
    let (best_round, best_ll) = best.ok_or_else(|| {
        Error::AllRoundsFailed(failures.iter().map(|f| f.message.clone()).collect())
    })?;
    let optimum_count = ledger.iter().filter(|ll| (best_ll - **ll).abs() <= control.tolerance).count();
    ledger.sort_by(|a, b| b.total_cmp(a));
    ledger.truncate(control.n_optimum);

    let (model, result) = match outcomes.into_iter().nth(best_round) {
        Some(Ok(pair)) => pair,
        _ => unreachable!("best round is a successful round"),
    };
    Ok(FitReport {
        model,
        log_likelihood: best_ll,
        result,
        best_opt_restart: ledger,
        failures,
        best_round,
        optimum_count,
        master_seed: control.seed,
        round_seeds,
        termination: Termination::Convergence,
        wall_clock_bound: false,
    })
}

fn state_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("State {i}")).collect()
}

fn random_distribution<R: Rng>(n: usize, diag_boost: f64, diag: Option<usize>, rng: &mut R) -> Vec<f64> {
    loop {
        let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if let Some(d) = diag {
            weights[d] += diag_boost;
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            return weights.iter().map(|w| w / total).collect();
        }
    }
}

/// Random initial probabilities: independent uniform(0,1) weights per state,
/// normalized. Deterministic given the seed.
pub fn simulate_initial_probs(n_states: usize, seed: u64) -> Result<ProbabilityVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ProbabilityVector::new(random_distribution(n_states, 0.0, None, &mut rng), state_labels(n_states))
}

/// Random transition matrices, one per cluster: each row draws uniform(0,1)
/// weights, the diagonal entry is incremented by `diag_boost` before
/// normalization.
pub fn simulate_transition_probs(
    n_states: usize,
    n_clusters: usize,
    diag_boost: f64,
    seed: u64,
) -> Result<Vec<TransitionMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_clusters)
        .map(|_| {
            let rows = (0..n_states)
                .map(|r| random_distribution(n_states, diag_boost, Some(r), &mut rng))
                .collect();
            TransitionMatrix::new(rows, state_labels(n_states))
        })
        .collect()
}

/// Random emission matrices, one per cluster; `n_states` gives the state
/// count of each cluster (the slice length is the cluster count).
pub fn simulate_emission_probs(
    n_states: &[usize],
    n_symbols: usize,
    seed: u64,
) -> Result<Vec<EmissionMatrix>> {
    if n_symbols == 0 {
        return Err(Error::InvalidInput("n_symbols must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    n_states
        .iter()
        .map(|&s| {
            let rows =
                (0..s).map(|_| random_distribution(n_symbols, 0.0, None, &mut rng)).collect();
            EmissionMatrix::new(rows)
        })
        .collect()
}

fn randomize_row<R: Rng>(old: &[f64], rng: &mut R) -> Vec<f64> {
    // Fresh uniform weights on the nonzero entries; structural zeros stay.
    loop {
        let weights: Vec<f64> =
            old.iter().map(|&p| if p == 0.0 { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 || old.iter().all(|&p| p == 0.0) {
            return weights.iter().map(|w| if total > 0.0 { w / total } else { 0.0 }).collect();
        }
    }
}

/// Fresh random starting values shaped like `h`: every probability row is
/// redrawn uniformly over its nonzero entries (structural zeros preserved).
pub fn randomize_like_hmm(h: &HiddenMarkovModel, seed: u64) -> Result<HiddenMarkovModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    randomize_hmm_with(h, &mut rng)
}

fn randomize_hmm_with<R: Rng>(h: &HiddenMarkovModel, rng: &mut R) -> Result<HiddenMarkovModel> {
    let initial =
        ProbabilityVector::new(randomize_row(h.initial.entries(), rng), h.state_labels.clone())?;
    let trans_rows =
        h.transitions.rows().iter().map(|row| randomize_row(row, rng)).collect::<Vec<_>>();
    let transitions = TransitionMatrix::new(trans_rows, h.state_labels.clone())?;
    let emis_rows =
        h.emissions.rows().iter().map(|row| randomize_row(row, rng)).collect::<Vec<_>>();
    let emissions = EmissionMatrix::new(emis_rows)?;
    HiddenMarkovModel::new(
        h.alphabet.clone(),
        h.state_labels.clone(),
        initial,
        transitions,
        emissions,
    )
}

/// Fresh random starting values shaped like `m`: submodel probabilities are
/// redrawn (structural zeros preserved) and coefficients reset to zero.
pub fn randomize_like_mixture(m: &MixtureModel, seed: u64) -> Result<MixtureModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = m
        .clusters
        .iter()
        .map(|c| {
            let randomized = randomize_hmm_with(&c.as_hmm(), &mut rng)?;
            Ok(match c {
                ClusterModel::Markov(mm) => ClusterModel::Markov(MarkovModel::new(
                    mm.alphabet.clone(),
                    ProbabilityVector::new(
                        randomized.initial.entries().to_vec(),
                        mm.alphabet.symbols().to_vec(),
                    )?,
                    TransitionMatrix::new(
                        randomized.transitions.rows().to_vec(),
                        mm.alphabet.symbols().to_vec(),
                    )?,
                )?),
                ClusterModel::Hidden(_) => ClusterModel::Hidden(randomized),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let coefficients = CoefficientMatrix::zeros(
        m.coefficients.row_labels().to_vec(),
        m.coefficients.cluster_labels().to_vec(),
    );
    MixtureModel::new(clusters, m.cluster_labels.clone(), coefficients, m.design.clone())
}

/// EM with random restarts for a hidden Markov model.
pub fn fit_hmm_with_restarts(
    start: &HiddenMarkovModel,
    s: &SequenceSet,
    em: &EmControl,
    restarts: &RestartControl,
) -> Result<FitReport<HiddenMarkovModel>> {
    run_restarts(
        start,
        restarts,
        |seed| randomize_like_hmm(start, seed),
        |model| em_fit(&model, s, em),
    )
}

/// EM with random restarts for a mixture model (MMM or MHMM).
pub fn fit_mixture_with_restarts(
    start: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
    em: &EmControl,
    restarts: &RestartControl,
) -> Result<FitReport<MixtureModel>> {
    run_restarts(
        start,
        restarts,
        |seed| randomize_like_mixture(start, seed),
        |model| em_fit_mixture(&model, cov, s, em),
    )
}
