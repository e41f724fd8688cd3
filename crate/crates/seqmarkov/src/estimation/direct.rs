//! Direct numerical maximum likelihood: multistart quasi-Newton ascent over
//! softmax-parameterized models, with analytic gradients assembled from
//! expected counts, followed by an EM polish from the best point.
//!
//! This replaces global stochastic search with seeded, budgeted multistart:
//! reproducible given the seed unless a wall-clock budget cuts a run short.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::lbfgs::{minimize, Budget, StopReason};
use crate::estimation::softmax::HmmPacking;
use crate::estimation::{randomize_like_hmm, randomize_like_mixture, round_seed, FitReport, RoundFailure};
use crate::hmm::{em_fit, panel_expected_counts, EmControl, EmResult, HiddenMarkovModel};
use crate::mixture::{cluster_priors, em_fit_mixture, mixture_e_step, CoefficientMatrix, MixtureModel};
use crate::seqdata::{CovariateFrame, SequenceSet};

/// Budgets for the direct-likelihood path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalControl {
    /// Wall-clock budget in seconds. Relying on it makes results
    /// irreproducible when it binds; the report flags that.
    pub maxtime: Option<f64>,
    /// Objective-evaluation budget (every likelihood+gradient sweep and
    /// every polish iteration counts as one).
    pub maxeval: u64,
    /// Number of quasi-Newton starts (the provided model plus
    /// `multistart − 1` seeded random draws).
    pub multistart: usize,
    pub seed: u64,
}

impl Default for GlobalControl {
    fn default() -> Self {
        GlobalControl { maxtime: None, maxeval: 100_000, multistart: 10, seed: 0 }
    }
}

impl GlobalControl {
    fn validate(&self) -> Result<()> {
        if self.maxeval == 0 {
            return Err(Error::InvalidInput("maxeval must be positive".into()));
        }
        if self.multistart == 0 {
            return Err(Error::InvalidInput("multistart must be positive".into()));
        }
        if let Some(t) = self.maxtime {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::InvalidInput("maxtime must be positive".into()));
            }
        }
        Ok(())
    }

    fn deadline(&self) -> Option<Instant> {
        self.maxtime.map(|secs| Instant::now() + Duration::from_secs_f64(secs))
    }
}

/// Why a direct fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Convergence,
    EvalBudget,
    TimeBudget,
}

const LBFGS_GRADIENT_TOL: f64 = 1e-8;
const LBFGS_MAX_ITERATIONS: usize = 500;
const POLISH_TOLERANCE: f64 = 1e-12;

struct StartOutcome {
    log_likelihood: f64,
    theta: Vec<f64>,
}

/// Shared multistart driver over a packed parameter vector. Starts run
/// sequentially against one budget, so the outcome is deterministic for any
/// worker count (data-level parallelism lives inside the objective).
fn multistart_minimize<O>(
    starts: Vec<Vec<f64>>,
    mut objective: O,
    budget: &mut Budget,
) -> Vec<StartOutcome>
where
    O: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut outcomes = Vec::with_capacity(starts.len());
    for theta in starts {
        if budget.evals_left == 0 || budget.time_up() {
            break;
        }
        let minimum =
            minimize(&mut objective, theta, budget, LBFGS_GRADIENT_TOL, LBFGS_MAX_ITERATIONS);
        outcomes.push(StartOutcome { log_likelihood: -minimum.f, theta: minimum.x });
        if minimum.reason != StopReason::Converged {
            break;
        }
    }
    outcomes
}

fn pick_best(outcomes: &[StartOutcome]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.log_likelihood.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, ll)| o.log_likelihood > ll) {
            best = Some((i, o.log_likelihood));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| {
        Error::Estimation("budget exhausted before any finite-likelihood point".into())
    })
}

fn report_fields(budget: &Budget) -> (Termination, bool) {
    if budget.time_bound_hit {
        (Termination::TimeBudget, true)
    } else if budget.eval_bound_hit {
        (Termination::EvalBudget, false)
    } else {
        (Termination::Convergence, false)
    }
}

fn ledger_from(outcomes: &[StartOutcome], best: usize, final_ll: f64) -> Vec<f64> {
    let mut lls: Vec<f64> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| if i == best { final_ll } else { o.log_likelihood })
        .collect();
    lls.sort_by(|a, b| b.total_cmp(a));
    lls
}

/// Direct maximum-likelihood fit of an HMM: multistart L-BFGS over the
/// softmax parameters (structural zeros excluded), then an EM polish from
/// the best point within the remaining budget.
pub fn direct_ml_fit_hmm(
    start: &HiddenMarkovModel,
    s: &SequenceSet,
    control: &GlobalControl,
) -> Result<FitReport<HiddenMarkovModel>> {
    control.validate()?;
    if *s.alphabet() != start.alphabet {
        return Err(Error::DimensionMismatch("model and data alphabets differ".into()));
    }
    let packing = HmmPacking::of(start);
    let mut budget = Budget::new(control.maxeval, control.deadline());

    let round_seeds: Vec<u64> =
        (0..control.multistart as u64).map(|r| round_seed(control.seed, r)).collect();
    let mut starts = Vec::with_capacity(control.multistart);
    for (i, &seed) in round_seeds.iter().enumerate() {
        let model = if i == 0 { start.clone() } else { randomize_like_hmm(start, seed)? };
        let mut theta = Vec::with_capacity(packing.dim());
        packing.pack_into(&model, &mut theta);
        starts.push(theta);
    }

    let objective = |theta: &[f64]| -> (f64, Vec<f64>) {
        let model = packing.unpack(theta, start).expect("packed parameters are always valid");
        let counts = panel_expected_counts(&model, s);
        if counts.skipped > 0 || !counts.log_likelihood.is_finite() {
            return (f64::INFINITY, vec![0.0; theta.len()]);
        }
        let mut grad = Vec::with_capacity(theta.len());
        packing.gradient_into(&counts, &model, &mut grad);
        for g in &mut grad {
            *g = -*g;
        }
        (-counts.log_likelihood, grad)
    };

    let outcomes = multistart_minimize(starts, objective, &mut budget);
    let best = pick_best(&outcomes)?;
    let best_model = packing.unpack(&outcomes[best].theta, start)?;

    let mut failures = Vec::new();
    let (model, result) = if budget.evals_left > 0 && !budget.time_up() {
        let polish_control = EmControl {
            max_iterations: budget.evals_left.min(1000) as usize,
            relative_tolerance: POLISH_TOLERANCE,
        };
        let (polished, em) = em_fit(&best_model, s, &polish_control)?;
        budget.evals_left = budget.evals_left.saturating_sub(em.iterations as u64);
        if budget.evals_left == 0 && em.change >= POLISH_TOLERANCE {
            budget.eval_bound_hit = true;
        }
        (polished, em)
    } else {
        let ll = outcomes[best].log_likelihood;
        (best_model, EmResult { log_lik: ll, iterations: 0, change: 0.0, history: vec![ll] })
    };
    if result.log_lik + 1e-9 < outcomes[best].log_likelihood {
        failures.push(RoundFailure {
            round: best,
            message: "polish ended below the multistart optimum".into(),
        });
    }

    let ledger = ledger_from(&outcomes, best, result.log_lik);
    let (termination, wall_clock_bound) = report_fields(&budget);
    Ok(FitReport {
        model,
        log_likelihood: result.log_lik,
        best_opt_restart: ledger,
        result,
        failures,
        best_round: best,
        optimum_count: 1,
        master_seed: control.seed,
        round_seeds,
        termination,
        wall_clock_bound,
    })
}

/// Packed layout of a mixture: per-cluster HMM packings plus the free
/// coefficient block (columns 1..K, row-major per cluster).
struct MixturePacking {
    submodels: Vec<HmmPacking>,
    n_rows: usize,
    n_clusters: usize,
}

impl MixturePacking {
    fn of(m: &MixtureModel) -> Self {
        MixturePacking {
            submodels: m.clusters.iter().map(|c| HmmPacking::of(&c.as_hmm())).collect(),
            n_rows: m.coefficients.values().len(),
            n_clusters: m.n_clusters(),
        }
    }

    fn dim(&self) -> usize {
        self.submodels.iter().map(HmmPacking::dim).sum::<usize>()
            + self.n_rows * (self.n_clusters - 1)
    }

    fn pack(&self, m: &MixtureModel) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.dim());
        for (packing, cluster) in self.submodels.iter().zip(&m.clusters) {
            packing.pack_into(&cluster.as_hmm(), &mut theta);
        }
        for k in 1..self.n_clusters {
            for row in m.coefficients.values() {
                theta.push(row[k]);
            }
        }
        theta
    }

    fn unpack(&self, theta: &[f64], template: &MixtureModel) -> Result<MixtureModel> {
        let mut offset = 0usize;
        let mut clusters = Vec::with_capacity(template.clusters.len());
        for (packing, cluster) in self.submodels.iter().zip(&template.clusters) {
            let dim = packing.dim();
            let hmm = packing.unpack(&theta[offset..offset + dim], &cluster.as_hmm())?;
            clusters.push(cluster.replace_from_hmm(hmm)?);
            offset += dim;
        }
        let mut values = vec![vec![0.0; self.n_clusters]; self.n_rows];
        for k in 1..self.n_clusters {
            for row in &mut values {
                row[k] = theta[offset];
                offset += 1;
            }
        }
        debug_assert_eq!(offset, theta.len());
        let coefficients = CoefficientMatrix::new(
            values,
            template.coefficients.row_labels().to_vec(),
            template.coefficients.cluster_labels().to_vec(),
        )?;
        MixtureModel::new(
            clusters,
            template.cluster_labels.clone(),
            coefficients,
            template.design.clone(),
        )
    }
}

/// Direct maximum-likelihood fit of a mixture model (submodel rows and
/// covariate coefficients optimized jointly).
pub fn direct_ml_fit_mixture(
    start: &MixtureModel,
    cov: &CovariateFrame,
    s: &SequenceSet,
    control: &GlobalControl,
) -> Result<FitReport<MixtureModel>> {
    control.validate()?;
    cov.check_alignment(s)?;
    let packing = MixturePacking::of(start);
    let design_matrix = start.design.design_matrix(cov)?;
    let mut budget = Budget::new(control.maxeval, control.deadline());

    let round_seeds: Vec<u64> =
        (0..control.multistart as u64).map(|r| round_seed(control.seed, r)).collect();
    let mut starts = Vec::with_capacity(control.multistart);
    for (i, &seed) in round_seeds.iter().enumerate() {
        let model = if i == 0 { start.clone() } else { randomize_like_mixture(start, seed)? };
        starts.push(packing.pack(&model));
    }

    let objective = |theta: &[f64]| -> (f64, Vec<f64>) {
        let model = packing.unpack(theta, start).expect("packed parameters are always valid");
        let hmms: Vec<HiddenMarkovModel> = model.clusters.iter().map(|c| c.as_hmm()).collect();
        let priors = match cluster_priors(&model.coefficients, &model.design, cov) {
            Ok(p) => p,
            Err(_) => return (f64::INFINITY, vec![0.0; theta.len()]),
        };
        let sweep = mixture_e_step(&hmms, &priors, s);
        if !sweep.log_likelihood.is_finite() {
            return (f64::INFINITY, vec![0.0; theta.len()]);
        }
        let mut grad = Vec::with_capacity(theta.len());
        for ((sub_packing, counts), hmm) in
            packing.submodels.iter().zip(&sweep.counts).zip(&hmms)
        {
            sub_packing.gradient_into(counts, hmm, &mut grad);
        }
        for k in 1..packing.n_clusters {
            for p in 0..packing.n_rows {
                let mut g = 0.0;
                for ((x, post), prior) in
                    design_matrix.iter().zip(&sweep.posteriors).zip(&priors)
                {
                    g += x[p] * (post[k] - prior[k]);
                }
                grad.push(g);
            }
        }
        for g in &mut grad {
            *g = -*g;
        }
        (-sweep.log_likelihood, grad)
    };

    let outcomes = multistart_minimize(starts, objective, &mut budget);
    let best = pick_best(&outcomes)?;
    let best_model = packing.unpack(&outcomes[best].theta, start)?;

    let mut failures = Vec::new();
    let (model, result) = if budget.evals_left > 0 && !budget.time_up() {
        let polish_control = EmControl {
            max_iterations: budget.evals_left.min(1000) as usize,
            relative_tolerance: POLISH_TOLERANCE,
        };
        match em_fit_mixture(&best_model, cov, s, &polish_control) {
            Ok((polished, em)) => {
                budget.evals_left = budget.evals_left.saturating_sub(em.iterations as u64);
                if budget.evals_left == 0 && em.change >= POLISH_TOLERANCE {
                    budget.eval_bound_hit = true;
                }
                (polished, em)
            }
            Err(Error::SingularHessian) => {
                // Keep the unpolished optimum; the Newton refinement of the
                // coefficients is not available at this point.
                failures.push(RoundFailure {
                    round: best,
                    message: Error::SingularHessian.to_string(),
                });
                let ll = outcomes[best].log_likelihood;
                (
                    best_model,
                    EmResult { log_lik: ll, iterations: 0, change: 0.0, history: vec![ll] },
                )
            }
            Err(other) => return Err(other),
        }
    } else {
        let ll = outcomes[best].log_likelihood;
        (best_model, EmResult { log_lik: ll, iterations: 0, change: 0.0, history: vec![ll] })
    };

    let ledger = ledger_from(&outcomes, best, result.log_lik);
    let (termination, wall_clock_bound) = report_fields(&budget);
    Ok(FitReport {
        model,
        log_likelihood: result.log_lik,
        best_opt_restart: ledger,
        result,
        failures,
        best_round: best,
        optimum_count: 1,
        master_seed: control.seed,
        round_seeds,
        termination,
        wall_clock_bound,
    })
}
