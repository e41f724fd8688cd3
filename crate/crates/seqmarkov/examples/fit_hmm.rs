//! Fit a hidden Markov model with EM restarts and inspect the restart
//! ledger: the best log-likelihood should be found from several different
//! starting values before trusting it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::estimation::{fit_hmm_with_restarts, randomize_like_hmm, RestartControl};
use seqmarkov::hmm::{EmControl, EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::seqdata::Alphabet;

fn main() -> seqmarkov::Result<()> {
    let states = vec!["State 1".to_string(), "State 2".to_string()];
    let truth = HiddenMarkovModel::new(
        Alphabet::new(vec!["Isolate", "Mediator", "Leader"])?,
        states.clone(),
        ProbabilityVector::new(vec![0.66, 0.34], states.clone())?,
        TransitionMatrix::new(vec![vec![0.91, 0.09], vec![0.04, 0.96]], states)?,
        EmissionMatrix::new(vec![vec![0.44, 0.52, 0.04], vec![0.02, 0.48, 0.50]])?,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let data = truth.simulate(200, 20, &mut rng)?;

    let start = randomize_like_hmm(&truth, 1)?;
    let report = fit_hmm_with_restarts(
        &start,
        &data,
        &EmControl::default(),
        &RestartControl::with_seed(10, 1),
    )?;

    print!("{}", report.model);
    println!();
    println!("logLik: {:.3}", report.log_likelihood);
    println!("iterations: {}", report.result.iterations);
    println!("change: {:e}", report.result.change);
    println!(
        "best_opt_restart: {}",
        report
            .best_opt_restart
            .iter()
            .map(|ll| format!("{ll:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!(
        "best optimum found in {} of {} rounds",
        report.optimum_count,
        report.round_seeds.len()
    );
    Ok(())
}
