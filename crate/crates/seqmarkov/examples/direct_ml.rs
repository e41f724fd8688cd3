//! Direct numerical maximum likelihood: multistart quasi-Newton over the
//! softmax parameterization, cross-checked against EM restarts. Both routes
//! should land on the same optimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::estimation::{
    direct_ml_fit_hmm, fit_hmm_with_restarts, randomize_like_hmm, GlobalControl, RestartControl,
};
use seqmarkov::hmm::{EmControl, EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::seqdata::Alphabet;

fn main() -> seqmarkov::Result<()> {
    let states = vec!["State 1".to_string(), "State 2".to_string()];
    let truth = HiddenMarkovModel::new(
        Alphabet::new(vec!["a", "b"])?,
        states.clone(),
        ProbabilityVector::new(vec![0.7, 0.3], states.clone())?,
        TransitionMatrix::new(vec![vec![0.8, 0.2], vec![0.25, 0.75]], states)?,
        EmissionMatrix::new(vec![vec![0.85, 0.15], vec![0.2, 0.8]])?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let data = truth.simulate(100, 15, &mut rng)?;
    let start = randomize_like_hmm(&truth, 6)?;

    let em = fit_hmm_with_restarts(
        &start,
        &data,
        &EmControl { max_iterations: 5000, relative_tolerance: 1e-13 },
        &RestartControl::with_seed(8, 2),
    )?;
    let direct = direct_ml_fit_hmm(
        &start,
        &data,
        &GlobalControl { multistart: 6, maxeval: 50_000, maxtime: None, seed: 2 },
    )?;

    println!("EM restarts  logLik: {:.8}", em.log_likelihood);
    println!("direct ML    logLik: {:.8}  (termination: {:?})", direct.log_likelihood, direct.termination);
    println!("difference: {:.2e}", (em.log_likelihood - direct.log_likelihood).abs());
    println!();
    print!("{}", direct.model);
    Ok(())
}
