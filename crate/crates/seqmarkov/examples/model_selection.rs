//! Choose the number of hidden states with BIC: fit one-, two-, and
//! three-state HMMs to the same panel and compare. Lower BIC wins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::estimation::{fit_hmm_with_restarts, randomize_like_hmm, RestartControl};
use seqmarkov::hmm::{EmControl, EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::modelselect::bic_hmm;
use seqmarkov::seqdata::Alphabet;

fn uniform_hmm(alphabet: &Alphabet, n_states: usize) -> seqmarkov::Result<HiddenMarkovModel> {
    let labels: Vec<String> = (1..=n_states).map(|i| format!("State {i}")).collect();
    let m = alphabet.len();
    HiddenMarkovModel::new(
        alphabet.clone(),
        labels.clone(),
        ProbabilityVector::uniform(labels.clone())?,
        TransitionMatrix::new(vec![vec![1.0 / n_states as f64; n_states]; n_states], labels)?,
        EmissionMatrix::new(vec![vec![1.0 / m as f64; m]; n_states])?,
    )
}

fn main() -> seqmarkov::Result<()> {
    // Data generated by a genuine 2-state process.
    let states = vec!["a".to_string(), "b".to_string()];
    let truth = HiddenMarkovModel::new(
        Alphabet::new(vec!["x", "y", "z"])?,
        states.clone(),
        ProbabilityVector::new(vec![0.7, 0.3], states.clone())?,
        TransitionMatrix::new(vec![vec![0.85, 0.15], vec![0.2, 0.8]], states)?,
        EmissionMatrix::new(vec![vec![0.7, 0.25, 0.05], vec![0.05, 0.35, 0.6]])?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let data = truth.simulate(150, 15, &mut rng)?;

    println!("{:>8} {:>12} {:>5} {:>7} {:>12}", "states", "logLik", "df", "n", "BIC");
    let mut best: Option<(usize, f64)> = None;
    for n_states in 1..=3 {
        let start = randomize_like_hmm(&uniform_hmm(data.alphabet(), n_states)?, 1)?;
        let report = fit_hmm_with_restarts(
            &start,
            &data,
            &EmControl::default(),
            &RestartControl::with_seed(8, 4),
        )?;
        let score = bic_hmm(&report.model, &data)?;
        println!(
            "{n_states:>8} {:>12.3} {:>5} {:>7} {:>12.3}",
            score.log_likelihood, score.free_parameters, score.n_observations, score.bic
        );
        if best.is_none_or(|(_, bic)| score.bic < bic) {
            best = Some((n_states, score.bic));
        }
    }
    let (n, bic) = best.unwrap();
    println!("\nbest by BIC: {n} hidden states ({bic:.3})");
    Ok(())
}
