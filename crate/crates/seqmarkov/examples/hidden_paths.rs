//! Viterbi decoding with both kinds of missing values: unknown cells carry
//! no emission information, padding ends a sequence early. The decoded path
//! covers every non-padding position.

use seqmarkov::hmm::{viterbi, EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::seqdata::{Alphabet, SequenceSet};

fn main() -> seqmarkov::Result<()> {
    let states = vec!["Low ability".to_string(), "High ability".to_string()];
    let model = HiddenMarkovModel::new(
        Alphabet::new(vec!["low", "high"])?,
        states.clone(),
        ProbabilityVector::new(vec![0.6, 0.4], states.clone())?,
        TransitionMatrix::new(vec![vec![0.8, 0.2], vec![0.15, 0.85]], states)?,
        EmissionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]])?,
    )?;

    // "·" marks an unknown test score, "%" pads a short sequence.
    let data = SequenceSet::from_labeled_rows(
        model.alphabet.clone(),
        vec!["s1".into(), "s2".into(), "s3".into()],
        &[
            ["low", "low", "·", "high", "high", "high"].map(String::from).to_vec(),
            ["high", "high", "low", "·", "·", "low"].map(String::from).to_vec(),
            ["low", "high", "low", "%", "%", "%"].map(String::from).to_vec(),
        ],
    )?;

    for (id, path) in data.ids().iter().zip(viterbi(&model, &data)?) {
        let labels: Vec<&str> =
            path.states.iter().map(|&s| model.state_labels[s].as_str()).collect();
        println!("{id}: log p = {:>8.4}  path = {}", path.log_probability, labels.join(" -> "));
    }
    Ok(())
}
