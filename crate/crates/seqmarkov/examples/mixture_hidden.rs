//! Mixture hidden Markov model: two clusters of two hidden states each,
//! with a structural zero forcing every sequence to start in its cluster's
//! first hidden state. The zero survives estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::estimation::{fit_mixture_with_restarts, randomize_like_mixture, RestartControl};
use seqmarkov::hmm::{EmControl, EmissionMatrix, HiddenMarkovModel};
use seqmarkov::markov::{ProbabilityVector, TransitionMatrix};
use seqmarkov::mixture::{joint_block_model, ClusterModel, DesignSpec, MixtureModel};
use seqmarkov::seqdata::{Alphabet, CovariateFrame};

fn hidden_cluster(
    trans: [[f64; 2]; 2],
    emis: [[f64; 2]; 2],
) -> seqmarkov::Result<ClusterModel> {
    let states = vec!["State 1".to_string(), "State 2".to_string()];
    Ok(ClusterModel::Hidden(HiddenMarkovModel::new(
        Alphabet::new(vec!["Low scores", "High scores"])?,
        states.clone(),
        // Everyone starts in the first hidden state: a structural zero.
        ProbabilityVector::new(vec![1.0, 0.0], states.clone())?,
        TransitionMatrix::new(trans.iter().map(|r| r.to_vec()).collect(), states)?,
        EmissionMatrix::new(emis.iter().map(|r| r.to_vec()).collect())?,
    )?))
}

fn main() -> seqmarkov::Result<()> {
    let cov = CovariateFrame::ids_only((1..=120).map(|i| i.to_string()).collect());
    let truth = MixtureModel::with_zero_coefficients(
        vec![
            // Stayers: nearly absorbing states, crisp emissions.
            hidden_cluster([[0.95, 0.05], [0.02, 0.98]], [[0.9, 0.1], [0.1, 0.9]])?,
            // Movers: frequent switching, noisier emissions.
            hidden_cluster([[0.6, 0.4], [0.35, 0.65]], [[0.7, 0.3], [0.2, 0.8]])?,
        ],
        vec!["Stayers".into(), "Movers".into()],
        DesignSpec::intercept_only(),
        &cov,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (data, _) = truth.simulate(&cov, 24, &mut rng)?;

    let start = randomize_like_mixture(&truth, 17)?;
    let report = fit_mixture_with_restarts(
        &start,
        &cov,
        &data,
        &EmControl::default(),
        &RestartControl::with_seed(12, 9),
    )?;

    print!("{}", report.model);
    println!("logLik: {:.3}", report.log_likelihood);

    for (label, cluster) in report.model.cluster_labels.iter().zip(&report.model.clusters) {
        if let ClusterModel::Hidden(h) = cluster {
            println!(
                "{label}: initial = ({:.3}, {:.3})  <- second entry is a preserved structural zero",
                h.initial.get(0),
                h.initial.get(1)
            );
        }
    }

    // The joint block view shows the mixture as one HMM per subject.
    let block = joint_block_model(&report.model)?;
    let joint = block.subject_hmm(&[0.5, 0.5])?;
    println!("block states: {:?}", joint.state_labels);
    Ok(())
}
