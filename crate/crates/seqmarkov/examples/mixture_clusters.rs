//! Cluster sequences with a mixture Markov model whose cluster memberships
//! depend on a categorical covariate, then print the full summary: covariate
//! effects with standard errors, prior means, most-probable clusters, and
//! the classification table.

use rand::prelude::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::estimation::{fit_mixture_with_restarts, randomize_like_mixture, RestartControl};
use seqmarkov::hmm::EmControl;
use seqmarkov::markov::{MarkovModel, ProbabilityVector, TransitionMatrix};
use seqmarkov::mixture::{
    summarize, ClusterModel, CoefficientMatrix, DesignSpec, MixtureModel,
};
use seqmarkov::seqdata::{Alphabet, CovariateFrame, Factor};

fn mm(pi: [f64; 2], a: [[f64; 2]; 2]) -> seqmarkov::Result<ClusterModel> {
    let labels: Vec<String> = vec!["L".into(), "H".into()];
    Ok(ClusterModel::Markov(MarkovModel::new(
        Alphabet::new(vec!["L", "H"])?,
        ProbabilityVector::new(pi.to_vec(), labels.clone())?,
        TransitionMatrix::new(a.iter().map(|r| r.to_vec()).collect(), labels)?,
    )?))
}

fn main() -> seqmarkov::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Simulated students: GPA level drives which trajectory cluster each
    // student's sequences come from.
    let gpa_levels: Vec<String> = vec!["Low".into(), "Middle".into(), "High".into()];
    let raw: Vec<String> =
        (0..150).map(|_| gpa_levels.choose(&mut rng).unwrap().clone()).collect();
    let cov = CovariateFrame::new(
        (1..=150).map(|i| i.to_string()).collect(),
        vec![Factor::from_values("GPA", gpa_levels, &raw)?],
    )?;
    let design = DesignSpec::without_intercept(vec!["GPA".into()]);

    let truth = MixtureModel::new(
        vec![
            mm([0.9, 0.1], [[0.85, 0.15], [0.25, 0.75]])?,
            mm([0.1, 0.9], [[0.3, 0.7], [0.55, 0.45]])?,
        ],
        vec!["Steady low".into(), "High mover".into()],
        CoefficientMatrix::new(
            vec![vec![0.0, -1.3], vec![0.0, 0.2], vec![0.0, 1.4]],
            vec!["GPALow".into(), "GPAMiddle".into(), "GPAHigh".into()],
            vec!["Steady low".into(), "High mover".into()],
        )?,
        design,
    )?;
    let (data, _) = truth.simulate(&cov, 16, &mut rng)?;

    let start = randomize_like_mixture(&truth, 11)?;
    let report = fit_mixture_with_restarts(
        &start,
        &cov,
        &data,
        &EmControl::default(),
        &RestartControl::with_seed(15, 3),
    )?;

    let summary = summarize(&report.model, &cov, &data)?;
    print!("{summary}");
    Ok(())
}
