//! Stochastic process mining on an event panel: estimate transition rates,
//! threshold them into a process map, compare two groups, and emit DOT text
//! for an external layout engine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqmarkov::markov::{estimate_mm, MarkovModel, ProbabilityVector, TransitionMatrix};
use seqmarkov::procmine::{build_process_graph, diff_graph, group_models, seqtrate};
use seqmarkov::seqdata::{Alphabet, SequenceSet};

fn main() -> seqmarkov::Result<()> {
    let alphabet = Alphabet::with_colors(
        vec!["Course_view", "Practicals", "Social", "Assignment"],
        vec!["#8dd3c7".into(), "#ffffb3".into(), "#bebada".into(), "#fb8072".into()],
    )?;

    // Two behavioural groups with different transition habits.
    let labels = alphabet.symbols().to_vec();
    let focused = MarkovModel::new(
        alphabet.clone(),
        ProbabilityVector::new(vec![0.5, 0.3, 0.05, 0.15], labels.clone())?,
        TransitionMatrix::new(
            vec![
                vec![0.40, 0.35, 0.05, 0.20],
                vec![0.15, 0.70, 0.02, 0.13],
                vec![0.50, 0.20, 0.25, 0.05],
                vec![0.10, 0.15, 0.03, 0.72],
            ],
            labels.clone(),
        )?,
    )?;
    let social = MarkovModel::new(
        alphabet.clone(),
        ProbabilityVector::new(vec![0.45, 0.15, 0.25, 0.15], labels.clone())?,
        TransitionMatrix::new(
            vec![
                vec![0.45, 0.15, 0.25, 0.15],
                vec![0.25, 0.45, 0.20, 0.10],
                vec![0.20, 0.10, 0.60, 0.10],
                vec![0.15, 0.10, 0.20, 0.55],
            ],
            labels,
        )?,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for _ in 0..60 {
        rows.push(focused.simulate(1, 30, &mut rng)?.row(0).to_vec());
        groups.push("high".to_string());
    }
    for _ in 0..60 {
        rows.push(social.simulate(1, 30, &mut rng)?.row(0).to_vec());
        groups.push("low".to_string());
    }
    let data = SequenceSet::from_rows(alphabet, rows)?;

    // Whole-panel transition rates plus the initial distribution as node
    // annotations; hide edges under 0.05 and fade edges under 0.15.
    let transitions = seqtrate(&data)?;
    let overall = estimate_mm(&data)?.model;
    let graph = build_process_graph(
        &transitions,
        &overall.initial,
        0.15,
        0.05,
        data.alphabet().colors(),
    )?;
    println!("{}", graph.to_dot("overall"));
    println!(
        "{} of {} possible edges survive the 0.05 floor; {} are faded",
        graph.edges.len(),
        transitions.n_states() * transitions.n_states(),
        graph.edges.iter().filter(|e| e.faded).count()
    );

    // Per-group models and the signed difference map (low minus high).
    let by_group = group_models(&data, &groups)?;
    let diff = diff_graph(
        &by_group["high"].model.transitions,
        &by_group["low"].model.transitions,
        0.05,
    )?;
    println!("\n{}", diff.to_dot("low_minus_high"));
    for edge in &diff.edges {
        println!("{:>12} -> {:<12} {:+.3} ({:?})", edge.from, edge.to, edge.weight, edge.sign);
    }
    Ok(())
}
