//! Closed-form first-order Markov model on a small achievement panel:
//! estimate initial and transition probabilities, print them, and score the
//! data.

use seqmarkov::markov::{estimate_mm, mm_log_likelihood};
use seqmarkov::seqdata::{Alphabet, Cell, SequenceSet};

fn main() -> seqmarkov::Result<()> {
    // Four students, ten years, low/high achievement.
    let alphabet = Alphabet::new(vec!["L", "H"])?;
    let rows = ["LLLHLHLHHH", "LHHLHLHLLH", "HHLHLLHLHH", "HHLLLHLLLH"]
        .iter()
        .map(|r| {
            r.chars()
                .map(|c| Cell::Symbol(if c == 'L' { 0 } else { 1 }))
                .collect()
        })
        .collect();
    let ids = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let data = SequenceSet::new(alphabet, ids, rows)?;

    let fit = estimate_mm(&data)?;
    print!("{}", fit.model);
    println!();
    println!("log-likelihood: {:.4}", mm_log_likelihood(&fit.model, &data)?);
    println!("sequence lengths: {:?}", data.sequence_lengths());
    Ok(())
}
