//! Click and ranking metrics on hand-made predictions.

use graphcm::eval::*;

fn main() -> graphcm::Result<()> {
    let predictions = [0.9, 0.4, 0.2, 0.7, 0.3, 0.1];
    let clicks = [true, false, false, true, true, false];
    let ranks = [1, 2, 3, 1, 2, 3];

    println!("LL {:.5}", log_likelihood(&predictions, &clicks)?);
    let (by_rank, mean) = perplexity(&predictions, &clicks, &ranks)?;
    for (r, p) in by_rank.iter().enumerate() {
        println!("PPL@{} {:.5}", r + 1, p.unwrap_or(f64::NAN));
    }
    println!("PPL {mean:.5}");

    // the relevant document sits at displayed rank 2 but is scored first
    let scores = [0.2, 0.9, 0.1];
    let grades = [0, 3, 1];
    for k in NDCG_CUTOFFS {
        println!("NDCG@{k} {:.5}", ndcg_at_k(&scores, &grades, k)?.unwrap());
    }
    Ok(())
}
