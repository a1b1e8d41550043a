//! Score-annotated pairs: turning upvote scores into pseudo-votes with an
//! exponential map before estimating the target.

use vpo::vote_model::{mmse_estimate, scores_to_pseudovotes, EstimatorConfig};

fn main() -> vpo::Result<()> {
    let cfg = EstimatorConfig::default();
    for (s1, s2) in [(8.0, 6.0), (3.0, 3.0), (12.0, 1.0), (-2.0, 0.5)] {
        let votes = scores_to_pseudovotes(s1, s2, 2.0)?;
        let p = mmse_estimate(votes, cfg);
        println!(
            "scores {s1:>5}:{s2:<5} -> pseudo-votes {:>8.2}:{:<8.2} target {:.4}",
            votes.v1(),
            votes.v2(),
            p.value()
        );
    }

    // Large score gaps overflow the exponential and are rejected.
    match scores_to_pseudovotes(2000.0, 0.0, 2.0) {
        Ok(v) => println!("unexpected: {v:?}"),
        Err(e) => println!("2000:0 -> {e}"),
    }
    Ok(())
}
