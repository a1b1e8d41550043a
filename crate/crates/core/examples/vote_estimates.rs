//! Posterior-mean preference targets for a few vote splits, and how the
//! prior strength `c` pulls them toward one half.

use vpo::vote_model::{mmse_estimate, posterior_variance, EstimatorConfig, VoteCounts};

fn main() -> vpo::Result<()> {
    let splits = [(101.0, 9.0), (15.0, 14.0), (14.0, 9.0), (3.0, 0.0), (0.0, 0.0)];

    println!("{:>9} {:>8} {:>10} {:>10}", "votes", "raw", "target", "post. sd");
    let cfg = EstimatorConfig::default();
    for (v1, v2) in splits {
        let votes = VoteCounts::new(v1, v2)?;
        let raw = if v1 + v2 > 0.0 { v1 / (v1 + v2) } else { f64::NAN };
        let p = mmse_estimate(votes, cfg);
        println!(
            "{:>9} {:>8.4} {:>10.6} {:>10.4}",
            format!("{v1}:{v2}"),
            raw,
            p.value(),
            posterior_variance(votes, cfg).sqrt()
        );
    }

    println!("\nprior strength sweep for 15:14 and 101:9");
    for c in [0.3, 1.0, 10.0, 30.0, 100.0] {
        let cfg = EstimatorConfig::new(c)?;
        let a = mmse_estimate(VoteCounts::new(15.0, 14.0)?, cfg).value();
        let b = mmse_estimate(VoteCounts::new(101.0, 9.0)?, cfg).value();
        println!("c = {c:>5}: {a:.4}  {b:.4}");
    }
    Ok(())
}
