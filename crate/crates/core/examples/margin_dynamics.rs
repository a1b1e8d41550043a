//! One preference pair trained under each loss. DPO and rDPO keep pushing
//! the margin up; the others settle at their stationary margin.
//!
//! Plain SGD at lr 0.1 moves the margin by only 2·lr·β² times the loss
//! derivative per step, so the runs here use RMSprop, which takes steps of
//! roughly lr regardless of gradient scale.

use vpo::data::{force_targets, Dataset, Provenance, VotedPair};
use vpo::eval::{classify_margin_series, DivergenceThresholds, Verdict};
use vpo::losses::{stationary_margin, LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::{train, OptimizerKind, TrainConfig};
use vpo::vote_model::{TargetPreference, VoteCounts};

fn main() -> vpo::Result<()> {
    let p = 0.91;
    let beta = 0.1;
    let ds = force_targets(
        &Dataset {
            pairs: vec![VotedPair::new(0, 0, 1, VoteCounts::new(91.0, 9.0)?)?],
            provenance: Provenance::IngestedVotes,
            ground_truth: None,
        },
        TargetPreference::new(p)?,
    );
    let reference = TabularPolicy::uniform(1, 2, PolicyRole::Reference)?;
    let thresholds = DivergenceThresholds {
        value_cap: 10.0,
        ..DivergenceThresholds::for_beta(beta)
    };

    println!("{:<6} {:>8} {:>8} {:>8} {:>8}  verdict", "loss", "t=500", "t=2000", "t=10000", "fixed pt");
    for kind in LossKind::ALL {
        let loss = LossConfig::new(kind, beta, 0.1)?;
        let cfg = TrainConfig {
            loss,
            optimizer: OptimizerKind::RmsProp,
            learning_rate: 0.05,
            steps: Some(10_000),
            batch_size: 1,
            ..TrainConfig::default()
        };
        let (_, report) = train(&ds, &reference, &reference, &cfg)?;
        let m = report.margin_series();
        let fixed = stationary_margin(kind, p, &loss)
            .finite()
            .map_or("-".to_string(), |v| format!("{v:.4}"));
        let verdict = match classify_margin_series(&m, thresholds)?.verdict {
            Verdict::Diverging => "diverging".to_string(),
            Verdict::Converged { limit } => format!("converged to {limit:.4}"),
            Verdict::Undetermined => "undetermined".to_string(),
        };
        println!(
            "{:<6} {:>8.3} {:>8.3} {:>8.3} {:>8}  {verdict}",
            kind.to_string(),
            m[500],
            m[2000],
            m[10_000],
            fixed
        );
    }
    Ok(())
}
