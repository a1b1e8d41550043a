//! After VDPO training, clear-cut pairs (target far from 1/2) end up with
//! larger margins than controversial ones. DPO is listed for comparison.

use vpo::data::{attach_targets, generate_synthetic, GenConfig};
use vpo::eval::{margin_by_gap, LARGE_GAP_THRESHOLD};
use vpo::losses::{LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::{train, TrainConfig};
use vpo::vote_model::EstimatorConfig;

fn main() -> vpo::Result<()> {
    println!("large gap means |p - 1/2| >= {LARGE_GAP_THRESHOLD}\n");
    println!("{:>4} {:<5} {:>10} {:>10} {:>7}", "seed", "loss", "small", "large", "counts");
    for seed in 0..5 {
        let ds = attach_targets(
            &generate_synthetic(&GenConfig {
                seed,
                ..GenConfig::default()
            })?,
            EstimatorConfig::default(),
        );
        let (x, k) = ds.shape();
        let reference = TabularPolicy::uniform(x, k, PolicyRole::Reference)?;
        for kind in [LossKind::Vdpo, LossKind::Dpo] {
            let cfg = TrainConfig {
                loss: LossConfig::new(kind, 0.1, 0.0)?,
                epochs: 50,
                shuffle_seed: seed,
                trace_every: usize::MAX,
                ..TrainConfig::default()
            };
            let (pi, _) = train(&ds, &reference, &reference, &cfg)?;
            let g = margin_by_gap(&pi, &reference, &ds, 0.1)?;
            println!(
                "{seed:>4} {kind:<5} {:>10.4} {:>10.4} {:>3}/{:<3}",
                g.small_gap.unwrap_or(f64::NAN),
                g.large_gap.unwrap_or(f64::NAN),
                g.small_count,
                g.large_count
            );
        }
    }
    Ok(())
}
