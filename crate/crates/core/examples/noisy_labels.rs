//! Win rates against the reference when a fifth of the pairs are presented
//! the wrong way round. Votes travel with their responses, so the
//! vote-derived targets stay right while hard labels flip.

use vpo::data::{attach_targets, generate_synthetic, GenConfig};
use vpo::eval::exact_win_rate;
use vpo::losses::{LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::{train, TrainConfig};
use vpo::vote_model::EstimatorConfig;

fn main() -> vpo::Result<()> {
    let kinds = LossKind::ALL;
    print!("{:>4}", "seed");
    for kind in kinds {
        print!("{kind:>8}");
    }
    println!();
    for seed in 0..6 {
        let ds = attach_targets(
            &generate_synthetic(&GenConfig {
                label_noise: 0.2,
                seed,
                ..GenConfig::default()
            })?,
            EstimatorConfig::default(),
        );
        let truth = ds.ground_truth.as_ref().expect("synthetic");
        let (x, k) = ds.shape();
        let reference = TabularPolicy::uniform(x, k, PolicyRole::Reference)?;
        print!("{seed:>4}");
        for kind in kinds {
            let cfg = TrainConfig {
                loss: LossConfig::new(kind, 0.1, 0.2)?,
                epochs: 50,
                shuffle_seed: seed,
                trace_every: usize::MAX,
                ..TrainConfig::default()
            };
            let (pi, _) = train(&ds, &reference, &reference, &cfg)?;
            print!("{:>8.4}", exact_win_rate(&pi, &reference, truth)?.win_rate);
        }
        println!();
    }
    println!("\ncdpo and rdpo use epsilon = 0.2, the true flip rate");
    Ok(())
}
