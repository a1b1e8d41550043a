//! Sweep of the prior strength c. Small c trusts raw vote ratios, large c
//! flattens every target toward 1/2 and the policy stops moving.

use vpo::data::{generate_synthetic, GenConfig, VoteTotalLaw};
use vpo::eval::ablate_c;
use vpo::losses::{LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::TrainConfig;

fn main() -> vpo::Result<()> {
    let ds = generate_synthetic(&GenConfig {
        vote_total: VoteTotalLaw::Uniform { low: 2, high: 60 },
        label_noise: 0.2,
        seed: 3,
        ..GenConfig::default()
    })?;
    let (x, k) = ds.shape();
    let reference = TabularPolicy::uniform(x, k, PolicyRole::Reference)?;
    let c_values = [0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1e4];
    for kind in [LossKind::Vdpo, LossKind::Vipo] {
        let cfg = TrainConfig {
            loss: LossConfig::new(kind, 0.1, 0.0)?,
            epochs: 50,
            trace_every: usize::MAX,
            ..TrainConfig::default()
        };
        println!("{kind}");
        for row in ablate_c(&ds, &reference, &reference, &cfg, &c_values)? {
            println!("  c = {:>7}: win rate {:.4}", row.c, row.win_rate);
        }
    }
    Ok(())
}
