//! End to end in memory: generate voted pairs, attach targets, train with
//! VDPO and judge the result against the hidden rewards.

use vpo::data::{attach_targets, generate_synthetic, GenConfig};
use vpo::eval::exact_win_rate;
use vpo::losses::{LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::{train, TrainConfig};
use vpo::vote_model::EstimatorConfig;

fn main() -> vpo::Result<()> {
    env_logger::init();
    let gen = GenConfig {
        seed: 7,
        ..GenConfig::default()
    };
    let ds = attach_targets(&generate_synthetic(&gen)?, EstimatorConfig::default());
    let (x, k) = ds.shape();
    println!("{} pairs over {x} contexts x {k} candidates", ds.len());

    let reference = TabularPolicy::uniform(x, k, PolicyRole::Reference)?;
    let cfg = TrainConfig {
        loss: LossConfig::new(LossKind::Vdpo, 0.1, 0.0)?,
        epochs: 30,
        trace_every: 96,
        shuffle_seed: 7,
        ..TrainConfig::default()
    };
    let (pi, report) = train(&ds, &reference, &reference, &cfg)?;

    println!("{:>6} {:>9} {:>9} {:>9}", "step", "loss", "margin", "|grad|");
    for r in &report.steps {
        println!("{:>6} {:>9.5} {:>9.4} {:>9.2e}", r.step, r.loss, r.margin_all, r.grad_norm);
    }
    let truth = ds.ground_truth.as_ref().expect("synthetic data keeps its rewards");
    println!(
        "win rate vs reference: {:.4}",
        exact_win_rate(&pi, &reference, truth)?.win_rate
    );
    Ok(())
}
