//! Analytic logit gradients against central differences for every loss.
//!
//! cargo run --example gradient_check -- 200

use vpo::data::VotedPair;
use vpo::losses::{finite_diff_grad, gradcheck, loss_grad_logits, LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::vote_model::{TargetPreference, VoteCounts};

fn main() -> vpo::Result<()> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);

    let report = gradcheck(trials, 3, 1e-5)?;
    for (kind, err) in &report.per_kind_worst {
        println!("{kind:<5} worst relative error {err:.2e}");
    }
    println!(
        "overall worst {:.2e} ({} trial {}), passes 1e-6: {}",
        report.worst_rel_error,
        report.worst_kind,
        report.worst_trial,
        report.passed(1e-6)
    );

    // One case in full: only the two logits of the pair move.
    let pi = TabularPolicy::from_rows(&[vec![0.2, -1.0, 0.7]], PolicyRole::Trained)?;
    let reference = TabularPolicy::uniform(1, 3, PolicyRole::Reference)?;
    let pair = VotedPair::new(0, 2, 0, VoteCounts::new(30.0, 10.0)?)?
        .with_target(TargetPreference::new(0.74)?);
    let cfg = LossConfig::new(LossKind::Vipo, 0.1, 0.0)?;
    println!("\nvipo analytic {:?}", loss_grad_logits(&pi, &reference, &pair, &cfg)?);
    println!("vipo numeric  {:?}", finite_diff_grad(&pi, &reference, &pair, &cfg, 1e-5)?);
    Ok(())
}
