use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vpo::data::{
    attach_targets, force_targets, generate_synthetic, Dataset, GenConfig, Provenance, VotedPair,
};
use vpo::eval::{
    ablate_c, classify_margin_series, exact_win_rate, margin_by_gap, sampled_win_rate,
    DivergenceThresholds, Verdict,
};
use vpo::losses::{stationary_margin, LossConfig, LossKind};
use vpo::policy::{PolicyRole, TabularPolicy};
use vpo::trainer::{train, OptimizerKind, TrainConfig};
use vpo::vote_model::{EstimatorConfig, TargetPreference, VoteCounts};
use vpo::VpoError;

fn mixed(seed: u64, noise: f64) -> Dataset {
    let ds = generate_synthetic(&GenConfig {
        label_noise: noise,
        seed,
        ..GenConfig::default()
    })
    .unwrap();
    attach_targets(&ds, EstimatorConfig::default())
}

fn rms(kind: LossKind, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        loss: LossConfig::new(kind, 0.1, 0.0).unwrap(),
        epochs,
        shuffle_seed: seed,
        trace_every: 10,
        ..TrainConfig::default()
    }
}

fn uniform(ds: &Dataset) -> TabularPolicy {
    let (x, k) = ds.shape();
    TabularPolicy::uniform(x, k, PolicyRole::Reference).unwrap()
}

fn one_pair(p: f64) -> Dataset {
    let ds = Dataset {
        pairs: vec![VotedPair::new(0, 0, 1, VoteCounts::new(91.0, 9.0).unwrap()).unwrap()],
        provenance: Provenance::IngestedVotes,
        ground_truth: None,
    };
    force_targets(&ds, TargetPreference::new(p).unwrap())
}

#[test]
fn training_is_deterministic() {
    let ds = mixed(4, 0.1);
    let r = uniform(&ds);
    let cfg = rms(LossKind::Vdpo, 3, 8);
    let (a, ta) = train(&ds, &r, &r, &cfg).unwrap();
    let (b, tb) = train(&ds, &r, &r, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    ta.write_csv(&mut csv_a).unwrap();
    tb.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);

    let (c, _) = train(&ds, &r, &r, &rms(LossKind::Vdpo, 3, 9)).unwrap();
    assert_ne!(a, c, "shuffle seed should matter");
}

#[test]
fn descent_on_convex_losses() {
    for kind in [LossKind::Vdpo, LossKind::Ipo, LossKind::Vipo] {
        let ds = one_pair(0.8);
        let r = TabularPolicy::uniform(1, 2, PolicyRole::Reference).unwrap();
        let cfg = TrainConfig {
            steps: Some(100),
            batch_size: 1,
            learning_rate: 0.05,
            ..TrainConfig::sgd(LossConfig::new(kind, 0.1, 0.0).unwrap())
        };
        let (_, report) = train(&ds, &r, &r, &cfg).unwrap();
        let losses = report.loss_series();
        assert_eq!(losses.len(), 101);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{kind}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn vote_aware_losses_keep_smaller_margins() {
    for seed in 0..3 {
        let ds = mixed(seed, 0.0);
        let r = uniform(&ds);
        let end = |kind| {
            let (_, t) = train(&ds, &r, &r, &rms(kind, 40, seed)).unwrap();
            t.last().unwrap().margin_all
        };
        assert!(end(LossKind::Vdpo) < end(LossKind::Dpo), "seed {seed}");
        assert!(end(LossKind::Vipo) <= end(LossKind::Ipo), "seed {seed}");
    }
}

#[test]
fn logits_of_unseen_candidates_stay_put() {
    let pairs = vec![
        VotedPair::new(0, 0, 1, VoteCounts::new(5.0, 1.0).unwrap()).unwrap(),
        VotedPair::new(0, 2, 0, VoteCounts::new(2.0, 9.0).unwrap()).unwrap(),
        VotedPair::new(1, 1, 2, VoteCounts::new(4.0, 4.0).unwrap()).unwrap(),
    ];
    let ds = attach_targets(
        &Dataset {
            pairs,
            provenance: Provenance::IngestedVotes,
            ground_truth: None,
        },
        EstimatorConfig::default(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let init = TabularPolicy::random(3, 4, 1.0, PolicyRole::Trained, &mut rng).unwrap();
    let r = TabularPolicy::uniform(3, 4, PolicyRole::Reference).unwrap();
    for kind in LossKind::ALL {
        let (pi, _) = train(&ds, &r, &init, &rms(kind, 20, 0)).unwrap();
        for x in 0..3 {
            assert_eq!(pi.logits()[x * 4 + 3], init.logits()[x * 4 + 3], "{kind}");
        }
        assert_eq!(&pi.logits()[8..], &init.logits()[8..], "{kind}: context 2 has no pairs");
        assert_eq!(pi.role(), PolicyRole::Trained);
    }
}

#[test]
fn single_pair_vdpo_settles_on_log_odds() {
    let p = 0.91;
    let cfg = TrainConfig {
        steps: Some(5000),
        batch_size: 1,
        learning_rate: 1.0,
        ..TrainConfig::sgd(LossConfig::new(LossKind::Vdpo, 0.1, 0.0).unwrap())
    };
    let r = TabularPolicy::uniform(1, 2, PolicyRole::Reference).unwrap();
    let (_, report) = train(&one_pair(p), &r, &r, &cfg).unwrap();
    let target = stationary_margin(LossKind::Vdpo, p, &cfg.loss).finite().unwrap();
    assert!((target - 2.313_635).abs() < 1e-6);
    let verdict = classify_margin_series(&report.margin_series(), DivergenceThresholds::for_beta(0.1)).unwrap();
    match verdict.verdict {
        Verdict::Converged { limit } => assert!((limit - target).abs() < 1e-2, "{limit}"),
        other => panic!("expected convergence, got {other:?}"),
    }
}

#[test]
fn single_pair_dpo_keeps_climbing() {
    let cfg = TrainConfig {
        loss: LossConfig::new(LossKind::Dpo, 0.1, 0.0).unwrap(),
        optimizer: OptimizerKind::RmsProp,
        steps: Some(5000),
        batch_size: 1,
        learning_rate: 0.1,
        ..TrainConfig::default()
    };
    let r = TabularPolicy::uniform(1, 2, PolicyRole::Reference).unwrap();
    let (_, report) = train(&one_pair(0.91), &r, &r, &cfg).unwrap();
    let m = report.margin_series();
    assert!(m.windows(2).all(|w| w[1] > w[0]));
    assert!(*m.last().unwrap() > 10.0);
    let th = DivergenceThresholds {
        value_cap: 10.0,
        ..DivergenceThresholds::for_beta(0.1)
    };
    assert_eq!(classify_margin_series(&m, th).unwrap().verdict, Verdict::Diverging);
}

#[test]
fn large_gap_pairs_get_larger_margins() {
    for seed in 0..3 {
        let ds = mixed(seed, 0.0);
        let r = uniform(&ds);
        let (pi, _) = train(&ds, &r, &r, &rms(LossKind::Vdpo, 30, seed)).unwrap();
        let g = margin_by_gap(&pi, &r, &ds, 0.1).unwrap();
        assert!(g.small_count > 0 && g.large_count > 0);
        assert_eq!(g.small_count + g.large_count, ds.len());
        assert!(g.large_gap.unwrap() > g.small_gap.unwrap(), "seed {seed}: {g:?}");
    }
}

#[test]
fn trained_policy_beats_reference() {
    let ds = mixed(6, 0.0);
    let r = uniform(&ds);
    let (pi, _) = train(&ds, &r, &r, &rms(LossKind::Vdpo, 20, 6)).unwrap();
    let truth = ds.ground_truth.as_ref().unwrap();
    let exact = exact_win_rate(&pi, &r, truth).unwrap().win_rate;
    assert!(exact > 0.6, "{exact}");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sampled = sampled_win_rate(&pi, &r, truth, 40_000, &mut rng).unwrap();
    assert!((sampled.win_rate - exact).abs() < 0.01);
    assert_eq!(sampled.num_comparisons, Some(40_000));
}

#[test]
fn c_ablation_table() {
    let ds = mixed(3, 0.2);
    let r = uniform(&ds);
    let cfg = rms(LossKind::Vdpo, 15, 3);
    let cs = [0.3, 1.0, 10.0, 30.0, 100.0];
    let rows = ablate_c(&ds, &r, &r, &cfg, &cs).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().zip(cs).all(|(row, c)| row.c == c));
    assert_eq!(rows, ablate_c(&ds, &r, &r, &cfg, &cs).unwrap());

    let huge = ablate_c(&ds, &r, &r, &cfg, &[1e6]).unwrap()[0].win_rate;
    let (flat, _) = train(&force_targets(&ds, TargetPreference::new(0.5).unwrap()), &r, &r, &cfg).unwrap();
    let flat = exact_win_rate(&flat, &r, ds.ground_truth.as_ref().unwrap()).unwrap().win_rate;
    assert!((huge - flat).abs() < 0.03, "{huge} vs {flat}");
}

#[test]
fn missing_targets_is_a_config_error() {
    let ds = generate_synthetic(&GenConfig::default()).unwrap();
    let r = uniform(&ds);
    for kind in [LossKind::Vdpo, LossKind::Vipo] {
        let err = train(&ds, &r, &r, &rms(kind, 1, 0)).unwrap_err();
        assert!(matches!(err, VpoError::Config(_)));
        assert!(err.to_string().contains("targets"));
    }
    assert!(train(&ds, &r, &r, &rms(LossKind::Dpo, 1, 0)).is_ok());
}

#[test]
fn shape_mismatch_rejected() {
    let ds = mixed(0, 0.0);
    let r = uniform(&ds);
    let narrow = TabularPolicy::uniform(50, 3, PolicyRole::Reference).unwrap();
    assert!(train(&ds, &narrow, &narrow, &rms(LossKind::Dpo, 1, 0)).is_err());
    assert!(train(&ds, &r, &narrow, &rms(LossKind::Dpo, 1, 0)).is_err());
}

#[test]
fn exploding_updates_are_numerical_errors() {
    let cfg = TrainConfig {
        steps: Some(50),
        batch_size: 1,
        learning_rate: 1e307,
        ..TrainConfig::sgd(LossConfig::new(LossKind::Ipo, 0.1, 0.0).unwrap())
    };
    let r = TabularPolicy::uniform(1, 2, PolicyRole::Reference).unwrap();
    let err = train(&one_pair(0.9), &r, &r, &cfg).unwrap_err();
    assert!(matches!(err, VpoError::Numerical { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}
