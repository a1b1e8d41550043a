use approx::assert_relative_eq;
use proptest::prelude::*;

use vpo::vote_model::{
    mmse_estimate, mmse_risk, posterior_mean_numeric, posterior_params, posterior_variance,
    scores_to_pseudovotes, EstimatorConfig, PosteriorQuadrature, VoteCounts,
};

fn est(v1: f64, v2: f64, c: f64) -> f64 {
    mmse_estimate(VoteCounts::new(v1, v2).unwrap(), EstimatorConfig::new(c).unwrap()).value()
}

proptest! {
    #[test]
    fn order_invariance(v1 in 0.0..1e5f64, v2 in 0.0..1e5f64, c in 1e-3..1e4f64) {
        prop_assert!((est(v1, v2, c) + est(v2, v1, c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_each_count(v1 in 0.0..1e4f64, v2 in 0.0..1e4f64, c in 1e-2..1e3f64, dv in 0.0..100.0f64) {
        prop_assert!(est(v1 + dv, v2, c) >= est(v1, v2, c));
        prop_assert!(est(v1, v2 + dv, c) <= est(v1, v2, c));
    }

    #[test]
    fn strong_prior_pulls_to_half(v1 in 0.0..1e3f64, v2 in 0.0..1e3f64) {
        prop_assert!((est(v1, v2, 1e9) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn stays_strictly_inside_unit_interval(v1 in 0.0..1e12f64, v2 in 0.0..1e12f64, c in 1e-6..1e6f64) {
        let p = est(v1, v2, c);
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn shrinks_toward_half(v1 in 0.0..500.0f64, v2 in 0.0..500.0f64, c in 0.01..100.0f64) {
        let raw = if v1 + v2 > 0.0 { v1 / (v1 + v2) } else { 0.5 };
        let p = est(v1, v2, c);
        prop_assert!((p - 0.5).abs() <= (raw - 0.5).abs() + 1e-15);
    }

    #[test]
    fn conjugate_mean_matches_quadrature(v1 in 0u32..400, v2 in 0u32..400, c in 0.3..50.0f64) {
        let votes = VoteCounts::new(v1.into(), v2.into()).unwrap();
        let cfg = EstimatorConfig::new(c).unwrap();
        let numeric = posterior_mean_numeric(votes, cfg, 20_000).unwrap();
        prop_assert!((numeric - mmse_estimate(votes, cfg).value()).abs() < 1e-8);
    }

    #[test]
    fn estimate_beats_any_other_point(v1 in 0u32..200, v2 in 0u32..200, c in 0.3..30.0f64, other in 0.0..=1.0f64) {
        let votes = VoteCounts::new(v1.into(), v2.into()).unwrap();
        let cfg = EstimatorConfig::new(c).unwrap();
        let p = mmse_estimate(votes, cfg).value();
        let at_p = mmse_risk(p, votes, cfg, 2000).unwrap();
        let at_other = mmse_risk(other, votes, cfg, 2000).unwrap();
        prop_assert!(at_p <= at_other + 1e-12);
        // Quadratic risk: the excess is exactly the squared offset.
        prop_assert!((at_other - at_p - (other - p).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn pseudovotes_keep_ratio(s1 in -20.0..20.0f64, s2 in -20.0..20.0f64) {
        let v = scores_to_pseudovotes(s1, s2, 2.0).unwrap();
        prop_assert!((v.v1() / v.v2() - 2f64.powf(s1 - s2)).abs() < 1e-9 * 2f64.powf(s1 - s2));
    }
}

#[test]
fn variance_matches_quadrature() {
    for (v1, v2, c) in [(101.0, 9.0, 1.0), (0.0, 0.0, 0.3), (15.0, 14.0, 10.0)] {
        let votes = VoteCounts::new(v1, v2).unwrap();
        let cfg = EstimatorConfig::new(c).unwrap();
        let q = PosteriorQuadrature::new(votes, cfg, 50_000).unwrap();
        assert_relative_eq!(q.risk(q.mean()), posterior_variance(votes, cfg), max_relative = 1e-7);
    }
}

#[test]
fn posterior_is_prior_plus_votes() {
    let (a, b) = posterior_params(VoteCounts::new(7.0, 2.5).unwrap(), EstimatorConfig::new(4.0).unwrap());
    assert_eq!((a, b), (11.0, 6.5));
}

#[test]
fn quadrature_grid_has_a_floor() {
    let votes = VoteCounts::new(1.0, 1.0).unwrap();
    assert!(posterior_mean_numeric(votes, EstimatorConfig::default(), 999).is_err());
    assert!(mmse_risk(1.5, votes, EstimatorConfig::default(), 1000).is_err());
}

#[test]
fn concentrated_posterior_still_integrates() {
    let votes = VoteCounts::new(1e7, 3.0).unwrap();
    let cfg = EstimatorConfig::default();
    let numeric = posterior_mean_numeric(votes, cfg, 5000).unwrap();
    assert!((numeric - mmse_estimate(votes, cfg).value()).abs() < 1e-12);
}
