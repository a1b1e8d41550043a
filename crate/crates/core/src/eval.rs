//! Win rates against a ground-truth judge, margin diagnostics and the prior
//! strength ablation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{attach_targets, Dataset, GroundTruth};
use crate::error::{Result, VpoError};
use crate::policy::{implicit_reward_margin, ContextId, MarginConfig, TabularPolicy};
use crate::trainer::{train, TrainConfig};
use crate::vote_model::EstimatorConfig;

/// Pairs whose target sits at least this far from 0.5 form the large-gap
/// group.
pub const LARGE_GAP_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WinRateMethod {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRateResult {
    pub win_rate: f64,
    pub method: WinRateMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_comparisons: Option<usize>,
}

fn check_judge(pi: &TabularPolicy, baseline: &TabularPolicy, truth: &GroundTruth) -> Result<()> {
    pi.same_shape(baseline)?;
    if truth.shape() != pi.shape() {
        return Err(VpoError::Shape(format!(
            "ground truth is {:?} but policies are {:?}",
            truth.shape(),
            pi.shape()
        )));
    }
    Ok(())
}

fn sign(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a < b {
        -1.0
    } else {
        0.0
    }
}

/// Probability that a response drawn from `pi` beats one drawn from
/// `baseline` under the ground-truth reward, averaged uniformly over
/// contexts; ties count one half.
///
/// Uses `w = 1/2 + 1/(2|X|) Σ_x Σ_{y<y'} (π_y b_y' - π_y' b_y) sgn(r_y - r_y')`,
/// which makes `w(π, π) = 1/2` exact and `w(π, b) = 1 - w(b, π)` hold to
/// rounding.
pub fn exact_win_rate(
    pi: &TabularPolicy,
    baseline: &TabularPolicy,
    truth: &GroundTruth,
) -> Result<WinRateResult> {
    check_judge(pi, baseline, truth)?;
    let mut advantage = 0.0;
    for x in 0..pi.num_contexts() {
        let x = ContextId(x);
        let (p, b, r) = (pi.probs(x)?, baseline.probs(x)?, truth.row(x));
        for y in 0..p.len() {
            for z in y + 1..p.len() {
                advantage += (p[y] * b[z] - p[z] * b[y]) * sign(r[y], r[z]);
            }
        }
    }
    Ok(WinRateResult {
        win_rate: 0.5 + advantage / (2.0 * pi.num_contexts() as f64),
        method: WinRateMethod::Exact,
        num_comparisons: None,
    })
}

/// Monte-Carlo estimate of [`exact_win_rate`] from `n` sampled duels.
pub fn sampled_win_rate<R: Rng + ?Sized>(
    pi: &TabularPolicy,
    baseline: &TabularPolicy,
    truth: &GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<WinRateResult> {
    check_judge(pi, baseline, truth)?;
    if n == 0 {
        return Err(VpoError::param("n", "must be >= 1"));
    }
    let mut score = 0.0;
    for _ in 0..n {
        let x = ContextId(rng.random_range(0..pi.num_contexts()));
        let y = pi.sample_response(x, rng)?;
        let z = baseline.sample_response(x, rng)?;
        score += 0.5 + 0.5 * sign(truth.reward(x, y), truth.reward(x, z));
    }
    Ok(WinRateResult {
        win_rate: score / n as f64,
        method: WinRateMethod::Sampled,
        num_comparisons: Some(n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Diverging,
    Converged { limit: f64 },
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceVerdict {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Least-squares slope per trace point over the analysis window.
    pub window_slope: f64,
    pub terminal_value: f64,
}

/// Thresholds for [`classify_margin_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceThresholds {
    pub window: usize,
    pub slope_tol: f64,
    pub value_cap: f64,
}

impl DivergenceThresholds {
    /// Window of 100 points, slope tolerance 1e-4 and a cap of ten times the
    /// IPO target margin `1/(2β)`.
    pub fn for_beta(beta: f64) -> Self {
        Self {
            window: 100,
            slope_tol: 1e-4,
            value_cap: 10.0 / (2.0 * beta),
        }
    }
}

/// Classifies the tail of a margin trace.
///
/// Only the last `window` points enter the decision; at least `2 * window`
/// points are required so there is history to discard.
pub fn classify_margin_series(series: &[f64], th: DivergenceThresholds) -> Result<DivergenceVerdict> {
    if th.window < 2 {
        return Err(VpoError::param("window", "must be >= 2"));
    }
    if series.len() < 2 * th.window {
        return Err(VpoError::param(
            "series",
            format!("need at least {} points, got {}", 2 * th.window, series.len()),
        ));
    }
    let tail = &series[series.len() - th.window..];
    let n = tail.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = tail.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in tail.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let terminal = *tail.last().expect("window >= 2");
    let verdict = if slope.abs() <= th.slope_tol {
        Verdict::Converged { limit: y_mean }
    } else if slope > th.slope_tol && terminal > th.value_cap {
        Verdict::Diverging
    } else {
        Verdict::Undetermined
    };
    Ok(DivergenceVerdict {
        verdict,
        window_slope: slope,
        terminal_value: terminal,
    })
}

/// Mean oriented margin of the small-gap and large-gap groups; `None` when a
/// group is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMargins {
    pub small_gap: Option<f64>,
    pub large_gap: Option<f64>,
    pub small_count: usize,
    pub large_count: usize,
}

/// Mean implicit margin per vote-gap group, each pair oriented so that the
/// response with the higher target comes first.
pub fn margin_by_gap(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    ds: &Dataset,
    beta: f64,
) -> Result<GapMargins> {
    let cfg = MarginConfig::new(beta)?;
    let (mut small, mut large) = ((0.0, 0usize), (0.0, 0usize));
    for (i, pair) in ds.pairs.iter().enumerate() {
        let target = pair
            .target
            .ok_or_else(|| VpoError::Config(format!("pair {i} has no target; run targets first")))?;
        let o = pair.oriented();
        let m = implicit_reward_margin(pi, reference, o.context, o.y1, o.y2, cfg)?;
        let group = if target.gap() >= LARGE_GAP_THRESHOLD {
            &mut large
        } else {
            &mut small
        };
        group.0 += m;
        group.1 += 1;
    }
    let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    Ok(GapMargins {
        small_gap: mean(small),
        large_gap: mean(large),
        small_count: small.1,
        large_count: large.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub c: f64,
    pub win_rate: f64,
}

/// Re-attaches targets with each prior strength `c`, retrains from `init`
/// with the same seeds and reports the exact win rate against `reference`.
pub fn ablate_c(
    ds: &Dataset,
    reference: &TabularPolicy,
    init: &TabularPolicy,
    base_cfg: &TrainConfig,
    c_values: &[f64],
) -> Result<Vec<AblationRow>> {
    let truth = ds
        .ground_truth
        .as_ref()
        .ok_or_else(|| VpoError::Config("c ablation needs a dataset with ground truth".into()))?;
    c_values
        .par_iter()
        .map(|&c| {
            let estimator = EstimatorConfig::new(c)?;
            let cfg = TrainConfig {
                estimator,
                ..base_cfg.clone()
            };
            let (pi, _) = train(&attach_targets(ds, estimator), reference, init, &cfg)?;
            Ok(AblationRow {
                c,
                win_rate: exact_win_rate(&pi, reference, truth)?.win_rate,
            })
        })
        .collect()
}
