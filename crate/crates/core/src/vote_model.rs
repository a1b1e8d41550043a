//! Beta-Binomial machinery for turning vote counts into a target preference.
//!
//! A pair with `v1` votes for the first response and `v2` for the second
//! gets the symmetric prior `Beta(c, c)` and the posterior
//! `Beta(v1 + c, v2 + c)`. The target preference is the posterior mean
//!
//! ```text
//! p = (v1 + c) / (v1 + v2 + 2c)
//! ```
//!
//! which is the minimizer of the posterior expected squared error. The
//! [`PosteriorQuadrature`] type evaluates that expected error numerically so
//! the closed form can be checked against an independent route.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpoError};
use crate::numeric::log_sigmoid;

/// Default base used to turn scalar scores into pseudo-votes.
pub const DEFAULT_SCORE_BASE: f64 = 2.0;

/// Smallest quadrature size accepted by the numerical oracles.
pub const MIN_GRID: usize = 1000;

/// Non-negative (pseudo-)vote counts for the two responses of a pair.
///
/// Counts are real-valued so that exponentiated scores share the estimator
/// with integer vote tallies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteCounts {
    v1: f64,
    v2: f64,
}

impl VoteCounts {
    pub fn new(v1: f64, v2: f64) -> Result<Self> {
        for (name, v) in [("v1", v1), ("v2", v2)] {
            if !v.is_finite() {
                return Err(VpoError::param(name, format!("must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err(VpoError::param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(Self { v1, v2 })
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    /// The same votes with the responses exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            v1: self.v2,
            v2: self.v1,
        }
    }
}

/// Strength `c` of the symmetric `Beta(c, c)` prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    c: f64,
}

impl EstimatorConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(VpoError::param("c", format!("must be finite and > 0, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

/// Probability that the first response of a pair is preferred, strictly
/// inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TargetPreference(f64);

impl TargetPreference {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(VpoError::param("target", format!("must lie in (0, 1), got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Distance from the uninformative value 0.5.
    pub fn gap(self) -> f64 {
        (self.0 - 0.5).abs()
    }
}

impl TryFrom<f64> for TargetPreference {
    type Error = VpoError;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<TargetPreference> for f64 {
    fn from(p: TargetPreference) -> f64 {
        p.0
    }
}

/// Posterior `Beta(alpha, beta)` parameters after observing `votes`.
pub fn posterior_params(votes: VoteCounts, cfg: EstimatorConfig) -> (f64, f64) {
    (votes.v1 + cfg.c, votes.v2 + cfg.c)
}

/// Posterior-mean (minimum mean squared error) estimate of the preference
/// probability.
pub fn mmse_estimate(votes: VoteCounts, cfg: EstimatorConfig) -> TargetPreference {
    let (a, b) = posterior_params(votes, cfg);
    let p = a / (a + b);
    // With astronomically large pseudo-counts the quotient can round onto
    // an endpoint; keep the nearest interior value instead.
    let p = if p >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else if p <= 0.0 {
        f64::MIN_POSITIVE
    } else {
        p
    };
    TargetPreference(p)
}

/// Closed-form posterior variance `ab / ((a+b)^2 (a+b+1))`.
pub fn posterior_variance(votes: VoteCounts, cfg: EstimatorConfig) -> f64 {
    let (a, b) = posterior_params(votes, cfg);
    let s = a + b;
    a * b / (s * s * (s + 1.0))
}

/// Maps two scalar scores to pseudo-votes `(base^s1, base^s2)`.
pub fn scores_to_pseudovotes(s1: f64, s2: f64, base: f64) -> Result<VoteCounts> {
    if !(base.is_finite() && base > 1.0) {
        return Err(VpoError::param("base", format!("must be finite and > 1, got {base}")));
    }
    let mut out = [0.0; 2];
    for (slot, s) in out.iter_mut().zip([s1, s2]) {
        if !s.is_finite() {
            return Err(VpoError::param("score", format!("must be finite, got {s}")));
        }
        let v = base.powf(s);
        if !v.is_finite() {
            return Err(VpoError::Range(format!(
                "{base}^{s} overflows the representable range"
            )));
        }
        *slot = v;
    }
    VoteCounts::new(out[0], out[1])
}

/// Midpoint-rule discretization of the posterior `Beta(a, b)`.
///
/// The rule is applied on the logit scale `theta = sigmoid(z)`, where the
/// density `theta^a (1-theta)^b` is smooth and decays exponentially in both
/// directions, so endpoint singularities (`a < 1` or `b < 1`) and sharply
/// concentrated posteriors are both handled. The integration window is
/// widened until the truncated tails carry less than `e^-60` relative mass.
#[derive(Debug, Clone)]
pub struct PosteriorQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PosteriorQuadrature {
    pub fn new(votes: VoteCounts, cfg: EstimatorConfig, grid_n: usize) -> Result<Self> {
        if grid_n < MIN_GRID {
            return Err(VpoError::param(
                "grid_n",
                format!("must be >= {MIN_GRID}, got {grid_n}"),
            ));
        }
        let (a, b) = posterior_params(votes, cfg);
        let log_density = |z: f64| a * log_sigmoid(z) + b * log_sigmoid(-z);
        let mode = (a / b).ln();
        let peak = log_density(mode);
        let reach = |dir: f64| {
            let mut d = 1.0;
            while peak - log_density(mode + dir * d) < 60.0 {
                d *= 2.0;
            }
            mode + dir * d
        };
        let (lo, hi) = (reach(-1.0), reach(1.0));
        let h = (hi - lo) / grid_n as f64;

        let mut nodes = Vec::with_capacity(grid_n);
        let mut weights = Vec::with_capacity(grid_n);
        for i in 0..grid_n {
            let z = lo + (i as f64 + 0.5) * h;
            nodes.push(crate::numeric::sigmoid(z));
            weights.push((log_density(z) - peak).exp());
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    pub fn mean(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }

    /// Posterior expected squared error of the point estimate `theta_hat`.
    pub fn risk(&self, theta_hat: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| {
                let e = theta_hat - t;
                w * e * e
            })
            .sum()
    }
}

/// Numerical posterior mean; an oracle for [`mmse_estimate`].
pub fn posterior_mean_numeric(
    votes: VoteCounts,
    cfg: EstimatorConfig,
    grid_n: usize,
) -> Result<f64> {
    Ok(PosteriorQuadrature::new(votes, cfg, grid_n)?.mean())
}

/// Numerical value of `∫ (theta_hat - θ)² p(θ | v1, v2) dθ`.
pub fn mmse_risk(
    theta_hat: f64,
    votes: VoteCounts,
    cfg: EstimatorConfig,
    grid_n: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta_hat) {
        return Err(VpoError::param(
            "theta_hat",
            format!("must lie in [0, 1], got {theta_hat}"),
        ));
    }
    Ok(PosteriorQuadrature::new(votes, cfg, grid_n)?.risk(theta_hat))
}
