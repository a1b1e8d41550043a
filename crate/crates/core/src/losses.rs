//! Preference losses as functions of the reward margin `Δ`.
//!
//! Every loss is a scalar function of `Δ = r(x, y1) - r(x, y2)` (and, for the
//! vote-based variants, of the target preference `p`). Each evaluation
//! returns the value together with `dL/dΔ`; the gradient in policy logits
//! follows by the chain rule through [`implicit_reward_margin`], which only
//! depends on `logit[x][y1] - logit[x][y2]`.
//!
//! | kind | value | stationary margin |
//! |------|-------|-------------------|
//! | DPO  | `-log σ(Δ)` | unbounded |
//! | cDPO | `(1-ε)(-log σ(Δ)) + ε(-log σ(-Δ))` | `ln((1-ε)/ε)` |
//! | rDPO | `[(1-ε)(-log σ(Δ)) - ε(-log σ(-Δ))] / (1-2ε)` | unbounded |
//! | IPO  | `(Δ - 1/(2β))²` | `1/(2β)` |
//! | VDPO | `-p log σ(Δ) - (1-p) log σ(-Δ)` | `ln(p/(1-p))` |
//! | VIPO | `(Δ - (2p-1)/(2β))²` | `(2p-1)/(2β)` |

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::VotedPair;
use crate::error::{Result, VpoError};
use crate::numeric::{logit, sigmoid, softplus};
use crate::policy::{implicit_reward_margin, MarginConfig, PolicyRole, TabularPolicy};
use crate::vote_model::TargetPreference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dpo,
    Cdpo,
    Rdpo,
    Ipo,
    Vdpo,
    Vipo,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Dpo,
        LossKind::Cdpo,
        LossKind::Rdpo,
        LossKind::Ipo,
        LossKind::Vdpo,
        LossKind::Vipo,
    ];

    /// Whether the loss reads the per-pair target preference.
    pub fn needs_target(self) -> bool {
        matches!(self, LossKind::Vdpo | LossKind::Vipo)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            LossKind::Dpo => "dpo",
            LossKind::Cdpo => "cdpo",
            LossKind::Rdpo => "rdpo",
            LossKind::Ipo => "ipo",
            LossKind::Vdpo => "vdpo",
            LossKind::Vipo => "vipo",
        })
    }
}

impl FromStr for LossKind {
    type Err = VpoError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| VpoError::param("loss", format!("unknown loss `{s}`")))
    }
}

/// Loss kind plus its scalar parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    kind: LossKind,
    beta: f64,
    epsilon: f64,
}

impl LossConfig {
    pub fn new(kind: LossKind, beta: f64, epsilon: f64) -> Result<Self> {
        MarginConfig::new(beta)?;
        if !(0.0..0.5).contains(&epsilon) {
            return Err(VpoError::param(
                "epsilon",
                format!("must lie in [0, 0.5), got {epsilon}"),
            ));
        }
        Ok(Self {
            kind,
            beta,
            epsilon,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn margin(&self) -> MarginConfig {
        MarginConfig::new(self.beta).expect("beta validated at construction")
    }

    pub fn with_kind(mut self, kind: LossKind) -> Self {
        self.kind = kind;
        self
    }

    /// Evaluates the configured loss at margin `delta`.
    ///
    /// `p` is required for the vote-based kinds and ignored otherwise.
    pub fn eval(&self, delta: f64, p: Option<f64>) -> Result<LossEval> {
        let target = || {
            p.ok_or_else(|| {
                VpoError::Config(format!("{} needs a target preference; run targets first", self.kind))
            })
        };
        Ok(match self.kind {
            LossKind::Dpo => dpo_loss(delta),
            LossKind::Cdpo => cdpo_loss(delta, self),
            LossKind::Rdpo => rdpo_loss(delta, self),
            LossKind::Ipo => ipo_loss(delta, self),
            LossKind::Vdpo => vdpo_loss(delta, target()?),
            LossKind::Vipo => vipo_loss(delta, target()?, self),
        })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Vdpo,
            beta: 0.1,
            epsilon: 0.0,
        }
    }
}

/// Loss value and its derivative with respect to the margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub d_margin: f64,
}

/// Soft-target cross-entropy `-[p log σ(Δ) + (1-p) log σ(-Δ)]`.
///
/// Applied to an explicit reward difference this is the Bradley-Terry
/// reward-model objective with a generalized target; applied to the
/// implicit margin it is the VDPO objective. `p` may be 0 or 1.
pub fn preference_nll(delta: f64, p: f64) -> LossEval {
    LossEval {
        value: p * softplus(-delta) + (1.0 - p) * softplus(delta),
        d_margin: (1.0 - p) * sigmoid(delta) - p * sigmoid(-delta),
    }
}

/// Bradley-Terry probability that the response with reward `r1` wins.
pub fn bradley_terry(r1: f64, r2: f64) -> f64 {
    sigmoid(r1 - r2)
}

/// Cross-entropy of an explicit reward model against target `p`.
pub fn reward_cross_entropy(r1: f64, r2: f64, p: f64) -> LossEval {
    preference_nll(r1 - r2, p)
}

pub fn dpo_loss(delta: f64) -> LossEval {
    LossEval {
        value: softplus(-delta),
        d_margin: -sigmoid(-delta),
    }
}

/// Label-smoothed DPO with constant smoothing `ε`.
pub fn cdpo_loss(delta: f64, cfg: &LossConfig) -> LossEval {
    preference_nll(delta, 1.0 - cfg.epsilon)
}

/// Noise-debiased DPO: `[(1-ε)L(Δ) - εL(-Δ)] / (1-2ε)`.
///
/// The derivative simplifies to `σ(Δ) - (1-ε)/(1-2ε)`, which is strictly
/// negative for every `ε < 0.5`, so the loss has no finite minimizer.
pub fn rdpo_loss(delta: f64, cfg: &LossConfig) -> LossEval {
    let eps = cfg.epsilon;
    let denom = 1.0 - 2.0 * eps;
    LossEval {
        value: ((1.0 - eps) * softplus(-delta) - eps * softplus(delta)) / denom,
        d_margin: -sigmoid(-delta) - eps / denom,
    }
}

pub fn ipo_loss(delta: f64, cfg: &LossConfig) -> LossEval {
    squared_to_target(delta, 1.0 / (2.0 * cfg.beta))
}

/// IPO with the margin target scaled by vote strength, `(2p-1)/(2β)`.
///
/// This is the two-term squared objective with the hard labels replaced by
/// `p` and `1-p`, halved and with the constant dropped.
pub fn vipo_loss(delta: f64, p: f64, cfg: &LossConfig) -> LossEval {
    squared_to_target(delta, (2.0 * p - 1.0) / (2.0 * cfg.beta))
}

pub fn vdpo_loss(delta: f64, p: f64) -> LossEval {
    preference_nll(delta, p)
}

fn squared_to_target(delta: f64, target: f64) -> LossEval {
    let e = delta - target;
    LossEval {
        value: e * e,
        d_margin: 2.0 * e,
    }
}

/// Margin at which a loss's derivative vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StationaryMargin {
    Finite(f64),
    Unbounded,
}

impl StationaryMargin {
    pub fn finite(self) -> Option<f64> {
        match self {
            StationaryMargin::Finite(v) => Some(v),
            StationaryMargin::Unbounded => None,
        }
    }
}

/// Closed-form fixed point of the margin dynamics for each loss.
pub fn stationary_margin(kind: LossKind, p: f64, cfg: &LossConfig) -> StationaryMargin {
    use StationaryMargin::*;
    let cross_entropy = |q: f64| {
        if q <= 0.0 || q >= 1.0 {
            Unbounded
        } else {
            Finite(logit(q))
        }
    };
    match kind {
        LossKind::Dpo | LossKind::Rdpo => Unbounded,
        LossKind::Cdpo => cross_entropy(1.0 - cfg.epsilon),
        LossKind::Vdpo => cross_entropy(p),
        LossKind::Ipo => Finite(1.0 / (2.0 * cfg.beta)),
        LossKind::Vipo => Finite((2.0 * p - 1.0) / (2.0 * cfg.beta)),
    }
}

/// Per-pair quantities needed to form the logit gradient.
#[derive(Debug, Clone, Copy)]
pub struct PairTerm {
    pub margin: f64,
    pub loss: LossEval,
    /// `dL/dΔ · β`: the gradient is `+coeff` at `y1`, `-coeff` at `y2`.
    pub coeff: f64,
}

pub fn pair_term(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    pair: &VotedPair,
    cfg: &LossConfig,
) -> Result<PairTerm> {
    let margin = implicit_reward_margin(pi, reference, pair.context, pair.y1, pair.y2, cfg.margin())?;
    let loss = cfg.eval(margin, pair.target.map(TargetPreference::value))?;
    Ok(PairTerm {
        margin,
        loss,
        coeff: loss.d_margin * cfg.beta,
    })
}

/// Analytic gradient of a single pair's loss with respect to every logit of
/// `pi`, in the row-major layout of [`TabularPolicy::logits`].
///
/// The softmax normalizers of `y1` and `y2` cancel in the margin, so only
/// the two entries `(x, y1)` and `(x, y2)` are non-zero.
pub fn loss_grad_logits(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    pair: &VotedPair,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    let term = pair_term(pi, reference, pair, cfg)?;
    let k = pi.num_candidates();
    let mut grad = vec![0.0; pi.logits().len()];
    grad[pair.context.0 * k + pair.y1.0] += term.coeff;
    grad[pair.context.0 * k + pair.y2.0] -= term.coeff;
    Ok(grad)
}

/// Central-difference gradient, perturbing one logit of `pi` at a time.
pub fn finite_diff_grad(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    pair: &VotedPair,
    cfg: &LossConfig,
    h: f64,
) -> Result<Vec<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(VpoError::param("h", format!("must lie in [1e-7, 1e-3], got {h}")));
    }
    let mut probe = pi.clone();
    let mut grad = Vec::with_capacity(pi.logits().len());
    for i in 0..pi.logits().len() {
        let orig = probe.logits()[i];
        probe.logits_mut()[i] = orig + h;
        let up = pair_term(&probe, reference, pair, cfg)?.loss.value;
        probe.logits_mut()[i] = orig - h;
        let down = pair_term(&probe, reference, pair, cfg)?.loss.value;
        probe.logits_mut()[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Worst disagreement found by [`gradcheck`].
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub worst_rel_error: f64,
    pub worst_kind: LossKind,
    pub worst_trial: usize,
    pub per_kind_worst: Vec<(LossKind, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.worst_rel_error < tol
    }
}

/// Elementwise `|a - b| / max(1, |a|)`, maximized over entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compares analytic and central-difference gradients on `trials` random
/// (policy, pair, config) cases per loss kind.
pub fn gradcheck(trials: usize, seed: u64, h: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_kind_worst = Vec::new();
    let mut worst = (0.0, LossKind::Dpo, 0);
    for kind in LossKind::ALL {
        let mut kind_worst: f64 = 0.0;
        for trial in 0..trials {
            let (pi, reference, pair, cfg) = random_case(kind, &mut rng)?;
            let analytic = loss_grad_logits(&pi, &reference, &pair, &cfg)?;
            let numeric = finite_diff_grad(&pi, &reference, &pair, &cfg, h)?;
            let err = max_rel_error(&analytic, &numeric);
            kind_worst = kind_worst.max(err);
            if err > worst.0 || !err.is_finite() {
                worst = (err, kind, trial);
            }
        }
        per_kind_worst.push((kind, kind_worst));
    }
    Ok(GradCheckReport {
        trials,
        worst_rel_error: worst.0,
        worst_kind: worst.1,
        worst_trial: worst.2,
        per_kind_worst,
    })
}

fn random_case(
    kind: LossKind,
    rng: &mut ChaCha8Rng,
) -> Result<(TabularPolicy, TabularPolicy, VotedPair, LossConfig)> {
    let contexts = rng.random_range(1..=4);
    let candidates = rng.random_range(2..=6);
    let pi = TabularPolicy::random(contexts, candidates, 3.0, PolicyRole::Trained, rng)?;
    let reference = TabularPolicy::random(contexts, candidates, 3.0, PolicyRole::Reference, rng)?;
    let x = rng.random_range(0..contexts);
    let y1 = rng.random_range(0..candidates);
    let y2 = (y1 + rng.random_range(1..candidates)) % candidates;
    let beta = rng.random_range(0.05..1.0);
    let epsilon = rng.random_range(0.0..0.45);
    let p = TargetPreference::new(rng.random_range(0.01..0.99))?;
    let pair = VotedPair::new(x, y1, y2, crate::vote_model::VoteCounts::new(1.0, 1.0)?)?
        .with_target(p);
    Ok((pi, reference, pair, LossConfig::new(kind, beta, epsilon)?))
}
