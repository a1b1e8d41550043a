//! Exact tabular softmax policies.
//!
//! A [`TabularPolicy`] holds one row of logits per context; the conditional
//! distribution over candidate responses is the softmax of that row. The
//! same type serves as the trained policy and the frozen reference.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VpoError};
use crate::numeric::logsumexp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyRole {
    Trained,
    Reference,
}

impl fmt::Display for PolicyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            PolicyRole::Trained => "trained",
            PolicyRole::Reference => "reference",
        })
    }
}

impl FromStr for PolicyRole {
    type Err = VpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(PolicyRole::Trained),
            "reference" => Ok(PolicyRole::Reference),
            other => Err(VpoError::param(
                "role",
                format!("expected `trained` or `reference`, got `{other}`"),
            )),
        }
    }
}

/// Scale `β` of the implicit reward `β log π/π_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginConfig {
    beta: f64,
}

impl MarginConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(VpoError::param("beta", format!("must be finite and > 0, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Logit table of shape `(num_contexts, num_candidates)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_contexts: usize,
    num_candidates: usize,
    role: PolicyRole,
    logits: Vec<f64>,
}

impl TabularPolicy {
    /// All-zero logits, i.e. the uniform distribution in every context.
    pub fn uniform(num_contexts: usize, num_candidates: usize, role: PolicyRole) -> Result<Self> {
        Self::from_logits(
            num_contexts,
            num_candidates,
            vec![0.0; num_contexts * num_candidates],
            role,
        )
    }

    pub fn from_logits(
        num_contexts: usize,
        num_candidates: usize,
        logits: Vec<f64>,
        role: PolicyRole,
    ) -> Result<Self> {
        if num_contexts == 0 || num_candidates == 0 {
            return Err(VpoError::Shape(format!(
                "policy needs at least one context and one candidate, got {num_contexts}x{num_candidates}"
            )));
        }
        if logits.len() != num_contexts * num_candidates {
            return Err(VpoError::Shape(format!(
                "expected {} logits for a {num_contexts}x{num_candidates} table, got {}",
                num_contexts * num_candidates,
                logits.len()
            )));
        }
        if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
            return Err(VpoError::param(
                "logits",
                format!("entry {i} is not finite ({})", logits[i]),
            ));
        }
        Ok(Self {
            num_contexts,
            num_candidates,
            role,
            logits,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], role: PolicyRole) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(VpoError::Shape("ragged logit rows".into()));
        }
        Self::from_logits(rows.len(), k, rows.concat(), role)
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        num_contexts: usize,
        num_candidates: usize,
        scale: f64,
        role: PolicyRole,
        rng: &mut R,
    ) -> Result<Self> {
        let logits = (0..num_contexts * num_candidates)
            .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        Self::from_logits(num_contexts, num_candidates, logits, role)
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_contexts, self.num_candidates)
    }

    pub fn role(&self) -> PolicyRole {
        self.role
    }

    pub fn with_role(mut self, role: PolicyRole) -> Self {
        self.role = role;
        self
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub(crate) fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn check_context(&self, x: ContextId) -> Result<()> {
        if x.0 < self.num_contexts {
            Ok(())
        } else {
            Err(VpoError::Index {
                kind: "context",
                index: x.0,
                size: self.num_contexts,
            })
        }
    }

    pub fn check_response(&self, y: ResponseId) -> Result<()> {
        if y.0 < self.num_candidates {
            Ok(())
        } else {
            Err(VpoError::Index {
                kind: "response",
                index: y.0,
                size: self.num_candidates,
            })
        }
    }

    pub fn row(&self, x: ContextId) -> Result<&[f64]> {
        self.check_context(x)?;
        let k = self.num_candidates;
        Ok(&self.logits[x.0 * k..(x.0 + 1) * k])
    }

    pub fn logit(&self, x: ContextId, y: ResponseId) -> Result<f64> {
        self.check_response(y)?;
        Ok(self.row(x)?[y.0])
    }

    /// Adds `shift` to every logit of context `x`; the distribution is
    /// unchanged up to rounding.
    pub fn shift_row(&mut self, x: ContextId, shift: f64) -> Result<()> {
        self.check_context(x)?;
        let k = self.num_candidates;
        self.logits[x.0 * k..(x.0 + 1) * k]
            .iter_mut()
            .for_each(|l| *l += shift);
        Ok(())
    }

    /// `log π(y | x) = logit[x][y] - logsumexp(logit[x][·])`.
    pub fn log_prob(&self, x: ContextId, y: ResponseId) -> Result<f64> {
        self.check_response(y)?;
        let row = self.row(x)?;
        Ok(row[y.0] - logsumexp(row))
    }

    pub fn log_probs(&self, x: ContextId) -> Result<Vec<f64>> {
        let row = self.row(x)?;
        let lse = logsumexp(row);
        Ok(row.iter().map(|l| l - lse).collect())
    }

    pub fn probs(&self, x: ContextId) -> Result<Vec<f64>> {
        Ok(self.log_probs(x)?.into_iter().map(f64::exp).collect())
    }

    /// Draws a response from `softmax(logit[x])` by inverse CDF.
    pub fn sample_response<R: Rng + ?Sized>(&self, x: ContextId, rng: &mut R) -> Result<ResponseId> {
        let probs = self.probs(x)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(ResponseId(y));
            }
        }
        // u landed in the rounding slack above the final partial sum.
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
        Ok(ResponseId(last))
    }

    pub(crate) fn same_shape(&self, other: &TabularPolicy) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(VpoError::Shape(format!(
                "policy is {:?} but reference is {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

/// Implicit reward margin `r(x, y1) - r(x, y2)` with `r = β log π/π_ref`.
///
/// The partition term `β log Z(x)` is shared by both responses and cancels.
pub fn implicit_reward_margin(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    x: ContextId,
    y1: ResponseId,
    y2: ResponseId,
    cfg: MarginConfig,
) -> Result<f64> {
    pi.same_shape(reference)?;
    let lr1 = pi.log_prob(x, y1)? - reference.log_prob(x, y1)?;
    let lr2 = pi.log_prob(x, y2)? - reference.log_prob(x, y2)?;
    Ok(cfg.beta * (lr1 - lr2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_log_prob() {
        let p = TabularPolicy::uniform(3, 4, PolicyRole::Trained).unwrap();
        for y in 0..4 {
            assert_abs_diff_eq!(
                p.log_prob(ContextId(1), ResponseId(y)).unwrap(),
                -(4f64).ln(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn two_candidate_log_prob() {
        let p = TabularPolicy::from_rows(&[vec![0.8f64.ln(), 0.2f64.ln()]], PolicyRole::Trained)
            .unwrap();
        assert_abs_diff_eq!(
            p.log_prob(ContextId(0), ResponseId(0)).unwrap(),
            -0.223_143_551_314_209_76,
            epsilon = 1e-12
        );
    }

    #[test]
    fn row_shift_leaves_log_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = TabularPolicy::random(2, 5, 3.0, PolicyRole::Trained, &mut rng).unwrap();
        let before = p.log_probs(ContextId(0)).unwrap();
        p.shift_row(ContextId(0), 123.456).unwrap();
        let after = p.log_probs(ContextId(0)).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn index_and_shape_errors() {
        let p = TabularPolicy::uniform(2, 3, PolicyRole::Trained).unwrap();
        assert!(matches!(
            p.log_prob(ContextId(2), ResponseId(0)),
            Err(VpoError::Index { kind: "context", .. })
        ));
        assert!(matches!(
            p.log_prob(ContextId(0), ResponseId(3)),
            Err(VpoError::Index { kind: "response", .. })
        ));
        let r = TabularPolicy::uniform(2, 4, PolicyRole::Reference).unwrap();
        let cfg = MarginConfig::new(0.1).unwrap();
        assert!(matches!(
            implicit_reward_margin(&p, &r, ContextId(0), ResponseId(0), ResponseId(1), cfg),
            Err(VpoError::Shape(_))
        ));
        assert!(TabularPolicy::from_logits(1, 2, vec![0.0, f64::NAN], PolicyRole::Trained).is_err());
        assert!(MarginConfig::new(0.0).is_err());
    }

    #[test]
    fn margin_examples() {
        let cfg = MarginConfig::new(0.1).unwrap();
        let pi = TabularPolicy::from_rows(&[vec![0.8f64.ln(), 0.2f64.ln()]], PolicyRole::Trained)
            .unwrap();
        let reference = TabularPolicy::uniform(1, 2, PolicyRole::Reference).unwrap();
        let m = implicit_reward_margin(&pi, &reference, ContextId(0), ResponseId(0), ResponseId(1), cfg)
            .unwrap();
        assert_abs_diff_eq!(m, 0.1 * 4f64.ln(), epsilon = 1e-12);
        let rev = implicit_reward_margin(&pi, &reference, ContextId(0), ResponseId(1), ResponseId(0), cfg)
            .unwrap();
        assert_eq!(m, -rev);
        let same = implicit_reward_margin(&pi, &pi, ContextId(0), ResponseId(0), ResponseId(1), cfg)
            .unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn sampling_degenerate_and_fair() {
        let degenerate = TabularPolicy::from_rows(&[vec![-50.0, 50.0, -50.0]], PolicyRole::Trained)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hits = (0..10_000)
            .filter(|_| degenerate.sample_response(ContextId(0), &mut rng).unwrap() == ResponseId(1))
            .count();
        assert!(hits as f64 / 1e4 > 0.999);

        let fair = TabularPolicy::uniform(1, 2, PolicyRole::Trained).unwrap();
        let zeros = (0..10_000)
            .filter(|_| fair.sample_response(ContextId(0), &mut rng).unwrap() == ResponseId(0))
            .count();
        assert!((zeros as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn sampling_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = TabularPolicy::random(1, 6, 2.0, PolicyRole::Trained, &mut rng).unwrap();
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|_| p.sample_response(ContextId(0), &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn role_parsing() {
        assert_eq!("trained".parse::<PolicyRole>().unwrap(), PolicyRole::Trained);
        assert_eq!(PolicyRole::Reference.to_string(), "reference");
        assert!("frozen".parse::<PolicyRole>().is_err());
    }
}
