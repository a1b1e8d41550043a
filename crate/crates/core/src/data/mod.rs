//! Voted preference pairs, datasets and their persisted forms.

mod checkpoint;
mod jsonl;
mod synthetic;

pub use checkpoint::{load_policy, save_policy};
pub use jsonl::{
    load_dataset, load_jsonl, parse_jsonl, save_dataset, truth_path, IngestOptions, IngestStats,
};
pub use synthetic::{draw_votes, generate_synthetic, GenConfig, VoteTotalLaw};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VpoError};
use crate::policy::{ContextId, ResponseId, TabularPolicy};
use crate::vote_model::{mmse_estimate, EstimatorConfig, TargetPreference, VoteCounts};

/// One comparison: a context, two distinct responses, their votes and,
/// once attached, the target preference for `y1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotedPair {
    pub context: ContextId,
    pub y1: ResponseId,
    pub y2: ResponseId,
    pub votes: VoteCounts,
    pub target: Option<TargetPreference>,
}

impl VotedPair {
    pub fn new(context: usize, y1: usize, y2: usize, votes: VoteCounts) -> Result<Self> {
        if y1 == y2 {
            return Err(VpoError::param("y2", format!("must differ from y1 (both {y1})")));
        }
        Ok(Self {
            context: ContextId(context),
            y1: ResponseId(y1),
            y2: ResponseId(y2),
            votes,
            target: None,
        })
    }

    pub fn with_target(mut self, p: TargetPreference) -> Self {
        self.target = Some(p);
        self
    }

    /// The pair with responses, votes and target exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            context: self.context,
            y1: self.y2,
            y2: self.y1,
            votes: self.votes.swapped(),
            target: self
                .target
                .map(|p| TargetPreference::new(1.0 - p.value()).expect("1-p of an interior p")),
        }
    }

    /// The pair oriented so that the response with the higher target comes
    /// first. Pairs without a target are returned unchanged.
    pub fn oriented(&self) -> Self {
        match self.target {
            Some(p) if p.value() < 0.5 => self.swapped(),
            _ => self.clone(),
        }
    }
}

/// Latent rewards `r*(x, y)` used to generate votes and to judge policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    contexts: usize,
    candidates: usize,
    rewards: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn from_rows(rewards: Vec<Vec<f64>>) -> Result<Self> {
        let contexts = rewards.len();
        let candidates = rewards.first().map_or(0, Vec::len);
        if contexts == 0 || candidates == 0 || rewards.iter().any(|r| r.len() != candidates) {
            return Err(VpoError::Shape("ground truth must be a non-empty rectangular table".into()));
        }
        if rewards.iter().flatten().any(|r| !r.is_finite()) {
            return Err(VpoError::param("rewards", "entries must be finite"));
        }
        Ok(Self {
            contexts,
            candidates,
            rewards,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.contexts, self.candidates)
    }

    pub fn reward(&self, x: ContextId, y: ResponseId) -> f64 {
        self.rewards[x.0][y.0]
    }

    pub fn row(&self, x: ContextId) -> &[f64] {
        &self.rewards[x.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic,
    IngestedVotes,
    IngestedScores,
}

/// Ordered list of voted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<VotedPair>,
    pub provenance: Provenance,
    pub ground_truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Smallest `(contexts, candidates)` shape covering every id, widened to
    /// the ground-truth shape when one is attached.
    pub fn shape(&self) -> (usize, usize) {
        let mut shape = self.ground_truth.as_ref().map_or((0, 0), GroundTruth::shape);
        for p in &self.pairs {
            shape.0 = shape.0.max(p.context.0 + 1);
            shape.1 = shape.1.max(p.y1.0.max(p.y2.0) + 1);
        }
        shape
    }

    pub fn check_policy(&self, policy: &TabularPolicy) -> Result<()> {
        for (i, p) in self.pairs.iter().enumerate() {
            policy
                .check_context(p.context)
                .and_then(|_| policy.check_response(p.y1))
                .and_then(|_| policy.check_response(p.y2))
                .map_err(|e| VpoError::Shape(format!("pair {i} does not fit the policy: {e}")))?;
        }
        if let Some(gt) = &self.ground_truth {
            if gt.shape() != policy.shape() {
                return Err(VpoError::Shape(format!(
                    "ground truth is {:?} but policy is {:?}",
                    gt.shape(),
                    policy.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn has_targets(&self) -> bool {
        self.pairs.iter().all(|p| p.target.is_some())
    }

    /// A dataset holding only pair `index`.
    pub fn single_pair(&self, index: usize) -> Result<Dataset> {
        let pair = self.pairs.get(index).ok_or(VpoError::Index {
            kind: "pair",
            index,
            size: self.pairs.len(),
        })?;
        Ok(Dataset {
            pairs: vec![pair.clone()],
            provenance: self.provenance,
            ground_truth: self.ground_truth.clone(),
        })
    }
}

/// Sets every pair's target to the posterior-mean estimate of its votes.
pub fn attach_targets(ds: &Dataset, cfg: EstimatorConfig) -> Dataset {
    let pairs = ds
        .pairs
        .iter()
        .map(|p| p.clone().with_target(mmse_estimate(p.votes, cfg)))
        .collect();
    Dataset {
        pairs,
        provenance: ds.provenance,
        ground_truth: ds.ground_truth.clone(),
    }
}

/// Replaces every target with the constant `p`.
pub fn force_targets(ds: &Dataset, p: TargetPreference) -> Dataset {
    let mut out = ds.clone();
    out.pairs.iter_mut().for_each(|pair| pair.target = Some(p));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(v1: f64, v2: f64) -> VotedPair {
        VotedPair::new(0, 1, 2, VoteCounts::new(v1, v2).unwrap()).unwrap()
    }

    fn ds(pairs: Vec<VotedPair>) -> Dataset {
        Dataset {
            pairs,
            provenance: Provenance::IngestedVotes,
            ground_truth: None,
        }
    }

    #[test]
    fn rejects_identical_responses() {
        assert!(VotedPair::new(0, 3, 3, VoteCounts::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn attach_examples() {
        let d = attach_targets(&ds(vec![pair(101.0, 9.0), pair(4.0, 4.0)]), EstimatorConfig::default());
        assert!((d.pairs[0].target.unwrap().value() - 0.910_714).abs() < 1e-6);
        assert_eq!(d.pairs[1].target.unwrap().value(), 0.5);
        assert_eq!(d.pairs[0].votes.v1(), 101.0);
        let again = attach_targets(&d, EstimatorConfig::default());
        assert_eq!(again, d);
    }

    #[test]
    fn orientation() {
        let d = attach_targets(&ds(vec![pair(2.0, 30.0)]), EstimatorConfig::default());
        let o = d.pairs[0].oriented();
        assert_eq!(o.y1, ResponseId(2));
        assert!(o.target.unwrap().value() > 0.5);
        assert_eq!(o.votes.v1(), 30.0);
    }

    #[test]
    fn shape_and_policy_check() {
        let d = ds(vec![pair(1.0, 0.0), VotedPair::new(3, 0, 4, VoteCounts::new(1.0, 1.0).unwrap()).unwrap()]);
        assert_eq!(d.shape(), (4, 5));
        let small = TabularPolicy::uniform(4, 4, crate::policy::PolicyRole::Trained).unwrap();
        assert!(d.check_policy(&small).is_err());
        let ok = TabularPolicy::uniform(4, 5, crate::policy::PolicyRole::Trained).unwrap();
        assert!(d.check_policy(&ok).is_ok());
        assert!(d.single_pair(2).is_err());
        assert_eq!(d.single_pair(1).unwrap().len(), 1);
    }
}
