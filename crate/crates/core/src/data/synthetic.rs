//! Synthetic voted preferences with a known Bradley-Terry ground truth.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, GroundTruth, Provenance, VotedPair};
use crate::error::{Result, VpoError};
use crate::numeric::sigmoid;
use crate::vote_model::VoteCounts;

/// Distribution of the total number of votes cast on a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum VoteTotalLaw {
    Fixed { n: u64 },
    Uniform { low: u64, high: u64 },
}

impl VoteTotalLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            VoteTotalLaw::Fixed { n: 0 } => {
                Err(VpoError::param("votes", "vote totals must be positive"))
            }
            VoteTotalLaw::Uniform { low, high } if low == 0 || low > high => Err(VpoError::param(
                "votes",
                format!("need 1 <= low <= high, got [{low}, {high}]"),
            )),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            VoteTotalLaw::Fixed { n } => n,
            VoteTotalLaw::Uniform { low, high } => rng.random_range(low..=high),
        }
    }
}

impl Default for VoteTotalLaw {
    fn default() -> Self {
        VoteTotalLaw::Uniform { low: 10, high: 200 }
    }
}

impl fmt::Display for VoteTotalLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VoteTotalLaw::Fixed { n } => write!(f, "fixed:{n}"),
            VoteTotalLaw::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
        }
    }
}

/// Parses `fixed:N` or `uniform:LOW:HIGH`.
impl FromStr for VoteTotalLaw {
    type Err = VpoError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.parse::<u64>()
                .map_err(|_| VpoError::param("votes", format!("bad integer `{t}` in `{s}`")))
        };
        let law = match parts.as_slice() {
            ["fixed", n] => VoteTotalLaw::Fixed { n: num(n)? },
            ["uniform", lo, hi] => VoteTotalLaw::Uniform {
                low: num(lo)?,
                high: num(hi)?,
            },
            _ => {
                return Err(VpoError::param(
                    "votes",
                    format!("expected `fixed:N` or `uniform:LOW:HIGH`, got `{s}`"),
                ))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_contexts: usize,
    pub num_candidates: usize,
    pub pairs_per_context: usize,
    pub vote_total: VoteTotalLaw,
    pub reward_scale: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_contexts: 50,
            num_candidates: 4,
            pairs_per_context: 5,
            vote_total: VoteTotalLaw::default(),
            reward_scale: 1.0,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_contexts == 0 {
            return Err(VpoError::param("contexts", "must be >= 1"));
        }
        if self.num_candidates < 2 {
            return Err(VpoError::param("candidates", "must be >= 2"));
        }
        if self.pairs_per_context == 0 {
            return Err(VpoError::param("pairs_per_context", "must be >= 1"));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale >= 0.0) {
            return Err(VpoError::param("reward_scale", "must be finite and >= 0"));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(VpoError::param("label_noise", "must lie in [0, 0.5)"));
        }
        self.vote_total.validate()
    }
}

/// Draws `v1 ~ Binomial(n, p_star)` and returns `(v1, n - v1)`.
pub fn draw_votes<R: Rng + ?Sized>(rng: &mut R, n: u64, p_star: f64) -> (u64, u64) {
    let v1 = Binomial::new(n, p_star)
        .expect("p_star is a probability")
        .sample(rng);
    (v1, n - v1)
}

/// Generates a dataset from latent rewards `r* ~ scale · N(0, 1)`.
///
/// For each context up to `pairs_per_context` distinct unordered pairs are
/// sampled. Each pair is presented with the higher-reward response first,
/// receives `n` votes from the configured law with
/// `v1 ~ Binomial(n, σ(r*(y1) - r*(y2)))`, and is then, with probability
/// `label_noise`, presented the other way round (responses and their votes
/// swap together). Each context uses its own stream of the master seed.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let k = cfg.num_candidates;
    let available = k * (k - 1) / 2;
    let per_context = if cfg.pairs_per_context > available {
        log::warn!(
            "pairs_per_context {} exceeds the {} distinct pairs of {} candidates; capping",
            cfg.pairs_per_context,
            available,
            k
        );
        available
    } else {
        cfg.pairs_per_context
    };

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rewards: Vec<Vec<f64>> = (0..cfg.num_contexts)
        .map(|_| {
            (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut master);
                    cfg.reward_scale * z
                })
                .collect()
        })
        .collect();

    let all_pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();

    let per_context_pairs: Vec<Vec<VotedPair>> = (0..cfg.num_contexts)
        .into_par_iter()
        .map(|x| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(x as u64 + 1);
            let r = &rewards[x];
            index::sample(&mut rng, available, per_context)
                .into_iter()
                .map(|i| {
                    let (a, b) = all_pairs[i];
                    let flip = rng.random_bool(0.5);
                    let (mut y1, mut y2) = if r[a] > r[b] || (r[a] == r[b] && !flip) {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    let n = cfg.vote_total.sample(&mut rng);
                    let (mut v1, mut v2) = draw_votes(&mut rng, n, sigmoid(r[y1] - r[y2]));
                    if rng.random_bool(cfg.label_noise) {
                        std::mem::swap(&mut y1, &mut y2);
                        std::mem::swap(&mut v1, &mut v2);
                    }
                    let votes = VoteCounts::new(v1 as f64, v2 as f64)?;
                    VotedPair::new(x, y1, y2, votes)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    Ok(Dataset {
        pairs: per_context_pairs.into_iter().flatten().collect(),
        provenance: Provenance::Synthetic,
        ground_truth: Some(GroundTruth::from_rows(rewards)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_gives_balanced_votes() {
        let cfg = GenConfig {
            num_contexts: 2500,
            num_candidates: 4,
            pairs_per_context: 5,
            reward_scale: 0.0,
            seed: 3,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.len() >= 10_000);
        let (v1, tot) = ds.pairs.iter().fold((0.0, 0.0), |(a, t), p| {
            (a + p.votes.v1(), t + p.votes.v1() + p.votes.v2())
        });
        assert!((v1 / tot - 0.5).abs() < 0.01, "fraction {}", v1 / tot);
    }

    #[test]
    fn binomial_vote_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p_star = sigmoid(9f64.ln());
        assert!((p_star - 0.9).abs() < 1e-12);
        let trials = 10_000;
        let won: u64 = (0..trials).map(|_| draw_votes(&mut rng, 100, p_star).0).sum();
        let frac = won as f64 / (100.0 * trials as f64);
        assert!((frac - 0.9).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_capped() {
        let cfg = GenConfig {
            num_contexts: 20,
            num_candidates: 3,
            pairs_per_context: 7,
            seed: 11,
            ..GenConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20 * 3);
        let mut counts = [0; 20];
        a.pairs.iter().for_each(|p| counts[p.context.0] += 1);
        assert!(counts.iter().all(|&c| c <= 3));
    }

    #[test]
    fn clean_labels_follow_ground_truth() {
        let cfg = GenConfig {
            seed: 5,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let gt = ds.ground_truth.as_ref().unwrap();
        assert!(ds
            .pairs
            .iter()
            .all(|p| gt.reward(p.context, p.y1) >= gt.reward(p.context, p.y2)));
    }

    #[test]
    fn noise_swaps_a_fraction_of_pairs() {
        let cfg = GenConfig {
            num_contexts: 2000,
            label_noise: 0.2,
            seed: 8,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let gt = ds.ground_truth.as_ref().unwrap();
        let flipped = ds
            .pairs
            .iter()
            .filter(|p| gt.reward(p.context, p.y1) < gt.reward(p.context, p.y2))
            .count() as f64
            / ds.len() as f64;
        assert!((flipped - 0.2).abs() < 0.02, "flipped {flipped}");
    }

    #[test]
    fn law_parsing_and_validation() {
        assert_eq!("fixed:100".parse::<VoteTotalLaw>().unwrap(), VoteTotalLaw::Fixed { n: 100 });
        assert_eq!(
            "uniform:10:200".parse::<VoteTotalLaw>().unwrap(),
            VoteTotalLaw::Uniform { low: 10, high: 200 }
        );
        assert!("uniform:20:10".parse::<VoteTotalLaw>().is_err());
        assert!("fixed:0".parse::<VoteTotalLaw>().is_err());
        assert!("poisson:3".parse::<VoteTotalLaw>().is_err());
        let bad = GenConfig {
            pairs_per_context: 0,
            ..GenConfig::default()
        };
        assert!(generate_synthetic(&bad).is_err());
    }
}
