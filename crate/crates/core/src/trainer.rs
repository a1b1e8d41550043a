//! Deterministic mini-batch training of a tabular policy.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VotedPair};
use crate::error::{Result, VpoError};
use crate::eval::margin_by_gap;
use crate::losses::{pair_term, LossConfig, PairTerm};
use crate::policy::{PolicyRole, TabularPolicy};
use crate::vote_model::EstimatorConfig;

/// Batches at least this large are evaluated on the rayon pool.
const PARALLEL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
}

impl OptimizerKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 0.1,
            OptimizerKind::RmsProp => 0.01,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp => "rmsprop",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = VpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            _ => Err(VpoError::param("optimizer", format!("expected sgd or rmsprop, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    /// Prior used when targets are (re)attached, e.g. by the c ablation.
    pub estimator: EstimatorConfig,
    pub epochs: usize,
    /// Exact number of update steps; overrides `epochs` when set.
    pub steps: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub shuffle_seed: u64,
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            estimator: EstimatorConfig::default(),
            epochs: 1,
            steps: None,
            batch_size: 8,
            learning_rate: OptimizerKind::RmsProp.default_learning_rate(),
            optimizer: OptimizerKind::RmsProp,
            rmsprop_decay: 0.99,
            rmsprop_epsilon: 1e-8,
            shuffle_seed: 0,
            trace_every: 1,
        }
    }
}

impl TrainConfig {
    /// Plain SGD with its default learning rate.
    pub fn sgd(loss: LossConfig) -> Self {
        Self {
            loss,
            optimizer: OptimizerKind::Sgd,
            learning_rate: OptimizerKind::Sgd.default_learning_rate(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(VpoError::param("epochs", "must be >= 1"));
        }
        if self.steps == Some(0) {
            return Err(VpoError::param("steps", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(VpoError::param("batch_size", "must be >= 1"));
        }
        if self.trace_every == 0 {
            return Err(VpoError::param("trace_every", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(VpoError::param("learning_rate", "must be finite and >= 0"));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(VpoError::param("rmsprop_decay", "must lie in (0, 1)"));
        }
        if self.rmsprop_epsilon.is_nan() || self.rmsprop_epsilon <= 0.0 {
            return Err(VpoError::param("rmsprop_epsilon", "must be > 0"));
        }
        Ok(())
    }

    pub fn total_steps(&self, dataset_len: usize) -> usize {
        self.steps
            .unwrap_or_else(|| self.epochs * dataset_len.div_ceil(self.batch_size))
    }
}

/// One trace row. All quantities are evaluated over the full training set
/// at the parameters reached after `step` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub margin_all: f64,
    pub margin_small_gap: Option<f64>,
    pub margin_large_gap: Option<f64>,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: Vec<TraceRecord>,
}

impl TrainReport {
    pub fn margin_series(&self) -> Vec<f64> {
        self.steps.iter().map(|r| r.margin_all).collect()
    }

    pub fn loss_series(&self) -> Vec<f64> {
        self.steps.iter().map(|r| r.loss).collect()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.steps.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.steps {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| VpoError::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let steps = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRecord>, _>>()?;
        Ok(Self { steps })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| VpoError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| VpoError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// `params -= lr * grads`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// `state = decay * state + (1 - decay) * g²; params -= lr * g / sqrt(state + eps)`.
pub fn rmsprop_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut [f64],
    lr: f64,
    decay: f64,
    eps: f64,
) {
    for ((p, g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = decay * *s + (1.0 - decay) * g * g;
        *p -= lr * g / (*s + eps).sqrt();
    }
}

fn pair_terms(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    pairs: &[&VotedPair],
    loss: &LossConfig,
) -> Result<Vec<PairTerm>> {
    if pairs.len() >= PARALLEL_BATCH {
        pairs
            .par_iter()
            .map(|p| pair_term(pi, reference, p, loss))
            .collect()
    } else {
        pairs.iter().map(|p| pair_term(pi, reference, p, loss)).collect()
    }
}

/// Mean loss and mean gradient over `pairs`, reduced in the given order.
fn batch_gradient(
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    pairs: &[&VotedPair],
    loss: &LossConfig,
    grad: &mut [f64],
) -> Result<Vec<PairTerm>> {
    let terms = pair_terms(pi, reference, pairs, loss)?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let k = pi.num_candidates();
    let scale = 1.0 / pairs.len() as f64;
    for (pair, t) in pairs.iter().zip(&terms) {
        grad[pair.context.0 * k + pair.y1.0] += scale * t.coeff;
        grad[pair.context.0 * k + pair.y2.0] -= scale * t.coeff;
    }
    Ok(terms)
}

fn trace_record(
    step: usize,
    pi: &TabularPolicy,
    reference: &TabularPolicy,
    ds: &Dataset,
    all: &[&VotedPair],
    loss: &LossConfig,
    scratch: &mut [f64],
) -> Result<TraceRecord> {
    let terms = batch_gradient(pi, reference, all, loss, scratch)?;
    let n = terms.len() as f64;
    let gaps = if ds.has_targets() {
        Some(margin_by_gap(pi, reference, ds, loss.beta())?)
    } else {
        None
    };
    Ok(TraceRecord {
        step,
        loss: terms.iter().map(|t| t.loss.value).sum::<f64>() / n,
        margin_all: terms.iter().map(|t| t.margin).sum::<f64>() / n,
        margin_small_gap: gaps.and_then(|g| g.small_gap),
        margin_large_gap: gaps.and_then(|g| g.large_gap),
        grad_norm: scratch.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })
}

/// Trains a copy of `init` against `reference` on `ds`.
///
/// Runs `cfg.total_steps(|ds|)` updates. The pair order is reshuffled at
/// the start of every pass over the data from a stream seeded by
/// `shuffle_seed`; each update descends the batch-mean gradient. A trace
/// record is taken before the first update, every `trace_every` updates and
/// after the final update.
pub fn train(
    ds: &Dataset,
    reference: &TabularPolicy,
    init: &TabularPolicy,
    cfg: &TrainConfig,
) -> Result<(TabularPolicy, TrainReport)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(VpoError::Config("cannot train on an empty dataset".into()));
    }
    init.same_shape(reference)?;
    ds.check_policy(init)?;
    if cfg.loss.kind().needs_target() && !ds.has_targets() {
        return Err(VpoError::Config(format!(
            "loss {} needs target preferences on every pair; run targets first",
            cfg.loss.kind()
        )));
    }

    let mut pi = init.clone().with_role(PolicyRole::Trained);
    let all: Vec<&VotedPair> = ds.pairs.iter().collect();
    let mut grad = vec![0.0; pi.logits().len()];
    let mut rms_state = vec![0.0; pi.logits().len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut cursor = ds.len();
    let total = cfg.total_steps(ds.len());

    let mut report = TrainReport::default();
    report
        .steps
        .push(trace_record(0, &pi, reference, ds, &all, &cfg.loss, &mut grad)?);

    for step in 1..=total {
        if cursor >= ds.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(ds.len());
        let batch: Vec<&VotedPair> = order[cursor..end].iter().map(|&i| &ds.pairs[i]).collect();
        cursor = end;

        batch_gradient(&pi, reference, &batch, &cfg.loss, &mut grad)?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(VpoError::Numerical {
                step,
                message: format!("gradient entry {i} is {}", grad[i]),
            });
        }
        match cfg.optimizer {
            OptimizerKind::Sgd => sgd_step(pi.logits_mut(), &grad, cfg.learning_rate),
            OptimizerKind::RmsProp => rmsprop_step(
                pi.logits_mut(),
                &grad,
                &mut rms_state,
                cfg.learning_rate,
                cfg.rmsprop_decay,
                cfg.rmsprop_epsilon,
            ),
        }
        if let Some(i) = pi.logits().iter().position(|l| !l.is_finite()) {
            return Err(VpoError::Numerical {
                step,
                message: format!("logit {i} became non-finite"),
            });
        }
        if step % cfg.trace_every == 0 || step == total {
            report
                .steps
                .push(trace_record(step, &pi, reference, ds, &all, &cfg.loss, &mut grad)?);
        }
    }
    Ok((pi, report))
}
