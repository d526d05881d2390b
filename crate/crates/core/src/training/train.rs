use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backprop::{clip_gradients, nll_loss, GradientBuffer};
use super::data::SequencePair;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::numeric::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    /// per-parameter adaptive step sizes from running first/second moments
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// multiplicative learning-rate decay applied after every epoch
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// stop after this many epochs without validation improvement
    pub patience: Option<usize>,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            lr_decay: 1.0,
            clip_norm: 1.0,
            epochs: 20,
            batch_size: 32,
            patience: Some(5),
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if self.learning_rate.is_nan()
            || self.learning_rate < 0.0
            || self.lr_decay.is_nan()
            || self.lr_decay <= 0.0
        {
            return Err(Error::Config("invalid learning-rate schedule".into()));
        }
        Ok(())
    }
}

/// Per-token negative log-likelihoods of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nll: f64,
    pub valid_nll: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// checkpoint with the lowest validation NLL
    pub params: ModelParams,
    pub trace: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Total NLL and token count of `data` under `params`.
fn corpus_nll(params: &ModelParams, data: &[SequencePair]) -> Result<(f64, usize)> {
    let scores: Vec<f64> = data
        .par_iter()
        .map(|p| model::score_sequence(params, &p.source, &p.target))
        .collect::<Result<_>>()?;
    let tokens = data.iter().map(|p| p.target.len()).sum();
    Ok((-scores.iter().sum::<f64>(), tokens))
}

/// Shuffle, bucket neighbouring examples by target length, and cut into
/// batches whose order is shuffled again.
fn make_batches(
    n: usize,
    lengths: &[usize],
    batch_size: usize,
    rng: &mut RngStream,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for pool in order.chunks_mut(batch_size * 8) {
        pool.sort_by_key(|&i| lengths[i]);
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    rng.shuffle(&mut batches);
    batches
}

struct OptimizerState {
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

fn apply_update(
    params: &mut ModelParams,
    grad: &GradientBuffer,
    lr: f64,
    opt: Optimizer,
    state: &mut OptimizerState,
) {
    match opt {
        Optimizer::Sgd => params.add_scaled(grad.as_params(), -lr),
        Optimizer::Adam { beta1, beta2, eps } => {
            state.step += 1;
            let c1 = 1.0 - beta1.powi(state.step);
            let c2 = 1.0 - beta2.powi(state.step);
            let tensors = params
                .tensors_mut()
                .into_iter()
                .zip(grad.as_params().tensors())
                .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
            for (((_, p), (_, g)), ((_, m), (_, v))) in tensors {
                let it = p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut().iter_mut().zip(v.data_mut()));
                for ((p, g), (m, v)) in it {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Minibatch maximum-likelihood training with gradient-norm clipping and
/// early stopping on validation NLL.
pub fn train(
    params: &ModelParams,
    train_set: &[SequencePair],
    valid_set: &[SequencePair],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let train_keys: HashSet<&SequencePair> = train_set.iter().collect();
    if let Some(p) = valid_set.iter().find(|p| train_keys.contains(p)) {
        return Err(Error::Config(format!(
            "validation pair {:?} also occurs in the training set",
            p.source
        )));
    }

    let mut rng = RngStream::new(cfg.seed);
    let mut current = params.clone();
    let mut opt_state = OptimizerState {
        step: 0,
        m: params.zeros_like(),
        v: params.zeros_like(),
    };
    let (v_nll, v_tok) = corpus_nll(&current, valid_set)?;
    let mut best = (v_nll / v_tok as f64, current.clone(), 0);
    let lengths: Vec<usize> = train_set.iter().map(|p| p.target.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.learning_rate;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let mut epoch_nll = 0.0;
        let mut epoch_tokens = 0;
        for (bi, batch_idx) in make_batches(train_set.len(), &lengths, cfg.batch_size, &mut rng)
            .into_iter()
            .enumerate()
        {
            let batch: Vec<SequencePair> =
                batch_idx.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grad) = nll_loss(&current, &batch).map_err(|e| match e {
                Error::Divergence(msg) => {
                    Error::Divergence(format!("epoch {epoch}, batch {bi}: {msg}"))
                }
                other => other,
            })?;
            epoch_nll += loss * batch.len() as f64;
            epoch_tokens += batch.iter().map(|p| p.target.len()).sum::<usize>();
            let grad = clip_gradients(grad, cfg.clip_norm);
            apply_update(&mut current, &grad, lr, cfg.optimizer, &mut opt_state);
        }
        if !current.is_finite() {
            return Err(Error::Divergence(format!(
                "parameters non-finite after epoch {epoch}"
            )));
        }
        let (v_nll, v_tok) = corpus_nll(&current, valid_set)?;
        let valid = v_nll / v_tok as f64;
        if !valid.is_finite() {
            return Err(Error::Divergence(format!(
                "validation NLL {valid} at epoch {epoch}"
            )));
        }
        trace.push(EpochStats {
            epoch,
            train_nll: epoch_nll / epoch_tokens as f64,
            valid_nll: valid,
        });
        if valid < best.0 {
            best = (valid, current.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
        lr *= cfg.lr_decay;
    }

    Ok(TrainOutcome {
        params: best.1,
        trace,
        best_epoch: best.2,
    })
}

/// Loss trace as CSV with header `epoch,train_nll,valid_nll`.
pub fn loss_trace_csv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_nll,valid_nll\n");
    for s in trace {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            s.epoch, s.train_nll, s.valid_nll
        ));
    }
    out
}

pub fn write_loss_trace(path: &Path, trace: &[EpochStats]) -> Result<()> {
    crate::io::write_atomic(path, loss_trace_csv(trace).as_bytes())
}
