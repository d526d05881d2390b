//! Inner decoding strategies.
//!
//! Every decoder works against a [`StepModel`]: anything that can produce
//! next-token log-probabilities from a carried state, a previous token and
//! a noise vector added to that state. [`SourceModel`] binds the neural
//! model to one encoded source sentence; tests also use hand-written
//! transition tables.
//!
//! Scores are raw log-probabilities everywhere, with no length
//! normalization.

mod beam;
mod exact;
mod greedy;
mod record;
mod sample;

pub use beam::{beam_decode, diverse_beam_decode};
pub use exact::{exact_decode, EXACT_SEARCH_LIMIT};
pub use greedy::greedy_decode;
pub use record::DecodeRecord;
pub use sample::sample_decode;

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{self, DecoderState, EncodedSource, ModelParams, BOS, EOS};
use crate::npad::NoiseSchedule;
use crate::numeric::{gaussian_vec, RngStream};

/// A left-to-right conditional model with a perturbable carried state.
pub trait StepModel: Sync {
    type State: Clone + Send + Sync;

    fn vocab_size(&self) -> usize;

    /// Length of the noise vector `step` accepts.
    fn hidden_dim(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    /// Next state and log-probabilities of the next token, with `noise`
    /// added to `state` before the transition.
    fn step(
        &self,
        state: &Self::State,
        prev: usize,
        noise: &[f64],
    ) -> Result<(Self::State, Vec<f64>)>;
}

/// The neural model conditioned on one source sentence.
#[derive(Debug, Clone)]
pub struct SourceModel<'a> {
    params: &'a ModelParams,
    enc: EncodedSource,
}

impl<'a> SourceModel<'a> {
    pub fn new(params: &'a ModelParams, source: &[usize]) -> Result<Self> {
        Ok(SourceModel {
            params,
            enc: model::encode(params, source)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn encoded(&self) -> &EncodedSource {
        &self.enc
    }
}

impl StepModel for SourceModel<'_> {
    type State = DecoderState;

    fn vocab_size(&self) -> usize {
        self.params.dims.tgt_vocab
    }

    fn hidden_dim(&self) -> usize {
        self.params.dims.d_hid
    }

    fn initial_state(&self) -> DecoderState {
        model::initial_state(self.params, &self.enc)
    }

    fn step(
        &self,
        state: &DecoderState,
        prev: usize,
        noise: &[f64],
    ) -> Result<(DecoderState, Vec<f64>)> {
        model::decoder_step(self.params, state, prev, &self.enc, noise)
    }
}

/// A (partial) target sequence with its cumulative log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<S> {
    pub tokens: Vec<usize>,
    pub logp: f64,
    /// state after emitting the last token
    pub state: S,
    /// last token is EOS
    pub complete: bool,
}

impl<S> Hypothesis<S> {
    /// Higher score first, then lexicographically smaller tokens.
    pub(crate) fn rank(&self, other: &Self) -> Ordering {
        other
            .logp
            .total_cmp(&self.logp)
            .then_with(|| self.tokens.cmp(&other.tokens))
    }
}

/// Result of one decoder run.
#[derive(Debug, Clone)]
pub struct Decoded<S> {
    /// best complete hypothesis, or the best live one when none completed
    pub best: Hypothesis<S>,
    /// every hypothesis that reached EOS
    pub completed: Vec<Hypothesis<S>>,
    /// decoder steps taken
    pub steps: usize,
}

impl<S> Decoded<S> {
    pub fn is_complete(&self) -> bool {
        self.best.complete
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_len: usize,
}

impl DecodeLimits {
    pub fn new(max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(DecodeLimits { max_len })
    }

    /// `2 · source_len + 5`
    pub fn for_source(source_len: usize) -> Self {
        DecodeLimits {
            max_len: 2 * source_len + 5,
        }
    }
}

/// Source of the per-step perturbation `ε_t` added to the carried state.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    Silent,
    Scheduled {
        rng: RngStream,
        schedule: NoiseSchedule,
    },
}

impl NoiseSource {
    pub fn scheduled(seed: u64, schedule: NoiseSchedule) -> Self {
        NoiseSource::Scheduled {
            rng: RngStream::new(seed),
            schedule,
        }
    }

    /// Noise for decoder step `t` (1-based).
    pub fn draw(&mut self, t: usize, dim: usize) -> Result<Vec<f64>> {
        match self {
            NoiseSource::Silent => Ok(vec![0.0; dim]),
            NoiseSource::Scheduled { rng, schedule } => gaussian_vec(rng, dim, schedule.sigma(t)?),
        }
    }
}

/// Non-noisy replay of `tokens`: total log-probability and final state.
pub fn replay<M: StepModel>(model: &M, tokens: &[usize]) -> Result<(f64, M::State)> {
    let zero = vec![0.0; model.hidden_dim()];
    let mut state = model.initial_state();
    let mut prev = BOS;
    let mut logp = 0.0;
    for &tok in tokens {
        let (next, lp) = model.step(&state, prev, &zero)?;
        logp += *lp
            .get(tok)
            .ok_or_else(|| Error::Vocab(format!("token {tok} outside vocabulary")))?;
        state = next;
        prev = tok;
    }
    Ok((logp, state))
}

/// Non-noisy `log p(tokens | source)`.
pub fn score_tokens<M: StepModel>(model: &M, tokens: &[usize]) -> Result<f64> {
    replay(model, tokens).map(|(lp, _)| lp)
}

pub(crate) fn last_token(tokens: &[usize]) -> usize {
    tokens.last().copied().unwrap_or(BOS)
}

pub(crate) fn is_eos(tok: usize) -> bool {
    tok == EOS
}

#[cfg(test)]
pub(crate) mod table;

#[cfg(test)]
mod tests;
