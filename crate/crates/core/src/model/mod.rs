//! Attention-based conditional recurrent language model.
//!
//! A bidirectional GRU encoder produces one annotation `c_i = [f_i; b_i]`
//! per source position. The decoder starts from
//! `h_0 = tanh(W_init · mean(c) + b_init)` and at each step `t`, given the
//! previous target token `x_{t-1}` (BOS at `t = 1`) and a noise vector `ε_t`:
//!
//! ```text
//! h̃     = h_{t-1} + ε_t
//! e_i   = v · tanh(Q h̃ + K c_i + b)          additive alignment score
//! α     = softmax(e)
//! ctx   = Σ α_i c_i
//! h_t   = GRU([E[x_{t-1}]; ctx], h̃)
//! log p(x_t | x_<t, Y) = log_softmax(W_out [h_t; ctx] + b_out)
//! ```
//!
//! Noise is zero everywhere except inside noisy decoding chains.

mod gru;
mod io;
mod params;
mod vocab;

pub(crate) use gru::{backward as gru_backward, GruCache};
pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use params::{Dims, GruParams, ModelParams, TENSOR_NAMES};
pub use vocab::{
    sibling_vocab_paths, Vocab, BOS, BOS_SYMBOL, EOS, EOS_SYMBOL, PAD, PAD_SYMBOL, SRC_VOCAB_FILE,
    TGT_VOCAB_FILE,
};

use crate::error::{Error, Result};
use crate::numeric::{axpy, dot, log_softmax_in_place, softmax_in_place};

/// Per-position annotations of a source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSource {
    /// `[forward; backward]` GRU states, each `2·d_hid` long.
    pub annotations: Vec<Vec<f64>>,
    /// `K c_i`, precomputed for attention.
    pub(crate) keys: Vec<Vec<f64>>,
}

impl EncodedSource {
    pub fn source_len(&self) -> usize {
        self.annotations.len()
    }
}

/// Decoder hidden vector and the number of steps taken so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub t: usize,
}

pub(crate) struct EncoderTrace {
    pub fwd: Vec<GruCache>,
    pub bwd: Vec<GruCache>,
    pub mean: Vec<f64>,
}

pub(crate) fn encode_traced(
    params: &ModelParams,
    source: &[usize],
) -> Result<(EncodedSource, EncoderTrace)> {
    if source.is_empty() {
        return Err(Error::contract("source sequence is empty"));
    }
    let vs = params.dims.src_vocab;
    if let Some(&bad) = source.iter().find(|&&t| t >= vs) {
        return Err(Error::Vocab(format!(
            "source token {bad} outside vocabulary of size {vs}"
        )));
    }
    let d = params.dims.d_hid;
    let len = source.len();

    let mut fwd = Vec::with_capacity(len);
    let mut h = vec![0.0; d];
    let mut fwd_states = Vec::with_capacity(len);
    for &tok in source {
        let (h_new, cache) = gru::forward(&params.enc_fwd, params.src_embed.row(tok), &h);
        fwd.push(cache);
        fwd_states.push(h_new.clone());
        h = h_new;
    }

    let mut bwd = Vec::with_capacity(len);
    let mut bwd_states = vec![Vec::new(); len];
    let mut h = vec![0.0; d];
    for i in (0..len).rev() {
        let (h_new, cache) = gru::forward(&params.enc_bwd, params.src_embed.row(source[i]), &h);
        bwd.push(cache);
        bwd_states[i] = h_new.clone();
        h = h_new;
    }
    bwd.reverse();

    let annotations: Vec<Vec<f64>> = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(mut f, b)| {
            f.extend(b);
            f
        })
        .collect();

    let keys = annotations
        .iter()
        .map(|c| {
            let mut k = vec![0.0; d];
            params.att_key.matvec_acc(c, &mut k);
            k
        })
        .collect();

    let mut mean = vec![0.0; 2 * d];
    for c in &annotations {
        axpy(1.0 / len as f64, c, &mut mean);
    }

    Ok((
        EncodedSource { annotations, keys },
        EncoderTrace { fwd, bwd, mean },
    ))
}

/// Run the bidirectional encoder over `source`.
pub fn encode(params: &ModelParams, source: &[usize]) -> Result<EncodedSource> {
    encode_traced(params, source).map(|(enc, _)| enc)
}

fn initial_from_mean(params: &ModelParams, mean: &[f64]) -> Vec<f64> {
    let mut h = params.init_b.data().to_vec();
    params.init_w.matvec_acc(mean, &mut h);
    h.iter_mut().for_each(|x| *x = x.tanh());
    h
}

/// Decoder state before the first target token.
pub fn initial_state(params: &ModelParams, enc: &EncodedSource) -> DecoderState {
    let d = params.dims.d_hid;
    let mut mean = vec![0.0; 2 * d];
    let len = enc.source_len() as f64;
    for c in &enc.annotations {
        axpy(1.0 / len, c, &mut mean);
    }
    DecoderState {
        h: initial_from_mean(params, &mean),
        t: 0,
    }
}

pub(crate) struct AttentionTrace {
    /// `tanh(Q h + K c_i + b)` per position
    pub hidden: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

fn attend(params: &ModelParams, enc: &EncodedSource, query: &[f64]) -> (Vec<f64>, AttentionTrace) {
    let d = params.dims.d_hid;
    let mut q = params.att_bias.data().to_vec();
    params.att_query.matvec_acc(query, &mut q);
    let v = params.att_score.row(0);

    let mut hidden = Vec::with_capacity(enc.source_len());
    let mut alpha = Vec::with_capacity(enc.source_len());
    for k in &enc.keys {
        let u: Vec<f64> = q.iter().zip(k).map(|(a, b)| (a + b).tanh()).collect();
        alpha.push(dot(v, &u));
        hidden.push(u);
    }
    softmax_in_place(&mut alpha);

    let mut ctx = vec![0.0; 2 * d];
    for (a, c) in alpha.iter().zip(&enc.annotations) {
        axpy(*a, c, &mut ctx);
    }
    (ctx, AttentionTrace { hidden, alpha })
}

/// Attention context for the decoder hidden state `state.h`; returns the
/// context vector and the attention weights.
pub fn attention_context(
    params: &ModelParams,
    state: &DecoderState,
    enc: &EncodedSource,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.h.len() != params.dims.d_hid {
        return Err(Error::contract(format!(
            "state has dim {}, model d_hid is {}",
            state.h.len(),
            params.dims.d_hid
        )));
    }
    let (ctx, trace) = attend(params, enc, &state.h);
    Ok((ctx, trace.alpha))
}

pub(crate) struct StepTrace {
    /// perturbed previous state, `h_{t-1} + ε_t`
    pub h_in: Vec<f64>,
    pub prev: usize,
    pub att: AttentionTrace,
    pub gru: GruCache,
    /// `[h_t; ctx]`
    pub readout_in: Vec<f64>,
}

pub(crate) fn step_traced(
    params: &ModelParams,
    state: &DecoderState,
    prev: usize,
    enc: &EncodedSource,
    noise: &[f64],
) -> Result<(DecoderState, Vec<f64>, StepTrace)> {
    let dims = params.dims;
    if state.h.len() != dims.d_hid || noise.len() != dims.d_hid {
        return Err(Error::contract(format!(
            "decoder step: state dim {}, noise dim {}, d_hid {}",
            state.h.len(),
            noise.len(),
            dims.d_hid
        )));
    }
    if prev >= dims.tgt_vocab {
        return Err(Error::Vocab(format!(
            "target token {prev} outside vocabulary of size {}",
            dims.tgt_vocab
        )));
    }
    let h_in: Vec<f64> = state.h.iter().zip(noise).map(|(h, e)| h + e).collect();
    let (ctx, att) = attend(params, enc, &h_in);

    let mut x = params.tgt_embed.row(prev).to_vec();
    x.extend_from_slice(&ctx);
    let (h_new, gru) = gru::forward(&params.dec, &x, &h_in);

    let mut readout_in = h_new.clone();
    readout_in.extend_from_slice(&ctx);
    let mut logp = params.out_b.data().to_vec();
    params.out_w.matvec_acc(&readout_in, &mut logp);
    log_softmax_in_place(&mut logp);

    let next = DecoderState {
        h: h_new,
        t: state.t + 1,
    };
    let trace = StepTrace {
        h_in,
        prev,
        att,
        gru,
        readout_in,
    };
    Ok((next, logp, trace))
}

/// One decoder transition with `noise` added to the previous hidden state.
/// Returns the next state and log-probabilities of the next target token.
pub fn decoder_step(
    params: &ModelParams,
    state: &DecoderState,
    prev_token: usize,
    enc: &EncodedSource,
    noise: &[f64],
) -> Result<(DecoderState, Vec<f64>)> {
    step_traced(params, state, prev_token, enc, noise).map(|(s, lp, _)| (s, lp))
}

/// Force-decode `target` with zero noise and return the per-step
/// log-probabilities of its tokens.
pub fn step_log_probs(
    params: &ModelParams,
    enc: &EncodedSource,
    target: &[usize],
) -> Result<Vec<f64>> {
    let zero = vec![0.0; params.dims.d_hid];
    let mut state = initial_state(params, enc);
    let mut prev = BOS;
    let mut out = Vec::with_capacity(target.len());
    for &tok in target {
        let (next, lp) = decoder_step(params, &state, prev, enc, &zero)?;
        let p = *lp
            .get(tok)
            .ok_or_else(|| Error::Vocab(format!("target token {tok} outside vocabulary")))?;
        out.push(p);
        state = next;
        prev = tok;
    }
    Ok(out)
}

/// `log p(target | source)` under the non-noisy model. `target` must end
/// with EOS.
pub fn score_sequence(params: &ModelParams, source: &[usize], target: &[usize]) -> Result<f64> {
    if target.last() != Some(&EOS) {
        return Err(Error::contract("scored target must end with EOS"));
    }
    let enc = encode(params, source)?;
    Ok(step_log_probs(params, &enc, target)?
        .into_iter()
        .fold(0.0, |a, b| a + b))
}
