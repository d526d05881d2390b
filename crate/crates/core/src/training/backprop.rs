//! Negative log-likelihood and its gradient by backpropagation through time.

use rayon::prelude::*;

use super::data::SequencePair;
use crate::error::{Error, Result};
use crate::model::{self, gru_backward, ModelParams};
use crate::numeric::axpy;

/// Gradient with one tensor per model tensor, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer(ModelParams);

impl GradientBuffer {
    pub fn zeros_like(params: &ModelParams) -> Self {
        GradientBuffer(params.zeros_like())
    }

    pub fn as_params(&self) -> &ModelParams {
        &self.0
    }

    pub fn as_params_mut(&mut self) -> &mut ModelParams {
        &mut self.0
    }

    pub fn into_params(self) -> ModelParams {
        self.0
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .tensors()
            .iter()
            .map(|(_, t)| t.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.0.tensors_mut() {
            t.scale(k);
        }
    }

    pub fn add(&mut self, other: &GradientBuffer) {
        self.0.add_scaled(&other.0, 1.0);
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

/// Rescale `g` to norm `clip_norm` when its global L2 norm exceeds it.
pub fn clip_gradients(mut g: GradientBuffer, clip_norm: f64) -> GradientBuffer {
    debug_assert!(clip_norm > 0.0);
    let norm = g.global_norm();
    if norm > clip_norm {
        g.scale(clip_norm / norm);
    }
    g
}

/// Accumulate `weight · ∂(−log p(target | source))/∂θ` into `grads` and
/// return `−log p(target | source)`.
pub fn sequence_gradient(
    params: &ModelParams,
    pair: &SequencePair,
    weight: f64,
    grads: &mut GradientBuffer,
) -> Result<f64> {
    let g = &mut grads.0;
    let d = params.dims.d_hid;
    let e = params.dims.d_emb;
    let (enc, etrace) = model::encode_traced(params, &pair.source)?;
    let len = enc.source_len();
    let init = model::initial_state(params, &enc);

    // forward
    let zero = vec![0.0; d];
    let mut state = init.clone();
    let mut prev = model::BOS;
    let mut steps = Vec::with_capacity(pair.target.len());
    let mut nll = 0.0;
    for &tok in &pair.target {
        let (next, lp, trace) = model::step_traced(params, &state, prev, &enc, &zero)?;
        let p = *lp
            .get(tok)
            .ok_or_else(|| Error::Vocab(format!("target token {tok} outside vocabulary")))?;
        nll -= p;
        steps.push((lp, trace, tok));
        state = next;
        prev = tok;
    }

    // backward through the decoder
    let mut d_keys = vec![vec![0.0; d]; len];
    let mut d_annot = vec![vec![0.0; 2 * d]; len];
    let mut ds = vec![0.0; d];
    let v = params.att_score.row(0);
    for (lp, tr, tok) in steps.iter().rev() {
        let dlogits: Vec<f64> = lp
            .iter()
            .enumerate()
            .map(|(j, l)| weight * (l.exp() - if j == *tok { 1.0 } else { 0.0 }))
            .collect();
        g.out_w.outer_acc(&dlogits, &tr.readout_in);
        axpy(1.0, &dlogits, g.out_b.data_mut());
        let mut dro = vec![0.0; 3 * d];
        params.out_w.matvec_t_acc(&dlogits, &mut dro);
        let mut dh_new = ds.clone();
        axpy(1.0, &dro[..d], &mut dh_new);
        let mut dctx = dro[d..].to_vec();

        let mut dx = vec![0.0; e + 2 * d];
        let mut dh_in = vec![0.0; d];
        gru_backward(
            &params.dec,
            &tr.gru,
            &dh_new,
            &mut g.dec,
            &mut dx,
            &mut dh_in,
        );
        axpy(1.0, &dx[..e], g.tgt_embed.row_mut(tr.prev));
        axpy(1.0, &dx[e..], &mut dctx);

        // context = Σ α_i c_i, α = softmax(v · tanh(Q h_in + K c_i + b))
        let alpha = &tr.att.alpha;
        let dalpha: Vec<f64> = enc
            .annotations
            .iter()
            .map(|c| c.iter().zip(&dctx).map(|(a, b)| a * b).sum())
            .collect();
        let mean_da: f64 = alpha.iter().zip(&dalpha).map(|(a, b)| a * b).sum();
        let mut dq = vec![0.0; d];
        let dv = g.att_score.row_mut(0);
        for i in 0..len {
            axpy(alpha[i], &dctx, &mut d_annot[i]);
            let de = alpha[i] * (dalpha[i] - mean_da);
            if de == 0.0 {
                continue;
            }
            let u = &tr.att.hidden[i];
            axpy(de, u, dv);
            for k in 0..d {
                let dpre = de * v[k] * (1.0 - u[k] * u[k]);
                dq[k] += dpre;
                d_keys[i][k] += dpre;
            }
        }
        g.att_query.outer_acc(&dq, &tr.h_in);
        axpy(1.0, &dq, g.att_bias.data_mut());
        params.att_query.matvec_t_acc(&dq, &mut dh_in);
        ds = dh_in;
    }

    // initial state h_0 = tanh(W mean + b)
    let dpre: Vec<f64> = ds
        .iter()
        .zip(&init.h)
        .map(|(g, h)| g * (1.0 - h * h))
        .collect();
    g.init_w.outer_acc(&dpre, &etrace.mean);
    axpy(1.0, &dpre, g.init_b.data_mut());
    let mut dmean = vec![0.0; 2 * d];
    params.init_w.matvec_t_acc(&dpre, &mut dmean);
    for i in 0..len {
        axpy(1.0 / len as f64, &dmean, &mut d_annot[i]);
        g.att_key.outer_acc(&d_keys[i], &enc.annotations[i]);
        params.att_key.matvec_t_acc(&d_keys[i], &mut d_annot[i]);
    }

    // encoder: forward GRU right-to-left, backward GRU left-to-right
    let mut carry = vec![0.0; d];
    for i in (0..len).rev() {
        let mut dh_out = carry;
        axpy(1.0, &d_annot[i][..d], &mut dh_out);
        let mut dx = vec![0.0; e];
        let mut dh_prev = vec![0.0; d];
        gru_backward(
            &params.enc_fwd,
            &etrace.fwd[i],
            &dh_out,
            &mut g.enc_fwd,
            &mut dx,
            &mut dh_prev,
        );
        axpy(1.0, &dx, g.src_embed.row_mut(pair.source[i]));
        carry = dh_prev;
    }
    let mut carry = vec![0.0; d];
    for i in 0..len {
        let mut dh_out = carry;
        axpy(1.0, &d_annot[i][d..], &mut dh_out);
        let mut dx = vec![0.0; e];
        let mut dh_prev = vec![0.0; d];
        gru_backward(
            &params.enc_bwd,
            &etrace.bwd[i],
            &dh_out,
            &mut g.enc_bwd,
            &mut dx,
            &mut dh_prev,
        );
        axpy(1.0, &dx, g.src_embed.row_mut(pair.source[i]));
        carry = dh_prev;
    }

    Ok(nll)
}

/// Mean per-sentence negative log-likelihood of `batch` and its gradient.
///
/// Per-pair gradients are computed in parallel and summed in batch order,
/// so the result does not depend on the number of worker threads.
pub fn nll_loss(params: &ModelParams, batch: &[SequencePair]) -> Result<(f64, GradientBuffer)> {
    if batch.is_empty() {
        return Err(Error::contract("nll_loss: empty batch"));
    }
    let weight = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, GradientBuffer)> = batch
        .par_iter()
        .map(|pair| {
            let mut g = GradientBuffer::zeros_like(params);
            let nll = sequence_gradient(params, pair, weight, &mut g)?;
            Ok((nll, g))
        })
        .collect::<Result<_>>()?;
    let mut total = GradientBuffer::zeros_like(params);
    let mut nll = 0.0;
    for (l, g) in &parts {
        nll += l;
        total.add(g);
    }
    let loss = nll * weight;
    if !loss.is_finite() || !total.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {loss}")));
    }
    Ok((loss, total))
}
