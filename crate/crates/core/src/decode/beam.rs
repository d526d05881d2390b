use super::{is_eos, last_token, DecodeLimits, Decoded, Hypothesis, NoiseSource, StepModel};
use crate::error::{Error, Result};

struct Candidate {
    /// score used to pick the next beam (model score minus any penalty)
    select: f64,
    /// model log-probability of the extended prefix
    score: f64,
    /// log-probability of the appended token alone
    step: f64,
    parent: usize,
    token: usize,
}

/// Beam search that keeps `K` prefixes, setting aside each hypothesis that
/// emits EOS and shrinking the live width by one for it. Search ends when
/// the live width reaches zero or after `max_len` steps; the best complete
/// hypothesis is returned.
pub fn beam_decode<M: StepModel>(
    model: &M,
    width: usize,
    noise: &mut NoiseSource,
    limits: DecodeLimits,
) -> Result<Decoded<M::State>> {
    search(model, width, 0.0, noise, limits)
}

/// Beam search where, among the children of one parent ranked by model
/// score, the `r`-th child's selection score is lowered by `eta · r`.
/// Reported scores are the unpenalized model log-probabilities.
pub fn diverse_beam_decode<M: StepModel>(
    model: &M,
    width: usize,
    eta: f64,
    noise: &mut NoiseSource,
    limits: DecodeLimits,
) -> Result<Decoded<M::State>> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Config(format!(
            "eta must be finite and non-negative, got {eta}"
        )));
    }
    search(model, width, eta, noise, limits)
}

fn search<M: StepModel>(
    model: &M,
    width: usize,
    eta: f64,
    noise: &mut NoiseSource,
    limits: DecodeLimits,
) -> Result<Decoded<M::State>> {
    if width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    let vocab = model.vocab_size();
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logp: 0.0,
        state: model.initial_state(),
        complete: false,
    }];
    let mut remaining = width;
    let mut completed: Vec<Hypothesis<M::State>> = Vec::new();
    let mut steps = 0;

    for t in 1..=limits.max_len {
        if remaining == 0 || live.is_empty() {
            break;
        }
        steps += 1;

        let mut expanded = Vec::with_capacity(live.len());
        let mut candidates = Vec::with_capacity(live.len() * vocab);
        for (k, hyp) in live.iter().enumerate() {
            let eps = noise.draw(t, model.hidden_dim())?;
            let (next, lp) = model.step(&hyp.state, last_token(&hyp.tokens), &eps)?;
            let mut rank = vec![0.0; vocab];
            if eta > 0.0 {
                let mut order: Vec<usize> = (0..vocab).collect();
                order.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
                for (r, &j) in order.iter().enumerate() {
                    rank[j] = (r + 1) as f64;
                }
            }
            for (j, &l) in lp.iter().enumerate() {
                let score = hyp.logp + l;
                let select = if eta > 0.0 {
                    score - eta * rank[j]
                } else {
                    score
                };
                candidates.push(Candidate {
                    select,
                    score,
                    step: l,
                    parent: k,
                    token: j,
                });
            }
            expanded.push(next);
        }

        candidates.sort_by(|a, b| {
            b.select
                .total_cmp(&a.select)
                .then(b.step.total_cmp(&a.step))
                .then(a.parent.cmp(&b.parent))
                .then(a.token.cmp(&b.token))
        });
        candidates.truncate(remaining);

        let mut next_live = Vec::with_capacity(candidates.len());
        for c in candidates {
            let mut tokens = live[c.parent].tokens.clone();
            tokens.push(c.token);
            let hyp = Hypothesis {
                tokens,
                logp: c.score,
                state: expanded[c.parent].clone(),
                complete: is_eos(c.token),
            };
            if hyp.complete {
                completed.push(hyp);
                remaining -= 1;
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }

    let best = completed
        .iter()
        .min_by(|a, b| a.rank(b))
        .or_else(|| live.iter().min_by(|a, b| a.rank(b)))
        .cloned()
        .expect("beam keeps at least one hypothesis");
    Ok(Decoded {
        best,
        completed,
        steps,
    })
}
