use super::{is_eos, DecodeLimits, Decoded, Hypothesis, NoiseSource, StepModel};
use crate::error::Result;
use crate::model::BOS;
use crate::numeric::argmax;

/// Pick the most likely token at every step until EOS or `max_len`.
/// `logp` accumulates the distribution used for selection, so it is the
/// noisy score when `noise` is active.
pub fn greedy_decode<M: StepModel>(
    model: &M,
    noise: &mut NoiseSource,
    limits: DecodeLimits,
) -> Result<Decoded<M::State>> {
    let mut state = model.initial_state();
    let mut prev = BOS;
    let mut tokens = Vec::new();
    let mut logp = 0.0;
    let mut complete = false;
    for t in 1..=limits.max_len {
        let eps = noise.draw(t, model.hidden_dim())?;
        let (next, lp) = model.step(&state, prev, &eps)?;
        let tok = argmax(&lp);
        logp += lp[tok];
        tokens.push(tok);
        state = next;
        prev = tok;
        if is_eos(tok) {
            complete = true;
            break;
        }
    }
    let steps = tokens.len();
    let best = Hypothesis {
        tokens,
        logp,
        state,
        complete,
    };
    let completed = if complete {
        vec![best.clone()]
    } else {
        Vec::new()
    };
    Ok(Decoded {
        best,
        completed,
        steps,
    })
}
