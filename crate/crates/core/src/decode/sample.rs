use super::{is_eos, DecodeLimits, Decoded, Hypothesis, NoiseSource, StepModel};
use crate::error::Result;
use crate::model::BOS;
use crate::numeric::{categorical_sample, RngStream};

/// Ancestral sampling: draw each token from the model's next-token
/// distribution until EOS or `max_len`.
pub fn sample_decode<M: StepModel>(
    model: &M,
    rng: &mut RngStream,
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
        let probs: Vec<f64> = lp.iter().map(|x| x.exp()).collect();
        let tok = categorical_sample(rng, &probs)?;
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
