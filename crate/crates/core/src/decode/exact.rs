use super::{replay, DecodeLimits, Decoded, Hypothesis, StepModel};
use crate::error::{Error, Result};
use crate::model::EOS;

/// Largest `|V|^max_len` the exhaustive search accepts.
pub const EXACT_SEARCH_LIMIT: u128 = 1_000_000;

/// Exhaustive search over every EOS-terminated sequence of length at most
/// `max_len`, each scored by a full non-noisy replay. Ties go to the
/// lexicographically smallest token sequence.
pub fn exact_decode<M: StepModel>(model: &M, limits: DecodeLimits) -> Result<Decoded<M::State>> {
    let vocab = model.vocab_size();
    let size = (vocab as u128)
        .checked_pow(limits.max_len as u32)
        .unwrap_or(u128::MAX);
    if size > EXACT_SEARCH_LIMIT {
        return Err(Error::SearchSpace {
            size,
            limit: EXACT_SEARCH_LIMIT,
        });
    }
    let body: Vec<usize> = (0..vocab).filter(|&t| t != EOS).collect();

    let mut best: Option<Hypothesis<M::State>> = None;
    for len in 0..limits.max_len {
        let count = body.len().pow(len as u32);
        for index in 0..count {
            // digits of `index` in base |body|, most significant first
            let mut tokens = vec![EOS; len + 1];
            let mut rest = index;
            for slot in tokens[..len].iter_mut().rev() {
                *slot = body[rest % body.len()];
                rest /= body.len();
            }
            let (logp, state) = replay(model, &tokens)?;
            let hyp = Hypothesis {
                tokens,
                logp,
                state,
                complete: true,
            };
            if best.as_ref().is_none_or(|b| hyp.rank(b).is_lt()) {
                best = Some(hyp);
            }
        }
    }
    let best = best.expect("at least the sequence [EOS] is scored");
    Ok(Decoded {
        completed: vec![best.clone()],
        best,
        steps: limits.max_len,
    })
}
