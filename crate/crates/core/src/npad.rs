//! Noisy parallel approximate decoding.
//!
//! `M` chains each run an inner decoder while Gaussian noise
//! `ε_t ~ N(0, σ_t² I)`, `σ_t = σ_0 / t`, is added to the decoder state
//! before every transition. Each chain's output is rescored by the
//! non-noisy model and the highest rescored sequence wins. Chains share
//! nothing but the read-only model: chain `m` draws from its own stream
//! seeded by `derive_seed(base_seed, m)`, so the chains of a run with `M`
//! chains are exactly the first `M` chains of any larger run.
//!
//! With `include_zero_chain`, chain 0 runs with `σ_0 = 0` and reproduces
//! the plain inner decoder, so the selected sequence never scores below it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{
    beam_decode, greedy_decode, sample_decode, score_tokens, DecodeLimits, Decoded, Hypothesis,
    NoiseSource, StepModel,
};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleRule {
    /// `σ_t = σ_0 / t`
    #[default]
    InverseT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub sigma0: f64,
    #[serde(default)]
    pub rule: ScheduleRule,
}

impl NoiseSchedule {
    pub fn inverse_t(sigma0: f64) -> Result<Self> {
        if !sigma0.is_finite() || sigma0 < 0.0 {
            return Err(Error::Config(format!(
                "sigma0 must be finite and non-negative, got {sigma0}"
            )));
        }
        Ok(NoiseSchedule {
            sigma0,
            rule: ScheduleRule::InverseT,
        })
    }

    /// Noise level at decoder step `t ≥ 1`.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        noise_sigma(self, t)
    }
}

pub fn noise_sigma(schedule: &NoiseSchedule, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::contract("noise schedule is defined for t >= 1"));
    }
    match schedule.rule {
        ScheduleRule::InverseT => Ok(schedule.sigma0 / t as f64),
    }
}

/// Decoder run inside each chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerDecoder {
    Greedy,
    Beam {
        width: usize,
    },
    /// ancestral sampling; with `σ_0 = 0` and no zero chain this is plain
    /// best-of-M sampling
    Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpadConfig {
    pub chains: usize,
    pub schedule: NoiseSchedule,
    pub inner: InnerDecoder,
    pub include_zero_chain: bool,
    pub base_seed: u64,
    pub limits: DecodeLimits,
}

impl NpadConfig {
    pub fn new(
        chains: usize,
        sigma0: f64,
        inner: InnerDecoder,
        base_seed: u64,
        limits: DecodeLimits,
    ) -> Result<Self> {
        let cfg = NpadConfig {
            chains,
            schedule: NoiseSchedule::inverse_t(sigma0)?,
            inner,
            include_zero_chain: true,
            base_seed,
            limits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Config("NPAD needs at least one chain".into()));
        }
        if let InnerDecoder::Beam { width: 0 } = self.inner {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        NoiseSchedule::inverse_t(self.schedule.sigma0)?;
        Ok(())
    }

    /// Initial noise level chain `m` actually runs with.
    pub fn chain_sigma0(&self, m: usize) -> f64 {
        if m == 0 && self.include_zero_chain {
            0.0
        } else {
            self.schedule.sigma0
        }
    }
}

/// Output of one noisy chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult<S> {
    pub chain_index: usize,
    pub sigma0_effective: f64,
    pub hypothesis: Hypothesis<S>,
    /// score accumulated while decoding, under the noisy transitions
    pub noisy_logp: f64,
    /// `log p(tokens | source)` under the non-noisy model
    pub rescored_logp: f64,
    pub steps: usize,
}

impl<S> ChainResult<S> {
    pub fn complete(&self) -> bool {
        self.hypothesis.complete
    }

    pub fn tokens(&self) -> &[usize] {
        &self.hypothesis.tokens
    }
}

/// Run chain `m` of `cfg`. Deterministic in `(cfg, m)`.
pub fn run_chain<M: StepModel>(
    model: &M,
    cfg: &NpadConfig,
    m: usize,
) -> Result<ChainResult<M::State>> {
    if m >= cfg.chains {
        return Err(Error::contract(format!(
            "chain {m} outside 0..{}",
            cfg.chains
        )));
    }
    let seed = derive_seed(cfg.base_seed, m as u64);
    let sigma0 = cfg.chain_sigma0(m);
    let mut noise = if sigma0 == 0.0 {
        NoiseSource::Silent
    } else {
        NoiseSource::scheduled(
            seed,
            NoiseSchedule {
                sigma0,
                ..cfg.schedule
            },
        )
    };
    let Decoded { best, steps, .. } = match cfg.inner {
        InnerDecoder::Greedy => greedy_decode(model, &mut noise, cfg.limits)?,
        InnerDecoder::Beam { width } => beam_decode(model, width, &mut noise, cfg.limits)?,
        InnerDecoder::Sampling => {
            let mut rng = RngStream::new(derive_seed(seed, 1));
            sample_decode(model, &mut rng, &mut noise, cfg.limits)?
        }
    };
    let rescored_logp = score_tokens(model, &best.tokens)?;
    Ok(ChainResult {
        chain_index: m,
        sigma0_effective: sigma0,
        noisy_logp: best.logp,
        rescored_logp,
        hypothesis: best,
        steps,
    })
}

#[derive(Debug, Clone)]
pub struct NpadOutcome<S> {
    /// index into `chains` of the selected chain
    pub best: usize,
    pub chains: Vec<ChainResult<S>>,
}

impl<S> NpadOutcome<S> {
    pub fn selected(&self) -> &ChainResult<S> {
        &self.chains[self.best]
    }
}

/// Complete before incomplete, then higher rescored score, then lower chain
/// index.
fn select<S>(chains: &[ChainResult<S>]) -> usize {
    let mut best = 0;
    for (i, c) in chains.iter().enumerate().skip(1) {
        let b = &chains[best];
        let better = match (c.complete(), b.complete()) {
            (true, false) => true,
            (false, true) => false,
            _ => c.rescored_logp > b.rescored_logp,
        };
        if better {
            best = i;
        }
    }
    best
}

/// Run all chains on the current rayon pool and select the best.
pub fn npad_decode<M: StepModel>(model: &M, cfg: &NpadConfig) -> Result<NpadOutcome<M::State>> {
    cfg.validate()?;
    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|m| run_chain(model, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(NpadOutcome {
        best: select(&chains),
        chains,
    })
}

/// Single-threaded [`npad_decode`]; produces identical results.
pub fn npad_decode_sequential<M: StepModel>(
    model: &M,
    cfg: &NpadConfig,
) -> Result<NpadOutcome<M::State>> {
    cfg.validate()?;
    let chains = (0..cfg.chains)
        .map(|m| run_chain(model, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(NpadOutcome {
        best: select(&chains),
        chains,
    })
}

/// One line of the optional per-chain trace (JSON-lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTraceRecord {
    pub input_id: usize,
    pub chain_index: usize,
    pub sigma0_effective: f64,
    pub tokens: Vec<String>,
    pub noisy_logp: f64,
    pub rescored_logp: f64,
}
