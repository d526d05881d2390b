use serde::{Deserialize, Serialize};

use crate::decode::{
    beam_decode, diverse_beam_decode, exact_decode, greedy_decode, score_tokens, DecodeLimits,
    Decoded, NoiseSource, SourceModel,
};
use crate::error::{Error, Result};
use crate::model::{DecoderState, ModelParams};
use crate::npad::{npad_decode, ChainResult, InnerDecoder, NoiseSchedule, NpadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Greedy,
    Beam,
    /// best of `chains` ancestral samples
    Sample,
    Diverse,
    Npad,
    Exact,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Greedy => "greedy",
            StrategyKind::Beam => "beam",
            StrategyKind::Sample => "sample",
            StrategyKind::Diverse => "diverse",
            StrategyKind::Npad => "npad",
            StrategyKind::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            StrategyKind::Greedy,
            StrategyKind::Beam,
            StrategyKind::Sample,
            StrategyKind::Diverse,
            StrategyKind::Npad,
            StrategyKind::Exact,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn uses_width(self) -> bool {
        matches!(
            self,
            StrategyKind::Beam | StrategyKind::Diverse | StrategyKind::Npad
        )
    }

    fn uses_chains(self) -> bool {
        matches!(self, StrategyKind::Sample | StrategyKind::Npad)
    }
}

/// One decoder configuration: a row of a results table.
///
/// Fields a strategy does not use are normalized away (`beam_width` and
/// `chains` to 1, `sigma0` and `eta` to `None`), so equal configurations
/// compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub strategy: StrategyKind,
    #[serde(default = "one")]
    pub beam_width: usize,
    #[serde(default)]
    pub sigma0: Option<f64>,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub eta: Option<f64>,
}

fn one() -> usize {
    1
}

/// Result of decoding one sentence with one cell.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub tokens: Vec<usize>,
    pub rescored_logp: f64,
    pub complete: bool,
    pub steps: usize,
    /// per-chain results for chain-based strategies, in chain order
    pub chains: Vec<ChainResult<DecoderState>>,
}

impl Cell {
    fn plain(strategy: StrategyKind) -> Self {
        Cell {
            strategy,
            beam_width: 1,
            sigma0: None,
            chains: 1,
            eta: None,
        }
    }

    pub fn greedy() -> Self {
        Cell::plain(StrategyKind::Greedy)
    }

    pub fn exact() -> Self {
        Cell::plain(StrategyKind::Exact)
    }

    pub fn beam(width: usize) -> Self {
        Cell {
            beam_width: width,
            ..Cell::plain(StrategyKind::Beam)
        }
    }

    pub fn sample(chains: usize) -> Self {
        Cell {
            chains,
            ..Cell::plain(StrategyKind::Sample)
        }
    }

    pub fn diverse(width: usize, eta: f64) -> Self {
        Cell {
            beam_width: width,
            eta: Some(eta),
            ..Cell::plain(StrategyKind::Diverse)
        }
    }

    /// NPAD around greedy (`width` 1) or beam search.
    pub fn npad(width: usize, sigma0: f64, chains: usize) -> Self {
        Cell {
            beam_width: width,
            sigma0: Some(sigma0),
            chains,
            ..Cell::plain(StrategyKind::Npad)
        }
    }

    /// Check the fields this strategy needs and reject the ones it ignores.
    pub fn validate(&self) -> Result<()> {
        let k = self.strategy;
        let name = k.name();
        if self.beam_width == 0 || self.chains == 0 {
            return Err(Error::Config(format!(
                "{name}: beam_width and chains must be at least 1"
            )));
        }
        if !k.uses_width() && self.beam_width != 1 {
            return Err(Error::Config(format!("{name} does not take a beam width")));
        }
        if !k.uses_chains() && self.chains != 1 {
            return Err(Error::Config(format!("{name} does not take a chain count")));
        }
        match (k == StrategyKind::Npad, self.sigma0) {
            (true, None) => return Err(Error::Config("npad needs sigma0".into())),
            (false, Some(_)) => return Err(Error::Config(format!("{name} does not take sigma0"))),
            (true, Some(s)) => {
                NoiseSchedule::inverse_t(s)?;
            }
            _ => {}
        }
        match (k == StrategyKind::Diverse, self.eta) {
            (true, None) => return Err(Error::Config("diverse needs eta".into())),
            (false, Some(_)) => return Err(Error::Config(format!("{name} does not take eta"))),
            (true, Some(e)) if !e.is_finite() || e < 0.0 => {
                return Err(Error::Config(format!(
                    "eta must be finite and non-negative, got {e}"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Label used in rendered tables.
    pub fn display_name(&self) -> &'static str {
        match self.strategy {
            StrategyKind::Greedy => "Greedy",
            StrategyKind::Beam => "Beam",
            StrategyKind::Sample => "Sto. Sampling",
            StrategyKind::Diverse => "Diverse",
            StrategyKind::Npad if self.beam_width == 1 => "NPAD",
            StrategyKind::Npad => "NPAD+B",
            StrategyKind::Exact => "Exact",
        }
    }

    /// Whether decoding consumes the seed.
    pub fn is_stochastic(&self) -> bool {
        match self.strategy {
            StrategyKind::Sample => true,
            StrategyKind::Npad => self.sigma0.unwrap_or(0.0) > 0.0 && self.chains > 1,
            _ => false,
        }
    }

    fn npad_config(&self, seed: u64, limits: DecodeLimits) -> Result<NpadConfig> {
        match self.strategy {
            StrategyKind::Sample => {
                let mut cfg =
                    NpadConfig::new(self.chains, 0.0, InnerDecoder::Sampling, seed, limits)?;
                cfg.include_zero_chain = false;
                Ok(cfg)
            }
            _ => {
                let inner = if self.beam_width == 1 {
                    InnerDecoder::Greedy
                } else {
                    InnerDecoder::Beam {
                        width: self.beam_width,
                    }
                };
                NpadConfig::new(self.chains, self.sigma0.unwrap_or(0.0), inner, seed, limits)
            }
        }
    }

    /// Decode one source sentence. `seed` drives every random draw.
    pub fn decode(
        &self,
        params: &ModelParams,
        source: &[usize],
        seed: u64,
        limits: DecodeLimits,
    ) -> Result<CellOutput> {
        self.validate()?;
        let model = SourceModel::new(params, source)?;
        let silent = &mut NoiseSource::Silent;
        let plain = |d: Decoded<DecoderState>| -> Result<CellOutput> {
            Ok(CellOutput {
                rescored_logp: score_tokens(&model, &d.best.tokens)?,
                complete: d.best.complete,
                tokens: d.best.tokens,
                steps: d.steps,
                chains: Vec::new(),
            })
        };
        match self.strategy {
            StrategyKind::Greedy => plain(greedy_decode(&model, silent, limits)?),
            StrategyKind::Beam => plain(beam_decode(&model, self.beam_width, silent, limits)?),
            StrategyKind::Diverse => plain(diverse_beam_decode(
                &model,
                self.beam_width,
                self.eta.unwrap_or(0.0),
                silent,
                limits,
            )?),
            StrategyKind::Exact => plain(exact_decode(&model, limits)?),
            StrategyKind::Sample | StrategyKind::Npad => {
                let out = npad_decode(&model, &self.npad_config(seed, limits)?)?;
                let sel = out.selected();
                Ok(CellOutput {
                    tokens: sel.hypothesis.tokens.clone(),
                    rescored_logp: sel.rescored_logp,
                    complete: sel.complete(),
                    steps: sel.steps,
                    chains: out.chains,
                })
            }
        }
    }
}
