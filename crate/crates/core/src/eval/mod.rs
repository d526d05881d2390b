//! Corpus metrics and the experiment harness.

mod bleu;
mod cell;
mod experiment;
mod report;

pub use bleu::{corpus_bleu, BleuConfig};
pub use cell::{Cell, CellOutput, StrategyKind};
pub use experiment::{
    canonical_cells, evaluate_cell, read_results, results_csv, run_cells, run_experiment,
    run_experiment_with_workers, write_results, CanonicalTable, CellFailure, ExperimentOutcome,
    ExperimentSpec, ResultRow, RESULTS_HEADER,
};
pub use report::render_report;

use crate::error::{Error, Result};
use crate::model::EOS;

/// One decoded test sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub input_id: usize,
    pub strategy: String,
    pub tokens: Vec<usize>,
    /// non-noisy `log p(tokens | source)`
    pub rescored_logp: f64,
    pub reference: Vec<usize>,
}

/// Mean over sentences of `−log p(tokens | source)`.
pub fn mean_nll(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::contract("mean NLL of an empty record set"));
    }
    let total = records.iter().fold(0.0, |acc, r| acc - r.rescored_logp);
    Ok(total / records.len() as f64)
}

/// Total NLL divided by the total number of emitted tokens (EOS included).
pub fn mean_nll_per_token(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::contract("mean NLL of an empty record set"));
    }
    let total = records.iter().fold(0.0, |acc, r| acc - r.rescored_logp);
    let tokens: usize = records.iter().map(|r| r.tokens.len().max(1)).sum();
    Ok(total / tokens as f64)
}

pub fn strip_eos(tokens: &[usize]) -> &[usize] {
    match tokens.last() {
        Some(&EOS) => &tokens[..tokens.len() - 1],
        _ => tokens,
    }
}

/// Corpus BLEU of the decoded tokens against the references, EOS removed.
pub fn records_bleu(records: &[EvalRecord], cfg: BleuConfig) -> Result<f64> {
    let hyps: Vec<Vec<usize>> = records
        .iter()
        .map(|r| strip_eos(&r.tokens).to_vec())
        .collect();
    let refs: Vec<Vec<usize>> = records
        .iter()
        .map(|r| strip_eos(&r.reference).to_vec())
        .collect();
    corpus_bleu(&hyps, &refs, cfg)
}
