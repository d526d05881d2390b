//! Hand-written transition tables for decoder tests.

use std::collections::HashMap;

use super::StepModel;
use crate::error::Result;
use crate::model::EOS;

/// Next-token distributions keyed by the emitted prefix. Prefixes without
/// an entry put almost all mass on EOS.
pub(crate) struct TableModel {
    vocab: usize,
    table: HashMap<Vec<usize>, Vec<f64>>,
}

fn to_log_probs(probs: &[f64]) -> Vec<f64> {
    let floored: Vec<f64> = probs.iter().map(|p| p.max(1e-9)).collect();
    let z: f64 = floored.iter().sum();
    floored.iter().map(|p| (p / z).ln()).collect()
}

impl TableModel {
    pub(crate) fn new(vocab: usize, entries: &[(&[usize], &[(usize, f64)])]) -> Self {
        let table = entries
            .iter()
            .map(|(prefix, probs)| {
                let mut dense = vec![0.0; vocab];
                for &(tok, p) in probs.iter() {
                    dense[tok] = p;
                }
                (prefix.to_vec(), to_log_probs(&dense))
            })
            .collect();
        TableModel { vocab, table }
    }

    pub(crate) fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self.table.get(prefix).cloned().unwrap_or_else(|| {
            let mut d = vec![0.0; self.vocab];
            d[EOS] = 1.0;
            to_log_probs(&d)
        })
    }
}

impl StepModel for TableModel {
    /// emitted prefix; `None` before the first step
    type State = Option<Vec<usize>>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn hidden_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Self::State {
        None
    }

    fn step(
        &self,
        state: &Self::State,
        prev: usize,
        _noise: &[f64],
    ) -> Result<(Self::State, Vec<f64>)> {
        let prefix = match state {
            None => Vec::new(),
            Some(p) => {
                let mut p = p.clone();
                p.push(prev);
                p
            }
        };
        let lp = self.log_probs(&prefix);
        Ok((Some(prefix), lp))
    }
}
