use serde::{Deserialize, Serialize};

/// One line of decoder output (JSON-lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub input_id: usize,
    pub strategy: String,
    pub tokens: Vec<String>,
    pub logp: f64,
    pub complete: bool,
    pub steps: usize,
    /// base seed of stochastic strategies, `null` otherwise
    pub seed: Option<u64>,
}

impl DecodeRecord {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}
