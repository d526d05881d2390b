use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;

pub const PAD_SYMBOL: &str = "<pad>";
pub const BOS_SYMBOL: &str = "<s>";
pub const EOS_SYMBOL: &str = "</s>";

/// Ordered symbol table. Indices 0, 1, 2 are always PAD, BOS and EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Build from content symbols; the reserved symbols are prepended.
    pub fn with_symbols<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols = [PAD_SYMBOL, BOS_SYMBOL, EOS_SYMBOL]
            .into_iter()
            .map(String::from)
            .chain(content.into_iter().map(Into::into))
            .collect();
        Vocab::from_symbols(symbols)
    }

    /// Build from a full symbol list whose first three entries are the
    /// reserved symbols.
    pub fn from_symbols(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 3 {
            return Err(Error::Vocab(format!(
                "vocabulary needs at least 3 symbols, got {}",
                symbols.len()
            )));
        }
        for (i, reserved) in [PAD_SYMBOL, BOS_SYMBOL, EOS_SYMBOL].iter().enumerate() {
            if symbols[i] != *reserved {
                return Err(Error::Vocab(format!(
                    "index {i} must be {reserved}, found {:?}",
                    symbols[i]
                )));
            }
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::Vocab(format!("invalid symbol {s:?} at index {i}")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Vocab(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Vocab { symbols, index })
    }

    /// Reserved symbols plus `n` content symbols `{prefix}0 .. {prefix}{n-1}`.
    pub fn synthetic(prefix: &str, n: usize) -> Result<Self> {
        Vocab::with_symbols((0..n).map(|i| format!("{prefix}{i}")))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.index
            .get(symbol)
            .copied()
            .ok_or_else(|| Error::Vocab(format!("unknown token {symbol:?}")))
    }

    pub fn symbol(&self, index: usize) -> Result<&str> {
        self.symbols
            .get(index)
            .map(String::as_str)
            .ok_or_else(|| Error::Vocab(format!("token index {index} out of range")))
    }

    pub fn encode_line(&self, line: &str) -> Result<Vec<usize>> {
        line.split_whitespace().map(|t| self.index_of(t)).collect()
    }

    pub fn decode_tokens(&self, tokens: &[usize]) -> Result<String> {
        let words: Result<Vec<&str>> = tokens.iter().map(|&t| self.symbol(t)).collect();
        Ok(words?.join(" "))
    }

    /// One symbol per line, index = line number.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let symbols = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Vocab::from_symbols(symbols)
    }

    pub fn to_text(&self) -> String {
        let mut out = self.symbols.join("\n");
        out.push('\n');
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }
}

pub const SRC_VOCAB_FILE: &str = "vocab.src";
pub const TGT_VOCAB_FILE: &str = "vocab.tgt";

/// Default vocabulary files for a model or data file: `vocab.src` and
/// `vocab.tgt` in the same directory.
pub fn sibling_vocab_paths(path: &Path) -> (PathBuf, PathBuf) {
    let dir = path.parent().unwrap_or(Path::new(""));
    (dir.join(SRC_VOCAB_FILE), dir.join(TGT_VOCAB_FILE))
}
