use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Vocab, EOS};

/// One (source, target) training example. Targets end with EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SequencePair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl SequencePair {
    pub fn new(source: Vec<usize>, mut target: Vec<usize>) -> Result<Self> {
        if target.last() != Some(&EOS) {
            target.push(EOS);
        }
        if source.is_empty() {
            return Err(Error::contract("source sequence is empty"));
        }
        Ok(SequencePair { source, target })
    }

    pub fn check_vocab(&self, src: &Vocab, tgt: &Vocab) -> Result<()> {
        if let Some(t) = self.source.iter().find(|&&t| t >= src.len()) {
            return Err(Error::Vocab(format!("source index {t} out of range")));
        }
        if let Some(t) = self.target.iter().find(|&&t| t >= tgt.len()) {
            return Err(Error::Vocab(format!("target index {t} out of range")));
        }
        Ok(())
    }
}

/// Parse `source tokens<TAB>target tokens` lines. The target column may be
/// absent (`allow_missing_target`), in which case the target is `[EOS]`
/// and only the source is meaningful.
pub fn parse_pairs(
    text: &str,
    src: &Vocab,
    tgt: &Vocab,
    allow_missing_target: bool,
) -> Result<Vec<SequencePair>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |d: String| Error::format("dataset", format!("line {}: {d}", lineno + 1));
        let (s, t) = match line.split_once('\t') {
            Some((s, t)) => (s, Some(t)),
            None if allow_missing_target => (line, None),
            None => return Err(err("expected source<TAB>target".into())),
        };
        let source = src.encode_line(s).map_err(|e| err(e.to_string()))?;
        let target = match t {
            Some(t) => tgt.encode_line(t).map_err(|e| err(e.to_string()))?,
            None => Vec::new(),
        };
        out.push(SequencePair::new(source, target).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_pairs(path: &Path, src: &Vocab, tgt: &Vocab) -> Result<Vec<SequencePair>> {
    parse_pairs(&crate::io::read_to_string(path)?, src, tgt, false)
}

/// Format pairs one per line; the trailing EOS of each target is omitted.
pub fn format_pairs(pairs: &[SequencePair], src: &Vocab, tgt: &Vocab) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        let body = match p.target.split_last() {
            Some((&EOS, body)) => body,
            _ => &p.target[..],
        };
        out.push_str(&src.decode_tokens(&p.source)?);
        out.push('\t');
        out.push_str(&tgt.decode_tokens(body)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_pairs(path: &Path, pairs: &[SequencePair], src: &Vocab, tgt: &Vocab) -> Result<()> {
    crate::io::write_atomic(path, format_pairs(pairs, src, tgt)?.as_bytes())
}
